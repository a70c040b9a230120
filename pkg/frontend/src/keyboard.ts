// Keyboard-first labeling: s/f mark success/failure, arrows move the cursor.

export type KeyAction =
  | { kind: "label"; label: "success" | "failure" }
  | { kind: "move"; delta: 1 | -1 }
  | null;

export function actionForKey(key: string): KeyAction {
  switch (key) {
    case "s":
    case "S":
      return { kind: "label", label: "success" };
    case "f":
    case "F":
      return { kind: "label", label: "failure" };
    case "ArrowRight":
    case "ArrowDown":
      return { kind: "move", delta: 1 };
    case "ArrowLeft":
    case "ArrowUp":
      return { kind: "move", delta: -1 };
    default:
      return null;
  }
}
