// Mask-outline extraction for the overlay: boundary = set pixel with at least
// one unset 4-neighbor. Operates on raw RGBA data so it is testable headless.

export function outlineIndices(rgba: Uint8ClampedArray, width: number, height: number): number[] {
  const set = (x: number, y: number): boolean => {
    if (x < 0 || y < 0 || x >= width || y >= height) return false;
    return rgba[(y * width + x) * 4] > 127;
  };
  const indices: number[] = [];
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      if (!set(x, y)) continue;
      if (!set(x - 1, y) || !set(x + 1, y) || !set(x, y - 1) || !set(x, y + 1)) {
        indices.push(y * width + x);
      }
    }
  }
  return indices;
}

export function drawOutline(
  target: CanvasRenderingContext2D,
  maskImage: CanvasImageSource,
  width: number,
  height: number,
  color: [number, number, number, number] = [255, 64, 64, 255],
): void {
  const scratch = document.createElement("canvas");
  scratch.width = width;
  scratch.height = height;
  const scratchCtx = scratch.getContext("2d");
  if (!scratchCtx) return;
  scratchCtx.drawImage(maskImage, 0, 0, width, height);
  const mask = scratchCtx.getImageData(0, 0, width, height);
  const overlay = target.createImageData(width, height);
  for (const index of outlineIndices(mask.data, width, height)) {
    const base = index * 4;
    overlay.data[base] = color[0];
    overlay.data[base + 1] = color[1];
    overlay.data[base + 2] = color[2];
    overlay.data[base + 3] = color[3];
  }
  target.putImageData(overlay, 0, 0);
}
