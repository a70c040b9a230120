// Strictly ordered annotation write queue. Each labeling decision enqueues a
// POST immediately; failures flip the queue offline and retry with backoff
// while the UI shows the pending count.

import { AnnotationBody } from "./api.js";

export interface QueueSnapshot {
  pending: number;
  offline: boolean;
}

type PostFn = (body: AnnotationBody) => Promise<unknown>;
type AckFn = (body: AnnotationBody) => void;

export class WriteQueue {
  private readonly items: AnnotationBody[] = [];
  private current: Promise<void> | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  offline = false;
  onChange: ((snapshot: QueueSnapshot) => void) | null = null;
  onAck: AckFn | null = null;

  constructor(
    private readonly post: PostFn,
    private readonly retryDelayMs = 2000,
  ) {}

  get pending(): number {
    return this.items.length;
  }

  snapshot(): QueueSnapshot {
    return { pending: this.items.length, offline: this.offline };
  }

  private notify(): void {
    this.onChange?.(this.snapshot());
  }

  enqueue(body: AnnotationBody): void {
    this.items.push(body);
    this.notify();
    void this.flush();
  }

  /** Drain the queue; concurrent calls share one in-flight drain. */
  flush(): Promise<void> {
    if (!this.current) {
      this.current = this.drain().finally(() => {
        this.current = null;
        // items enqueued while the drain was finishing: pick them up unless
        // we are offline (the retry timer owns that case)
        if (this.items.length > 0 && !this.offline && this.retryTimer === null) {
          queueMicrotask(() => void this.flush());
        }
      });
    }
    return this.current;
  }

  private async drain(): Promise<void> {
    while (this.items.length > 0) {
      const head = this.items[0];
      try {
        await this.post(head);
      } catch {
        // leave the head in place; retry the whole tail later, in order
        if (!this.offline) {
          this.offline = true;
          this.notify();
        }
        this.scheduleRetry();
        return;
      }
      this.items.shift();
      if (this.offline) {
        this.offline = false;
      }
      this.onAck?.(head);
      this.notify();
    }
  }

  private scheduleRetry(): void {
    if (this.retryTimer !== null) return;
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      void this.flush();
    }, this.retryDelayMs);
  }
}
