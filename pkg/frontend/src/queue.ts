import type { ReviewClient } from "./api.js";
import type { PendingSubmission } from "./types.js";

/** Minimal persistent key-value surface; window.localStorage satisfies it. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export class MemoryStore implements KeyValueStore {
  private data = new Map<string, string>();
  getItem(key: string): string | null {
    return this.data.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
}

const QUEUE_KEY = "review-queue-v1";

/**
 * Offline submission queue with at-least-once delivery. Failed sends stay
 * queued across reloads; the server deduplicates by latest-wins per
 * (reviewer, prototype), so redelivery is harmless.
 */
export class OfflineQueue {
  constructor(private store: KeyValueStore) {}

  items(): PendingSubmission[] {
    const raw = this.store.getItem(QUEUE_KEY);
    return raw ? (JSON.parse(raw) as PendingSubmission[]) : [];
  }

  private save(items: PendingSubmission[]): void {
    this.store.setItem(QUEUE_KEY, JSON.stringify(items));
  }

  get length(): number {
    return this.items().length;
  }

  enqueue(item: PendingSubmission): void {
    this.save([...this.items(), item]);
  }

  /**
   * Try to deliver everything; stops at the first failure (order preserved)
   * and reports the prototype ids that were acknowledged.
   */
  async flush(client: ReviewClient): Promise<number[]> {
    const pending = this.items();
    const delivered: number[] = [];
    while (pending.length > 0) {
      try {
        await client.deliver(pending[0]);
      } catch {
        break;
      }
      delivered.push(pending[0].prototype_id);
      pending.shift();
      this.save(pending);
    }
    return delivered;
  }
}
