import type { ReviewClient } from "./api.js";
import type { OfflineQueue } from "./queue.js";
import type { PendingSubmission, PrototypeItem } from "./types.js";

export interface Draft {
  representativeness: number | null;
  clarity: number | null;
  excluded: boolean;
}

const emptyDraft = (): Draft => ({
  representativeness: null,
  clarity: null,
  excluded: false,
});

export type SubmitOutcome = "advanced" | "queued" | "blocked";

/**
 * Screen state for one reviewer's pass over the prototype list. Unsubmitted
 * score selections survive navigation; submission requires both scores (or
 * an exclusion) and advances only after the service acknowledged the write,
 * otherwise the payload is queued and the screen stays put.
 */
export class ReviewSession {
  readonly prototypes: PrototypeItem[];
  private drafts = new Map<number, Draft>();
  private rated = new Set<number>();
  private cursor = 0;

  constructor(
    prototypes: PrototypeItem[],
    readonly reviewerId: string,
  ) {
    this.prototypes = prototypes;
  }

  get current(): PrototypeItem {
    return this.prototypes[this.cursor];
  }

  get index(): number {
    return this.cursor;
  }

  draft(prototypeId: number): Draft {
    let d = this.drafts.get(prototypeId);
    if (!d) {
      d = emptyDraft();
      this.drafts.set(prototypeId, d);
    }
    return d;
  }

  setScore(criterion: "representativeness" | "clarity", value: number): void {
    if (!Number.isInteger(value) || value < 1 || value > 5) {
      throw new Error(`score ${value} outside 1..5`);
    }
    this.draft(this.current.prototype_id)[criterion] = value;
  }

  toggleExcluded(): void {
    const d = this.draft(this.current.prototype_id);
    d.excluded = !d.excluded;
  }

  /** Submit stays disabled until both scores are chosen (or excluding). */
  canSubmit(): boolean {
    const d = this.draft(this.current.prototype_id);
    return d.excluded || (d.representativeness !== null && d.clarity !== null);
  }

  isRated(prototypeId: number): boolean {
    return this.rated.has(prototypeId);
  }

  progress(): { rated: number; total: number } {
    return { rated: this.rated.size, total: this.prototypes.length };
  }

  next(): void {
    this.cursor = Math.min(this.cursor + 1, this.prototypes.length - 1);
  }

  prev(): void {
    this.cursor = Math.max(this.cursor - 1, 0);
  }

  goTo(index: number): void {
    if (index < 0 || index >= this.prototypes.length) {
      throw new Error(`index ${index} out of range`);
    }
    this.cursor = index;
  }

  private advanceToNextUnrated(): void {
    const n = this.prototypes.length;
    for (let step = 1; step <= n; step++) {
      const idx = (this.cursor + step) % n;
      if (!this.rated.has(this.prototypes[idx].prototype_id)) {
        this.cursor = idx;
        return;
      }
    }
  }

  payloadForCurrent(): PendingSubmission {
    const proto = this.current;
    const d = this.draft(proto.prototype_id);
    if (d.excluded) {
      // exclusion carries no scores
      return {
        kind: "exclude",
        reviewer_id: this.reviewerId,
        prototype_id: proto.prototype_id,
        excluded: true,
      };
    }
    return {
      kind: "rating",
      reviewer_id: this.reviewerId,
      prototype_id: proto.prototype_id,
      representativeness: d.representativeness!,
      clarity: d.clarity!,
    };
  }

  markRated(prototypeId: number): void {
    this.rated.add(prototypeId);
  }

  /**
   * Deliver the current draft. Advances only on acknowledgment; on network
   * failure the payload is queued, the selection is kept, and the caller
   * should show the offline banner.
   */
  async submitCurrent(client: ReviewClient, queue: OfflineQueue): Promise<SubmitOutcome> {
    if (!this.canSubmit()) {
      return "blocked";
    }
    const payload = this.payloadForCurrent();
    try {
      await client.deliver(payload);
    } catch {
      queue.enqueue(payload);
      return "queued";
    }
    this.markRated(payload.prototype_id);
    this.advanceToNextUnrated();
    return "advanced";
  }

  /** Flush the offline queue; acknowledged items count as rated and the
   * screen advances past the current prototype if it was among them. */
  async flushQueue(client: ReviewClient, queue: OfflineQueue): Promise<number> {
    const delivered = await queue.flush(client);
    for (const prototypeId of delivered) {
      this.markRated(prototypeId);
    }
    if (delivered.includes(this.current.prototype_id)) {
      this.advanceToNextUnrated();
    }
    return delivered.length;
  }
}
