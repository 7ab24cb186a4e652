// Session state machine behind the questionnaire: holds the queue, the
// Likert values entered for the current item, and the aggregate rows.
// All server traffic goes through the injected ApiClient; nothing here
// touches the DOM, so the whole rating flow is drivable from tests.

import { ApiClient } from "./api.js";
import { isValidValue, missingMetrics, requiredMetrics } from "./metrics.js";
import { buildQueue, type QueueFilter, type ReviewItem } from "./queue.js";
import type { AggregateRow, ExplanationSummary } from "./types.js";

export class ReviewController {
  readonly api: ApiClient;
  readonly raterId: string;

  private unrated: ReviewItem[] = [];
  private completed: ReviewItem[] = [];
  private byId = new Map<string, ExplanationSummary>();
  private pending: Record<string, number> = {};
  lastError: string | null = null;
  aggregates: AggregateRow[] = [];

  constructor(api: ApiClient, raterId: string) {
    if (!raterId.trim()) throw new Error("rater id must not be empty");
    this.api = api;
    this.raterId = raterId.trim();
  }

  /** Fetch server state and rebuild the queue. Keeps old state on failure. */
  async load(filter: QueueFilter = {}): Promise<void> {
    try {
      const explanations = await this.api.listAllExplanations();
      const ratings = await this.api.listRatings({ raterId: this.raterId });
      const queue = buildQueue(explanations, ratings, filter);
      this.byId = new Map(explanations.map((e) => [e.id, e]));
      this.unrated = queue.unrated;
      this.completed = queue.completed;
      this.pending = {};
      this.lastError = null;
    } catch (error) {
      this.lastError = error instanceof Error ? error.message : String(error);
      throw error;
    }
  }

  get current(): ReviewItem | null {
    return this.unrated.length ? this.unrated[0]! : null;
  }

  get unratedCount(): number {
    return this.unrated.length;
  }

  get completedItems(): readonly ReviewItem[] {
    return this.completed;
  }

  get queueItems(): readonly ReviewItem[] {
    return this.unrated;
  }

  /** The paired explanation for side-by-side display, if the server has one. */
  counterpartOf(item: ReviewItem): ExplanationSummary | null {
    return item.counterpartId ? (this.byId.get(item.counterpartId) ?? null) : null;
  }

  get pendingValues(): Readonly<Record<string, number>> {
    return this.pending;
  }

  setValue(metric: string, value: number): void {
    const item = this.current;
    if (!item) throw new Error("no item under review");
    if (!requiredMetrics(item.subjectKind).includes(metric)) {
      throw new Error(`metric ${metric} does not apply to ${item.subjectKind} explanations`);
    }
    if (!isValidValue(value)) throw new Error(`rating must be an integer in 1..5, got ${value}`);
    this.pending[metric] = value;
  }

  /** All required metrics set for the current item. */
  get canSubmit(): boolean {
    const item = this.current;
    return item !== null && missingMetrics(item.subjectKind, this.pending).length === 0;
  }

  /**
   * Persist every pending metric, then advance. The item only leaves the
   * unrated queue once the server acknowledged all its ratings; a failed
   * call leaves queue and entered values untouched.
   */
  async submit(): Promise<ReviewItem> {
    const item = this.current;
    if (!item) throw new Error("no item under review");
    const missing = missingMetrics(item.subjectKind, this.pending);
    if (missing.length) throw new Error(`missing metrics: ${missing.join(", ")}`);
    const acknowledged: Record<string, number> = {};
    try {
      for (const metric of requiredMetrics(item.subjectKind)) {
        const ack = await this.api.submitRating(this.raterId, {
          explanationId: item.explanationId,
          metric,
          value: this.pending[metric]!,
        });
        acknowledged[ack.metric] = ack.value;
      }
    } catch (error) {
      this.lastError = error instanceof Error ? error.message : String(error);
      throw error;
    }
    item.existingRatings = { ...item.existingRatings, ...acknowledged };
    this.unrated.shift();
    this.completed.push(item);
    this.pending = {};
    this.lastError = null;
    return item;
  }

  /** Re-rate an already completed item with the values in `values`. */
  async resubmit(item: ReviewItem, values: Record<string, number>): Promise<void> {
    for (const metric of requiredMetrics(item.subjectKind)) {
      const value = values[metric];
      if (!isValidValue(value)) throw new Error(`rating must be an integer in 1..5, got ${value}`);
      const ack = await this.api.submitRating(this.raterId, {
        explanationId: item.explanationId,
        metric,
        value,
      });
      item.existingRatings[ack.metric] = ack.value;
    }
  }

  async refreshAggregates(): Promise<AggregateRow[]> {
    this.aggregates = await this.api.aggregate();
    return this.aggregates;
  }
}
