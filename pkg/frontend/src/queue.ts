// Review queue construction: pure, so ordering rules are testable without
// DOM or network. Items pair up template/LLM explanations of the same
// source data for the side-by-side panel.

import { isComplete } from "./metrics.js";
import type { ExplanationSummary, Method, Rating, SubjectKind } from "./types.js";

export interface ReviewItem {
  explanationId: string;
  subjectKind: SubjectKind;
  method: Method;
  text: string;
  rawData: string | null;
  /** Paired explanation of the other method over the same source data. */
  counterpartId: string | null;
  existingRatings: Record<string, number>;
}

export interface QueueFilter {
  method?: Method;
  subjectKind?: SubjectKind;
}

export interface ReviewQueue {
  unrated: ReviewItem[];
  completed: ReviewItem[];
}

function counterpartFor(
  explanation: ExplanationSummary,
  bySource: Map<string, ExplanationSummary[]>,
): string | null {
  const siblings = bySource.get(explanation.sourceRef) ?? [];
  const others = siblings.filter((e) => e.id !== explanation.id);
  // prefer the opposite method; ties broken by id so the pick is stable
  others.sort((a, b) => {
    const aOpposite = a.method === explanation.method ? 1 : 0;
    const bOpposite = b.method === explanation.method ? 1 : 0;
    return aOpposite - bOpposite || a.id.localeCompare(b.id);
  });
  return others.length ? others[0]!.id : null;
}

function byCreation(a: ExplanationSummary, b: ExplanationSummary): number {
  return a.createdAt.localeCompare(b.createdAt) || a.id.localeCompare(b.id);
}

/**
 * Build the rater's queue from server state. Unrated items come first;
 * within each group the order follows creation time, so a fixed rater and
 * a fixed server state always see the same sequence.
 */
export function buildQueue(
  explanations: readonly ExplanationSummary[],
  raterRatings: readonly Rating[],
  filter: QueueFilter = {},
): ReviewQueue {
  const bySource = new Map<string, ExplanationSummary[]>();
  for (const explanation of explanations) {
    const bucket = bySource.get(explanation.sourceRef);
    if (bucket) bucket.push(explanation);
    else bySource.set(explanation.sourceRef, [explanation]);
  }

  const valuesByExplanation = new Map<string, Record<string, number>>();
  for (const rating of raterRatings) {
    const values = valuesByExplanation.get(rating.explanationId) ?? {};
    values[rating.metric] = rating.value;
    valuesByExplanation.set(rating.explanationId, values);
  }

  const unrated: ReviewItem[] = [];
  const completed: ReviewItem[] = [];
  for (const explanation of [...explanations].sort(byCreation)) {
    if (filter.method && explanation.method !== filter.method) continue;
    if (filter.subjectKind && explanation.subjectKind !== filter.subjectKind) continue;
    const existing = valuesByExplanation.get(explanation.id) ?? {};
    const item: ReviewItem = {
      explanationId: explanation.id,
      subjectKind: explanation.subjectKind,
      method: explanation.method,
      text: explanation.text,
      rawData: explanation.rawData,
      counterpartId: counterpartFor(explanation, bySource),
      existingRatings: existing,
    };
    (isComplete(explanation.subjectKind, existing) ? completed : unrated).push(item);
  }
  return { unrated, completed };
}
