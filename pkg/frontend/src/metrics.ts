// Which Likert metrics a rater must fill in, by subject kind: input-data
// explanations are judged on correctness and usefulness separately, output
// ones on a single combined quality score. Mirrors the service's validation.

import type { SubjectKind } from "./types.js";

export const METRICS_BY_SUBJECT: Readonly<Record<SubjectKind, readonly string[]>> = {
  input: ["correctness", "usefulness"],
  output: ["quality"],
};

export const LIKERT_VALUES = [1, 2, 3, 4, 5] as const;

export function requiredMetrics(kind: SubjectKind): readonly string[] {
  return METRICS_BY_SUBJECT[kind];
}

export function isValidValue(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value) && value >= 1 && value <= 5;
}

/** Metrics still unset; submission stays disabled until this is empty. */
export function missingMetrics(
  kind: SubjectKind,
  values: Readonly<Partial<Record<string, number>>>,
): string[] {
  return requiredMetrics(kind).filter((metric) => !isValidValue(values[metric]));
}

export function isComplete(
  kind: SubjectKind,
  values: Readonly<Partial<Record<string, number>>>,
): boolean {
  return missingMetrics(kind, values).length === 0;
}
