// Wire types, mirroring the service's camelCase JSON exactly.

export type SubjectKind = "input" | "output";
export type Method = "template" | "llm";

export interface AnnotationSummary {
  kind: string;
  annotatedBy: string;
  annotatedAt: string | null;
  score: string | null;
  start: number | null;
  end: number | null;
  body: string | null;
}

export interface ExplanationSummary {
  id: string;
  subjectKind: SubjectKind;
  method: Method;
  modelId: string | null;
  text: string;
  sourceRef: string;
  rawData: string | null;
  prompt: string | null;
  annotations: AnnotationSummary[];
  createdAt: string;
}

export interface ExplanationPage {
  items: ExplanationSummary[];
  total: number;
  limit: number;
  offset: number;
}

export interface Rating {
  explanationId: string;
  raterId: string;
  metric: string;
  value: number;
  submittedAt: string;
}

export interface AggregateRow {
  metric: string;
  method: string;
  count: number;
  mean: number;
}

export interface ExplanationFilter {
  method?: Method;
  subjectKind?: SubjectKind;
  component?: string;
}
