// Shapes mirror the qa-service OpenAPI contract (openapi.json in the
// repository root).

export interface AnswerReference {
  section_id: string;
  text: string;
  source_url: string | null;
}

export interface RetrievalTrace {
  entities: string[];
  triples: string[][];
  entity_candidates: string[];
  triple_candidates: string[];
  intersection: string[];
  seeds: string[];
  fallback_used: boolean;
  expanded: string[];
  dropped_for_budget: string[];
  reason: string | null;
  [key: string]: unknown;
}

export interface Answer {
  summary: string;
  references: AnswerReference[];
  trace?: RetrievalTrace;
}

export interface SectionNode {
  id: string;
  title: string | null;
  body: string;
  source_url: string | null;
  order_index: number;
}

export interface HealthInfo {
  status: string;
  bundle: {
    counts: Record<string, number>;
    dim: number;
    meta: Record<string, unknown>;
  } | null;
}

export type Phase = "idle" | "loading" | "answered" | "error";

export interface ViewState {
  phase: Phase;
  question: string;
  answer: Answer | null;
  /** set when the service reported the question as not answerable (422) */
  noProvisions: boolean;
  errorMessage: string | null;
  /** open section detail, layered over the current results */
  section: SectionNode | null;
  sectionError: string | null;
  debug: boolean;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export class NoProvisionsError extends ApiError {
  constructor(public answer: Answer) {
    super(422, "no provisions found for this question");
    this.name = "NoProvisionsError";
  }
}
