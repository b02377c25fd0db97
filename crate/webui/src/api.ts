// Wire types for the ptgraph service (`ptgraph serve`, routes under /v1).
// The editor renders these verbatim; verdicts are never computed client-side.

export type NodeName = string;
export type AdjustmentSet = NodeName[];
/** 0 = pre-treatment outcome Y0, 1 = post-treatment outcome Y1^0. */
export type Period = 0 | 1;
export type ConditionId = "C1" | "C2" | "C3";
export type Overall = "Rejected" | "StronglyQuestioned" | "NotRejected";

export interface RequestOptions {
  c1_conditioning?: "pre_outcome" | "empty";
  completion_cap?: number;
}

export interface AnalyzeRequest {
  graph_text: string;
  options?: RequestOptions;
}

export interface MinsetsRequest {
  graph_text: string;
  outcome: "Y0" | "Y1";
  completion_cap?: number;
}

export interface SimulateRequest {
  graph_text: string;
  seeds?: number;
  range?: [number, number];
  completion_cap?: number;
}

export type Witness =
  | { kind: "edge"; tail: NodeName; head: NodeName }
  | {
      kind: "path";
      nodes: NodeName[];
      steps: ("forward" | "backward")[];
      colliders: boolean[];
      conditioned_on: AdjustmentSet;
      text: string;
    }
  | {
      kind: "asymmetric_subset";
      common_set: AdjustmentSet;
      subset: AdjustmentSet;
      sufficient_for: Period;
      fails_for: Period;
    };

export type Status =
  | { status: "violated"; witnesses: Witness[] }
  | { status: "satisfied"; advisory?: string }
  | { status: "not_applicable"; reason: string };

export type CompletionStatus = Status & {
  completion: number;
  /** Condition 2 re-checked without Y0 -> Y1, when that edge is present. */
  without_y0_y1?: Status;
};

export interface ConditionReport {
  condition: ConditionId;
  title: string;
  severity: "reject" | "strongly_questioned";
  violated_in: number[];
  summary: string;
  per_completion: CompletionStatus[];
}

export interface Verdict {
  overall: Overall;
  rejected_by: ConditionId[];
  caveat: { message: string; completions: number[] } | null;
  conditions: ConditionReport[];
  witnesses: { condition: ConditionId; completion: number; witness: Witness }[];
  obligation: AdjustmentSet | null;
  obligation_statement: string | null;
  completions_analyzed: number;
  completions: { index: number; choices: string[] }[];
  notes: string[];
}

export interface FamiliesByCompletion {
  period: Period;
  per_completion: { completion: number; choices: string[]; sets: AdjustmentSet[] }[];
  intersection: AdjustmentSet[];
  union: AdjustmentSet[];
}

export interface BatchReport {
  seeds: number;
  range: [number, number];
  nonzero_gaps: number;
  threshold: number;
  records: {
    seed: number;
    completion?: number;
    gap: number;
    covariances: { cov_a_y1_0: number; cov_a_y0: number };
    violations: unknown[] | null;
  }[];
}

export interface SourceSpan {
  start: number;
  end: number;
}

export type Violation = { kind: string } & Record<string, unknown>;

export interface ApiError {
  error: "parse" | "validation" | "semantic" | "io";
  message: string;
  parse?: { span: SourceSpan; message: string };
  violations?: Violation[];
}

async function post<T>(base: string, path: string, body: unknown): Promise<T> {
  const res = await fetch(`${base}/v1/${path}`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  const json = await res.json();
  if (!res.ok) throw json as ApiError;
  return json as T;
}

export const analyze = (base: string, req: AnalyzeRequest) => post<Verdict>(base, "analyze", req);
export const minsets = (base: string, req: MinsetsRequest) =>
  post<FamiliesByCompletion>(base, "minsets", req);
export const simulate = (base: string, req: SimulateRequest) => post<BatchReport>(base, "simulate", req);
export const health = async (base: string): Promise<boolean> =>
  fetch(`${base}/v1/health`).then((r) => r.ok, () => false);
