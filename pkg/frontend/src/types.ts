/** Wire types for the acquisition service. Field names match the JSON payloads. */

/** One acquisition candidate as scored by the service. */
export interface CandidateRow {
  feature: number;
  feature_name: string;
  expected_u: number;
  expected_e: number;
  q: number;
}

/** Per-feature input metadata from session creation. */
export interface FeatureMeta {
  feature: number;
  name: string;
  categorical: boolean;
  min: number | null;
  max: number | null;
}

export interface Prediction {
  probabilities: number[];
  classes: string[];
  winner: string;
  annotation: string;
}

export interface ObservedEntry {
  feature: number;
  feature_name: string;
  value: number;
}

export interface BreakdownRow {
  feature: number;
  expected_u: number;
  expected_e: number;
  q: number;
}

export interface StepBreakdown {
  lambda: number;
  chosen: number;
  candidates: BreakdownRow[];
}

/** One accepted observation with its decision context. */
export interface StepRecord {
  feature: number;
  value: number;
  breakdown: StepBreakdown;
  prediction: number[];
  u: number;
  e: number;
  winner_rule: string;
}

export type SessionStatus = "active" | "halted" | "exhausted";

export interface SessionState {
  session_id: string;
  status: SessionStatus;
  halt_reason: string | null;
  budget: number;
  lambda: number;
  observed: ObservedEntry[];
  trace: StepRecord[];
  prediction: Prediction;
  suggestion: CandidateRow | null;
  candidates: CandidateRow[];
  created: string;
  updated: string;
}

export interface CreateSessionResponse {
  session_id: string;
  feature_names: string[];
  class_names: string[];
  features: FeatureMeta[];
  budget: number;
  lambda: number;
  initial_suggestion: CandidateRow | null;
  state: SessionState;
}

export interface ObserveResponse {
  step: StepRecord;
  suggestion: CandidateRow | null;
  state: SessionState;
}

export interface ErrorBody {
  error: string;
  field?: string;
}

export interface CreateSessionRequest {
  lambda?: number;
  budget?: number;
}
