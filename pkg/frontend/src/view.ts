/**
 * View model assembly. Every number here is copied from the latest service
 * response; this module never recomputes uncertainty or scores. The only
 * transformation applied is presentational ordering (q-table sorted ascending
 * by q, ties broken by feature index to keep the order stable).
 */

import type { CandidateRow, FeatureMeta, SessionState, StepRecord } from "./types.js";

export interface FeatureRowVM {
  feature: number;
  name: string;
  categorical: boolean;
  min: number | null;
  max: number | null;
  observed: boolean;
  value: number | null;
  suggested: boolean;
  /** Candidate scores for this feature from the latest response, if it was scored. */
  candidate: CandidateRow | null;
}

export interface PredictionBarVM {
  label: string;
  probability: number;
  winner: boolean;
}

export interface TimelineEntryVM {
  index: number;
  featureName: string;
  value: number;
  u: number;
  e: number;
  winnerRule: string;
}

export interface SessionViewModel {
  status: SessionState["status"];
  haltReason: string | null;
  budget: number;
  lambda: number;
  stepsTaken: number;
  suggestion: CandidateRow | null;
  /** Ascending by q; stable on feature index. */
  qTable: CandidateRow[];
  featureRows: FeatureRowVM[];
  predictionBars: PredictionBarVM[];
  predictionAnnotation: string;
  winnerLabel: string;
  /** Rule text from the most recent accepted observation, if any. */
  ruleText: string | null;
  timeline: TimelineEntryVM[];
  halted: boolean;
}

export function sortCandidates(rows: CandidateRow[]): CandidateRow[] {
  return rows
    .slice()
    .sort((a, b) => (a.q === b.q ? a.feature - b.feature : a.q - b.q));
}

export function buildViewModel(
  state: SessionState,
  features: FeatureMeta[],
): SessionViewModel {
  const observedByFeature = new Map<number, number>();
  for (const entry of state.observed) observedByFeature.set(entry.feature, entry.value);

  const candidateByFeature = new Map<number, CandidateRow>();
  for (const row of state.candidates) candidateByFeature.set(row.feature, row);

  const suggestion = state.suggestion;
  const featureRows: FeatureRowVM[] = features.map((meta) => ({
    feature: meta.feature,
    name: meta.name,
    categorical: meta.categorical,
    min: meta.min,
    max: meta.max,
    observed: observedByFeature.has(meta.feature),
    value: observedByFeature.has(meta.feature)
      ? (observedByFeature.get(meta.feature) as number)
      : null,
    suggested: suggestion !== null && suggestion.feature === meta.feature,
    candidate: candidateByFeature.get(meta.feature) ?? null,
  }));

  const probs = state.prediction.probabilities;
  let winnerIdx = 0;
  for (let i = 1; i < probs.length; i++) {
    if (probs[i] > probs[winnerIdx]) winnerIdx = i;
  }
  const predictionBars: PredictionBarVM[] = state.prediction.classes.map(
    (label, i) => ({
      label,
      probability: probs[i],
      winner: i === winnerIdx,
    }),
  );

  const timeline: TimelineEntryVM[] = state.trace.map(
    (step: StepRecord, i: number) => ({
      index: i + 1,
      featureName: features[step.feature]?.name ?? `feature ${step.feature}`,
      value: step.value,
      u: step.u,
      e: step.e,
      winnerRule: step.winner_rule,
    }),
  );

  const lastStep = state.trace.length
    ? state.trace[state.trace.length - 1]
    : null;

  return {
    status: state.status,
    haltReason: state.halt_reason,
    budget: state.budget,
    lambda: state.lambda,
    stepsTaken: state.trace.length,
    suggestion,
    qTable: sortCandidates(state.candidates),
    featureRows,
    predictionBars,
    predictionAnnotation: state.prediction.annotation,
    winnerLabel: state.prediction.winner,
    ruleText: lastStep ? lastStep.winner_rule : null,
    timeline,
    halted: state.status !== "active",
  };
}

/** Display formatting for scores: deterministic, applied uniformly everywhere. */
export function fmt(x: number): string {
  if (!Number.isFinite(x)) return String(x);
  if (x === 0) return "0";
  const abs = Math.abs(x);
  if (abs >= 1000 || abs < 0.001) return x.toExponential(3);
  return String(Number(x.toPrecision(4)));
}

/** Display formatting for observed feature values: round-trips short decimals. */
export function fmtValue(x: number): string {
  return String(x);
}

/** Input-range hint from the per-feature metadata, empty when unavailable. */
export function rangeHint(min: number | null, max: number | null): string {
  if (min === null || max === null) return "";
  return `seen ${fmt(min)} to ${fmt(max)}`;
}

export interface FormValidation {
  lambda?: string;
  budget?: string;
  values: { lambda?: number; budget?: number };
}

/**
 * Client-side form validation, mirroring the service's own constraints so bad
 * input is rejected before any request is issued.
 */
export function validateForm(lambdaRaw: string, budgetRaw: string): FormValidation {
  const out: FormValidation = { values: {} };
  const lambdaText = lambdaRaw.trim();
  if (lambdaText !== "") {
    const lambda = Number(lambdaText);
    if (!Number.isFinite(lambda) || lambda < 0) {
      out.lambda = "lambda must be a number >= 0";
    } else {
      out.values.lambda = lambda;
    }
  }
  const budgetText = budgetRaw.trim();
  if (budgetText !== "") {
    const budget = Number(budgetText);
    if (!Number.isInteger(budget) || budget < 1) {
      out.budget = "budget must be a positive integer";
    } else {
      out.values.budget = budget;
    }
  }
  return out;
}

/**
 * Observation-value validation for typed inputs. Categorical features must be
 * one of the levels offered by the dropdown; numeric features any finite
 * number. Range hints are advisory only: the service accepts values outside
 * the seen range, so the client must too.
 */
export function parseValue(raw: string): { value?: number; error?: string } {
  const text = raw.trim();
  if (text === "") return { error: "enter a value" };
  const value = Number(text);
  if (!Number.isFinite(value)) return { error: "value must be a finite number" };
  return { value };
}
