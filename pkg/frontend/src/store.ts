/** Single mutable app state with subscribe/set, rendered top-down on every change. */

import type { ErrorBody, FeatureMeta, SessionState } from "./types.js";

/** Config-form state before a session exists. */
export interface FormState {
  lambda: string;
  budget: string;
  errors: { lambda?: string; budget?: string };
}

/** Everything the session screen renders, all sourced from service responses. */
export interface SessionData {
  sessionId: string;
  featureNames: string[];
  classNames: string[];
  features: FeatureMeta[];
  state: SessionState;
}

export interface AppState {
  phase: "config" | "session";
  form: FormState;
  /** Set while a request is outstanding; all inputs are disabled. */
  inflight: boolean;
  /** Connection-level failure banner; carries a retry affordance. */
  connectionError: string | null;
  /** Service-rejected observation, shown inline next to the offending input. */
  inlineError: (ErrorBody & { status: number; feature: number }) | null;
  session: SessionData | null;
}

export function initialState(): AppState {
  return {
    phase: "config",
    form: { lambda: "0.1", budget: "", errors: {} },
    inflight: false,
    connectionError: null,
    inlineError: null,
    session: null,
  };
}

export interface Store {
  get(): AppState;
  set(patch: Partial<AppState>): void;
  subscribe(fn: () => void): () => void;
}

export function createStore(state: AppState = initialState()): Store {
  let current = state;
  const listeners: Array<() => void> = [];
  return {
    get: () => current,
    set(patch: Partial<AppState>) {
      current = { ...current, ...patch };
      for (const fn of listeners.slice()) fn();
    },
    subscribe(fn: () => void) {
      listeners.push(fn);
      return () => {
        const idx = listeners.indexOf(fn);
        if (idx >= 0) listeners.splice(idx, 1);
      };
    },
  };
}
