/** Controller: wires the store, the service client, and the DOM renderer. */

import { ApiError, closeSession, createSession, observe } from "./api.js";
import { mount, type Actions } from "./render.js";
import { createStore, initialState, type Store } from "./store.js";
import { validateForm } from "./view.js";

export interface AppOptions {
  /** Service origin; empty string means same origin (the service serves this page). */
  baseUrl?: string;
}

export interface AppHandle {
  store: Store;
  actions: Actions;
}

const CONNECTION_MESSAGE =
  "Cannot reach the acquisition service. Check that it is running, then retry.";

export function createApp(root: HTMLElement, opts: AppOptions = {}): AppHandle {
  const base = opts.baseUrl ?? "";
  const store = createStore();

  // The retry affordance re-runs whichever request last failed at the
  // connection level; service-level rejections (4xx) never land here.
  let lastAction: (() => void) | null = null;

  function connectionFailed(retryable: () => void): void {
    lastAction = retryable;
    store.set({ inflight: false, connectionError: CONNECTION_MESSAGE });
  }

  const actions: Actions = {
    startSession(): void {
      const s = store.get();
      if (s.inflight) return;
      const checked = validateForm(s.form.lambda, s.form.budget);
      if (checked.lambda || checked.budget) {
        store.set({
          form: {
            ...s.form,
            errors: { lambda: checked.lambda, budget: checked.budget },
          },
        });
        return;
      }
      store.set({
        inflight: true,
        form: { ...s.form, errors: {} },
        inlineError: null,
      });
      createSession(base, checked.values)
        .then((resp) => {
          store.set({
            phase: "session",
            inflight: false,
            connectionError: null,
            inlineError: null,
            session: {
              sessionId: resp.session_id,
              featureNames: resp.feature_names,
              classNames: resp.class_names,
              features: resp.features,
              state: resp.state,
            },
          });
        })
        .catch((err) => {
          if (err instanceof ApiError) {
            const field = err.body?.field;
            const message = err.body?.error ?? `rejected (${err.status})`;
            const errors =
              field === "budget" ? { budget: message } : { lambda: message };
            store.set({
              inflight: false,
              form: { ...store.get().form, errors },
            });
            return;
          }
          connectionFailed(() => actions.startSession());
        });
    },

    observe(feature: number, value: number): void {
      const s = store.get();
      if (s.inflight || s.session === null) return;
      const sessionId = s.session.sessionId;
      store.set({ inflight: true, inlineError: null });
      observe(base, sessionId, feature, value)
        .then((resp) => {
          const current = store.get();
          if (current.session === null || current.session.sessionId !== sessionId) {
            return;
          }
          store.set({
            inflight: false,
            connectionError: null,
            inlineError: null,
            session: { ...current.session, state: resp.state },
          });
        })
        .catch((err) => {
          if (err instanceof ApiError) {
            store.set({
              inflight: false,
              inlineError: {
                status: err.status,
                error: err.body?.error ?? `rejected (${err.status})`,
                field: err.body?.field,
                feature,
              },
            });
            return;
          }
          connectionFailed(() => actions.observe(feature, value));
        });
    },

    retry(): void {
      const run = lastAction;
      if (run === null || store.get().inflight) return;
      store.set({ connectionError: null });
      run();
    },

    newSession(): void {
      const s = store.get();
      if (s.session !== null) {
        // Best-effort cleanup; the new form does not wait on it.
        closeSession(base, s.session.sessionId).catch(() => undefined);
      }
      const fresh = initialState();
      store.set({ ...fresh, form: { ...fresh.form, lambda: s.form.lambda } });
    },
  };

  mount(root, store, actions);
  return { store, actions };
}

const autoRoot =
  typeof document !== "undefined" ? document.getElementById("app") : null;
if (autoRoot !== null) {
  createApp(autoRoot);
}
