/**
 * DOM rendering. The whole UI is rebuilt from the store on every change; the
 * what-if preview panel is the one transient exception, updated directly by
 * hover/focus handlers so keyboard focus survives (it only ever displays
 * numbers already present in the latest service response).
 */

import type { Store } from "./store.js";
import {
  buildViewModel,
  fmt,
  fmtValue,
  parseValue,
  rangeHint,
  type FeatureRowVM,
  type SessionViewModel,
} from "./view.js";

export interface Actions {
  startSession(): void;
  observe(feature: number, value: number): void;
  retry(): void;
  newSession(): void;
}

const MAX_DROPDOWN_LEVELS = 64;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function scoreTriple(row: { expected_u: number; expected_e: number; q: number }): string {
  return `u ${fmt(row.expected_u)}, e ${fmt(row.expected_e)}, q ${fmt(row.q)}`;
}

/** Mounts the app into root and keeps it in sync with the store. */
export function mount(root: HTMLElement, store: Store, actions: Actions): void {
  const pendingValues = new Map<number, string>();

  const shell = el("div", "app-shell");
  root.appendChild(shell);

  function sync(): void {
    const s = store.get();
    shell.innerHTML = "";
    shell.classList.toggle("inflight", s.inflight);

    const header = el("header");
    header.appendChild(el("h1", "", "Feature acquisition console"));
    header.appendChild(
      el(
        "p",
        "tagline",
        "Observe features one at a time, guided by the service's expected-quality scores.",
      ),
    );
    shell.appendChild(header);

    if (s.connectionError) {
      const banner = el("div", "banner banner-error", "");
      banner.setAttribute("role", "alert");
      banner.appendChild(el("span", "banner-text", s.connectionError));
      const retry = el("button", "retry", "Retry");
      retry.type = "button";
      retry.disabled = s.inflight;
      retry.addEventListener("click", () => actions.retry());
      banner.appendChild(retry);
      shell.appendChild(banner);
    }

    if (s.phase === "config" || s.session === null) {
      shell.appendChild(renderConfigForm(store, actions));
      return;
    }

    const vm = buildViewModel(s.session.state, s.session.features);
    shell.appendChild(renderSession(store, actions, vm, pendingValues));
  }

  sync();
  store.subscribe(sync);
}

function renderConfigForm(store: Store, actions: Actions): HTMLElement {
  const s = store.get();
  const section = el("section", "config");
  const form = el("form", "config-form");
  form.id = "config-form";
  form.noValidate = true;

  const lambdaField = el("div", "field");
  const lambdaLabel = el("label", "", "lambda (acquisition-cost weight)");
  lambdaLabel.htmlFor = "lambda-input";
  const lambdaInput = el("input") as HTMLInputElement;
  lambdaInput.id = "lambda-input";
  lambdaInput.name = "lambda";
  lambdaInput.value = s.form.lambda;
  lambdaInput.disabled = s.inflight;
  lambdaInput.setAttribute("inputmode", "decimal");
  lambdaField.appendChild(lambdaLabel);
  lambdaField.appendChild(lambdaInput);
  if (s.form.errors.lambda) {
    lambdaField.appendChild(el("span", "field-error", s.form.errors.lambda));
  }
  form.appendChild(lambdaField);

  const budgetField = el("div", "field");
  const budgetLabel = el("label", "", "budget (max observations, blank = bundle default)");
  budgetLabel.htmlFor = "budget-input";
  const budgetInput = el("input") as HTMLInputElement;
  budgetInput.id = "budget-input";
  budgetInput.name = "budget";
  budgetInput.value = s.form.budget;
  budgetInput.disabled = s.inflight;
  budgetInput.setAttribute("inputmode", "numeric");
  budgetField.appendChild(budgetLabel);
  budgetField.appendChild(budgetInput);
  if (s.form.errors.budget) {
    budgetField.appendChild(el("span", "field-error", s.form.errors.budget));
  }
  form.appendChild(budgetField);

  const submit = el("button", "primary", "Start session");
  submit.type = "submit";
  submit.disabled = s.inflight;
  form.appendChild(submit);

  form.addEventListener("input", () => {
    const current = store.get();
    store.set({
      form: {
        lambda: lambdaInput.value,
        budget: budgetInput.value,
        errors: current.form.errors,
      },
    });
  });
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const current = store.get();
    store.set({
      form: { ...current.form, lambda: lambdaInput.value, budget: budgetInput.value },
    });
    actions.startSession();
  });

  section.appendChild(form);
  return section;
}

function renderSession(
  store: Store,
  actions: Actions,
  vm: SessionViewModel,
  pendingValues: Map<number, string>,
): HTMLElement {
  const s = store.get();
  const section = el("section", "session");

  const status = el("div", "status-bar");
  status.appendChild(el("span", "status-item", `status: ${vm.status}`));
  status.appendChild(
    el("span", "status-item", `observed ${vm.stepsTaken} of budget ${vm.budget}`),
  );
  status.appendChild(el("span", "status-item", `lambda ${fmt(vm.lambda)}`));
  const reset = el("button", "secondary new-session", "New session");
  reset.type = "button";
  reset.disabled = s.inflight;
  reset.addEventListener("click", () => actions.newSession());
  status.appendChild(reset);
  section.appendChild(status);

  if (vm.halted) {
    const banner = el("div", "banner banner-halt");
    banner.setAttribute("role", "status");
    banner.textContent = `Session ${vm.status}: ${vm.haltReason ?? "stopped"}. Inputs are disabled.`;
    section.appendChild(banner);
  }

  const columns = el("div", "columns");
  const whatIfPanel = el("div", "whatif");
  whatIfPanel.hidden = true;

  columns.appendChild(
    renderFeaturePanel(store, actions, vm, pendingValues, whatIfPanel),
  );
  columns.appendChild(renderDecisionPanel(vm, whatIfPanel));
  section.appendChild(columns);
  return section;
}

function showWhatIf(
  panel: HTMLElement,
  vm: SessionViewModel,
  feature: number,
): void {
  const row = vm.qTable.find((r) => r.feature === feature);
  const featureRow = vm.featureRows.find((r) => r.feature === feature);
  if (featureRow === undefined || featureRow.observed) {
    panel.hidden = true;
    return;
  }
  panel.innerHTML = "";
  panel.hidden = false;
  panel.appendChild(el("h3", "", `What if: ${featureRow.name}`));
  if (row) {
    const list = el("dl");
    const add = (term: string, val: string) => {
      list.appendChild(el("dt", "", term));
      list.appendChild(el("dd", "", val));
    };
    add("expected aleatoric u", fmt(row.expected_u));
    add("expected epistemic e", fmt(row.expected_e));
    add("q (u + lambda * e)", fmt(row.q));
    panel.appendChild(list);
    panel.appendChild(
      el("p", "whatif-note", "Scores from the latest response; no request issued."),
    );
  } else {
    panel.appendChild(
      el("p", "whatif-note", "Not scored in the latest response."),
    );
  }
}

function hideWhatIf(panel: HTMLElement): void {
  panel.hidden = true;
}

function renderFeaturePanel(
  store: Store,
  actions: Actions,
  vm: SessionViewModel,
  pendingValues: Map<number, string>,
  whatIfPanel: HTMLElement,
): HTMLElement {
  const s = store.get();
  const panel = el("section", "features");
  panel.appendChild(el("h2", "", "Features"));
  const list = el("ul", "feature-list");

  for (const row of vm.featureRows) {
    const item = el("li", row.observed ? "feature observed" : "feature unobserved");
    item.dataset.feature = String(row.feature);

    const name = el("span", "feature-name", row.name);
    if (row.suggested) {
      item.classList.add("suggested");
      const badge = el("span", "badge", "suggested");
      name.appendChild(badge);
    }
    item.appendChild(name);

    if (row.observed) {
      item.appendChild(el("span", "feature-value", fmtValue(row.value as number)));
    } else {
      item.tabIndex = 0;
      item.addEventListener("mouseenter", () => showWhatIf(whatIfPanel, vm, row.feature));
      item.addEventListener("mouseleave", () => hideWhatIf(whatIfPanel));
      item.addEventListener("focus", () => showWhatIf(whatIfPanel, vm, row.feature));
      item.addEventListener("blur", () => hideWhatIf(whatIfPanel));
      item.appendChild(buildObserveForm(store, actions, row, pendingValues, vm));
      const inline = s.inlineError;
      if (inline && inline.feature === row.feature) {
        const msg = inline.field ? `${inline.error} (${inline.field})` : inline.error;
        item.appendChild(el("span", "inline-error", msg));
      }
    }
    list.appendChild(item);
  }

  panel.appendChild(list);
  return panel;
}

function buildObserveForm(
  store: Store,
  actions: Actions,
  row: FeatureRowVM,
  pendingValues: Map<number, string>,
  vm: SessionViewModel,
): HTMLElement {
  const s = store.get();
  const form = el("form", "observe-form");
  form.dataset.feature = String(row.feature);
  form.noValidate = true;
  const disabled = s.inflight || vm.halted;

  let input: HTMLInputElement | HTMLSelectElement;
  const levels = categoricalLevels(row);
  if (levels !== null) {
    const select = el("select") as HTMLSelectElement;
    const placeholder = el("option", "", "choose a level");
    placeholder.value = "";
    select.appendChild(placeholder);
    for (const level of levels) {
      const opt = el("option", "", String(level));
      opt.value = String(level);
      select.appendChild(opt);
    }
    input = select;
  } else {
    const numeric = el("input") as HTMLInputElement;
    numeric.type = "text";
    numeric.setAttribute("inputmode", "decimal");
    const hint = rangeHint(row.min, row.max);
    if (hint) {
      numeric.placeholder = hint;
      numeric.title = hint;
    }
    input = numeric;
  }
  input.className = "value-input";
  input.name = `value-${row.feature}`;
  input.disabled = disabled;
  input.value = pendingValues.get(row.feature) ?? "";
  input.addEventListener("input", () => {
    pendingValues.set(row.feature, input.value);
  });

  const button = el("button", "observe", "Observe");
  button.type = "submit";
  button.disabled = disabled;

  const errorSlot = el("span", "parse-error");
  errorSlot.hidden = true;

  form.appendChild(input);
  form.appendChild(button);
  form.appendChild(errorSlot);

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    if (store.get().inflight || vm.halted) return;
    const parsed = parseValue(input.value);
    if (parsed.error !== undefined || parsed.value === undefined) {
      errorSlot.textContent = parsed.error ?? "enter a value";
      errorSlot.hidden = false;
      return;
    }
    errorSlot.hidden = true;
    actions.observe(row.feature, parsed.value);
  });

  return form;
}

/** Integer levels for a categorical feature's dropdown, or null for a numeric input. */
function categoricalLevels(row: FeatureRowVM): number[] | null {
  if (!row.categorical || row.min === null || row.max === null) return null;
  if (!Number.isInteger(row.min) || !Number.isInteger(row.max)) return null;
  const count = row.max - row.min + 1;
  if (count < 1 || count > MAX_DROPDOWN_LEVELS) return null;
  const levels: number[] = [];
  for (let v = row.min; v <= row.max; v++) levels.push(v);
  return levels;
}

function renderDecisionPanel(
  vm: SessionViewModel,
  whatIfPanel: HTMLElement,
): HTMLElement {
  const panel = el("section", "decision");

  panel.appendChild(el("h2", "", "Suggestion"));
  const suggestion = el("div", "suggestion");
  if (vm.suggestion) {
    suggestion.appendChild(
      el("span", "suggestion-name", vm.suggestion.feature_name),
    );
    suggestion.appendChild(el("span", "suggestion-scores", scoreTriple(vm.suggestion)));
  } else {
    suggestion.appendChild(
      el("span", "suggestion-name none", "none (session stopped)"),
    );
  }
  panel.appendChild(suggestion);

  panel.appendChild(el("h2", "", "Candidate scores"));
  panel.appendChild(renderQTable(vm, whatIfPanel));
  panel.appendChild(whatIfPanel);

  panel.appendChild(el("h2", "", "Prediction"));
  panel.appendChild(renderPrediction(vm));

  panel.appendChild(el("h2", "", "Rule"));
  const rule = el("p", "rule-text");
  rule.textContent = vm.ruleText ?? "No observation yet; observe a feature to see the deciding rule.";
  panel.appendChild(rule);

  panel.appendChild(el("h2", "", "Timeline"));
  panel.appendChild(renderTimeline(vm));

  return panel;
}

function renderQTable(vm: SessionViewModel, whatIfPanel: HTMLElement): HTMLElement {
  const wrap = el("div", "qtable-wrap");
  if (vm.qTable.length === 0) {
    wrap.appendChild(el("p", "empty", "No candidates scored."));
    return wrap;
  }
  const table = el("table", "qtable");
  const thead = el("thead");
  const headRow = el("tr");
  for (const h of ["feature", "expected u", "expected e", "q"]) {
    headRow.appendChild(el("th", "", h));
  }
  thead.appendChild(headRow);
  table.appendChild(thead);

  const tbody = el("tbody");
  for (const row of vm.qTable) {
    const tr = el("tr", "qrow");
    tr.dataset.feature = String(row.feature);
    tr.tabIndex = 0;
    if (vm.suggestion && vm.suggestion.feature === row.feature) {
      tr.classList.add("suggested");
    }
    tr.appendChild(el("td", "qcell-name", row.feature_name));
    tr.appendChild(el("td", "qcell-u", fmt(row.expected_u)));
    tr.appendChild(el("td", "qcell-e", fmt(row.expected_e)));
    tr.appendChild(el("td", "qcell-q", fmt(row.q)));
    tr.addEventListener("mouseenter", () => showWhatIf(whatIfPanel, vm, row.feature));
    tr.addEventListener("mouseleave", () => hideWhatIf(whatIfPanel));
    tr.addEventListener("focus", () => showWhatIf(whatIfPanel, vm, row.feature));
    tr.addEventListener("blur", () => hideWhatIf(whatIfPanel));
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  wrap.appendChild(table);
  return wrap;
}

function renderPrediction(vm: SessionViewModel): HTMLElement {
  const box = el("div", "prediction");
  for (const bar of vm.predictionBars) {
    const row = el("div", bar.winner ? "bar-row winner" : "bar-row");
    row.appendChild(el("span", "bar-label", bar.label));
    const track = el("div", "bar-track");
    const fill = el("div", "bar-fill");
    fill.style.width = `${(bar.probability * 100).toFixed(2)}%`;
    track.appendChild(fill);
    row.appendChild(track);
    row.appendChild(el("span", "bar-prob", fmt(bar.probability)));
    box.appendChild(row);
  }
  box.appendChild(el("p", "prediction-winner", `winner: ${vm.winnerLabel}`));
  box.appendChild(el("p", "prediction-note", vm.predictionAnnotation));
  return box;
}

function renderTimeline(vm: SessionViewModel): HTMLElement {
  const listWrap = el("div", "timeline");
  if (vm.timeline.length === 0) {
    listWrap.appendChild(el("p", "empty", "No observations yet."));
    return listWrap;
  }
  const ol = el("ol", "timeline-list");
  for (const entry of vm.timeline) {
    const li = el("li", "timeline-entry");
    li.appendChild(
      el("span", "timeline-main", `${entry.featureName} = ${fmtValue(entry.value)}`),
    );
    li.appendChild(
      el("span", "timeline-scores", `u ${fmt(entry.u)}, e ${fmt(entry.e)}`),
    );
    li.appendChild(el("span", "timeline-rule", entry.winnerRule));
    ol.appendChild(li);
  }
  listWrap.appendChild(ol);
  return listWrap;
}
