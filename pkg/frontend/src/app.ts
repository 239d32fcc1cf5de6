/**
 * Single-page annotation flow: task, decision-tree form, submit, next.
 *
 * The schema arrives from the service at startup and drives both rendering
 * and validation, so the form and the server can never disagree about the
 * question tree. An agreement tab shows the service's live kappa table
 * verbatim (no client-side recomputation).
 */

import { ApiClient, TaskPayload } from "./api.js";
import { followUpsOf, setAnswer, submissionPayload, visibleFields } from "./formState.js";
import { Answers, Schema, Violation, validateAnnotation } from "./validation.js";

const api = new ApiClient("");

interface AppState {
  annotator: string | null;
  schema: Schema | null;
  task: TaskPayload | null;
  answers: Answers;
  violations: Violation[];
  banner: string | null;
  tab: "annotate" | "agreement";
}

const state: AppState = {
  annotator: localStorage.getItem("annotator_id"),
  schema: null,
  task: null,
  answers: {},
  violations: [],
  banner: null,
  tab: "annotate",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  node.append(...children);
  return node;
}

function root(): HTMLElement {
  return document.getElementById("app")!;
}

// -- annotator entry ---------------------------------------------------------

function renderLogin(): void {
  const input = el("input", {
    id: "annotator-input",
    placeholder: "annotator id",
    autocomplete: "off",
  });
  const button = el("button", { id: "annotator-go" }, "Start");
  button.addEventListener("click", () => {
    const value = input.value.trim();
    if (!value) return;
    state.annotator = value;
    localStorage.setItem("annotator_id", value);
    void loadTask();
  });
  root().replaceChildren(
    el("div", { class: "login" }, el("h1", {}, "Conversation annotation"), input, button),
  );
}

// -- thread view -------------------------------------------------------------

function renderThread(task: NonNullable<TaskPayload["task"]>): HTMLElement {
  const thread = el("section", { class: "thread" });
  thread.append(
    el(
      "header",
      {},
      el("h2", {}, task.conversation.conversation_id),
      el("span", { class: "topic" }, `topic: ${task.conversation.topic}`),
    ),
  );
  for (const message of task.conversation.messages) {
    const isTarget = message.id === task.target_message_id;
    thread.append(
      el(
        "div",
        { class: isTarget ? "bubble target" : "bubble", "data-message": message.id },
        el("div", { class: "meta" }, `${message.author_id} · ${message.timestamp}`),
        el("div", { class: "text" }, message.text),
        isTarget ? el("div", { class: "target-note" }, "annotate this message") : "",
      ),
    );
  }
  return thread;
}

// -- form --------------------------------------------------------------------

function violationsFor(field: string): Violation[] {
  return state.violations.filter((v) => v.field === field);
}

function onAnswer(field: string, value: unknown): void {
  state.answers = setAnswer(state.schema!, state.answers, field, value);
  state.violations = [];
  render();
}

function boolControl(field: string): HTMLElement {
  const current = state.answers[field];
  const wrap = el("div", { class: "choices", role: "radiogroup" });
  for (const option of [true, false]) {
    const label = option ? "yes" : "no";
    const button = el(
      "button",
      {
        type: "button",
        class: current === option ? "choice selected" : "choice",
        "data-choice": `${field}:${label}`,
      },
      label,
    );
    button.addEventListener("click", () =>
      onAnswer(field, current === option ? undefined : option),
    );
    wrap.append(button);
  }
  return wrap;
}

function multiControl(field: string, alphabet: string[]): HTMLElement {
  const selected = new Set(
    Array.isArray(state.answers[field]) ? (state.answers[field] as string[]) : [],
  );
  const wrap = el("div", { class: "choices" });
  for (const member of alphabet) {
    const button = el(
      "button",
      {
        type: "button",
        class: selected.has(member) ? "choice selected" : "choice",
        "data-choice": `${field}:${member}`,
      },
      member.replace(/_/g, " "),
    );
    button.addEventListener("click", () => {
      const next = new Set(selected);
      if (next.has(member)) next.delete(member);
      else next.add(member);
      onAnswer(field, next.size > 0 ? [...next] : undefined);
    });
    wrap.append(button);
  }
  return wrap;
}

function scaleControl(field: string, min: number, max: number): HTMLElement {
  const current = state.answers[field];
  const wrap = el("div", { class: "choices" });
  for (let value = min; value <= max; value += 1) {
    const button = el(
      "button",
      {
        type: "button",
        class: current === value ? "choice selected" : "choice",
        "data-choice": `${field}:${value}`,
      },
      String(value),
    );
    button.addEventListener("click", () =>
      onAnswer(field, current === value ? undefined : value),
    );
    wrap.append(button);
  }
  return wrap;
}

function otherTextControl(field: string): HTMLElement {
  const input = el("input", {
    class: "other-text",
    "data-field": field,
    placeholder: "describe 'other'…",
    value: typeof state.answers[field] === "string" ? (state.answers[field] as string) : "",
  });
  input.addEventListener("change", () => onAnswer(field, input.value || undefined));
  return input;
}

function renderForm(): HTMLElement {
  const schema = state.schema!;
  const form = el("section", { class: "form" });
  const visible = new Set(visibleFields(schema, state.answers));
  for (const question of schema.questions) {
    if (!visible.has(question.field)) continue;
    const section = el(
      "div",
      { class: "question", "data-section": question.field },
      el("label", {}, question.prompt),
    );
    if (question.kind === "bool") {
      section.append(boolControl(question.field));
    } else if (question.kind === "multi") {
      section.append(multiControl(question.field, question.alphabet ?? []));
      const selected = state.answers[question.field];
      if (
        question.other_text_field &&
        Array.isArray(selected) &&
        selected.includes("other")
      ) {
        section.append(otherTextControl(question.other_text_field));
        for (const violation of violationsFor(question.other_text_field)) {
          section.append(el("div", { class: "violation" }, violation.message));
        }
      }
    } else {
      section.append(scaleControl(question.field, question.min ?? 1, question.max ?? 5));
    }
    for (const violation of violationsFor(question.field)) {
      section.append(el("div", { class: "violation" }, violation.message));
    }
    form.append(section);
  }
  const submit = el("button", { class: "submit", id: "submit" }, "Submit and next");
  submit.addEventListener("click", () => void submitForm());
  form.append(submit);
  return form;
}

async function submitForm(): Promise<void> {
  const schema = state.schema!;
  const task = state.task?.task;
  if (!task || !state.annotator) return;
  const payload = submissionPayload(schema, state.answers);
  const violations = validateAnnotation(payload, schema);
  if (violations.length > 0) {
    state.violations = violations;
    state.banner = "fix the highlighted answers";
    render();
    return;
  }
  try {
    const result = await api.postAnnotation(
      task.conversation.conversation_id,
      state.annotator,
      payload,
    );
    if (!result.accepted) {
      state.violations = result.violations ?? [];
      state.banner = result.error ?? "the service rejected this annotation";
      render();
      return;
    }
    state.answers = {};
    state.violations = [];
    state.banner = null;
    await loadTask();
  } catch (err) {
    state.banner = `network failure, nothing lost; retry (${String(err)})`;
    render();
  }
}

// -- agreement tab -----------------------------------------------------------

async function renderAgreement(): Promise<void> {
  const { rows } = await api.getAgreement();
  const table = el("table", { class: "agreement" });
  table.append(
    el(
      "tr",
      {},
      el("th", {}, "feature"),
      el("th", {}, "kappa"),
      el("th", {}, "pairs"),
    ),
  );
  for (const row of rows) {
    table.append(
      el(
        "tr",
        {},
        el("td", {}, row.feature),
        el("td", {}, row.kappa === null ? "n/a" : row.kappa.toFixed(4)),
        el("td", {}, String(row.n_pairs)),
      ),
    );
  }
  const panel = document.querySelector(".panel");
  if (panel) panel.replaceChildren(table);
}

// -- page chrome -------------------------------------------------------------

function renderTabs(): HTMLElement {
  const tabs = el("nav", { class: "tabs" });
  for (const tab of ["annotate", "agreement"] as const) {
    const button = el(
      "button",
      { class: state.tab === tab ? "tab active" : "tab", "data-tab": tab },
      tab,
    );
    button.addEventListener("click", () => {
      state.tab = tab;
      render();
    });
    tabs.append(button);
  }
  return tabs;
}

function render(): void {
  if (!state.annotator) {
    renderLogin();
    return;
  }
  const header = el("header", { class: "top" }, el("h1", {}, "Conversation annotation"));
  const progress = state.task?.progress;
  if (progress) {
    header.append(
      el(
        "span",
        { class: "progress", id: "progress" },
        `${state.annotator}: ${progress.completed}/${progress.total_conversations} done`,
      ),
    );
  }
  const panel = el("div", { class: "panel" });
  if (state.tab === "agreement") {
    root().replaceChildren(header, renderTabs(), panel);
    void renderAgreement();
    return;
  }
  if (state.banner) {
    panel.append(el("div", { class: "banner" }, state.banner));
  }
  const task = state.task?.task;
  if (!state.task) {
    panel.append(el("p", {}, "loading…"));
  } else if (!task) {
    panel.append(el("p", { class: "done" }, "No more conversations for you. Thank you!"));
  } else {
    panel.append(renderThread(task), renderForm());
  }
  root().replaceChildren(header, renderTabs(), panel);
}

async function loadTask(): Promise<void> {
  if (!state.annotator) return;
  try {
    state.task = await api.getTask(state.annotator);
    state.banner = null;
  } catch (err) {
    state.task = null;
    state.banner = `could not reach the service (${String(err)})`;
  }
  render();
}

async function start(): Promise<void> {
  try {
    state.schema = await api.getSchema();
  } catch (err) {
    root().replaceChildren(
      el("div", { class: "banner" }, `service unavailable: ${String(err)}`),
    );
    return;
  }
  if (state.annotator) await loadTask();
  else render();
}

void start();
