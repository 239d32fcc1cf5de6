/**
 * Pure form-state machine for the decision-tree schema.
 *
 * A question's section is visible iff it has no parent or its parent answer
 * is affirmative. Setting an answer prunes everything that the change hides:
 * descendants of a de-affirmed parent and free-text companions of a
 * deselected "other". Submission payloads carry visible value-bearing
 * answers only, so a hidden branch can never leak a stale value.
 */

import { Answers, Question, Schema, parentAffirmative, valueBearing } from "./validation.js";

export function questionByField(schema: Schema, field: string): Question | undefined {
  return schema.questions.find((q) => q.field === field);
}

/** Direct follow-up questions revealed by an affirmative answer to `field`. */
export function followUpsOf(schema: Schema, field: string): string[] {
  return schema.questions
    .filter((q) => q.parent !== null && q.parent[0] === field)
    .map((q) => q.field);
}

/** Fields whose sections are currently shown, in schema order. */
export function visibleFields(schema: Schema, answers: Answers): string[] {
  return schema.questions
    .filter((q) => parentAffirmative(answers, q))
    .map((q) => q.field);
}

function pruneHidden(schema: Schema, answers: Answers): Answers {
  // Iterate to a fixed point: hiding one branch can hide its children.
  const pruned: Answers = { ...answers };
  let changed = true;
  while (changed) {
    changed = false;
    for (const q of schema.questions) {
      if (q.field in pruned && !parentAffirmative(pruned, q)) {
        delete pruned[q.field];
        changed = true;
      }
      if (q.other_text_field && q.other_text_field in pruned) {
        const selected = pruned[q.field];
        const otherChosen = Array.isArray(selected) && selected.includes("other");
        if (!parentAffirmative(pruned, q) || !otherChosen) {
          delete pruned[q.other_text_field];
          changed = true;
        }
      }
    }
  }
  return pruned;
}

/** Returns a new answer set with `field` updated and hidden branches cleared. */
export function setAnswer(
  schema: Schema,
  answers: Answers,
  field: string,
  value: unknown,
): Answers {
  const next: Answers = { ...answers };
  if (value === undefined || value === null) {
    delete next[field];
  } else {
    next[field] = value;
  }
  return pruneHidden(schema, next);
}

/** Visible, value-bearing answers only: what the client actually submits. */
export function submissionPayload(schema: Schema, answers: Answers): Answers {
  const visible = new Set(visibleFields(schema, answers));
  const payload: Answers = {};
  for (const q of schema.questions) {
    if (!visible.has(q.field)) continue;
    const raw = answers[q.field];
    if (valueBearing(raw)) payload[q.field] = raw;
    if (q.other_text_field) {
      const text = answers[q.other_text_field];
      const selected = answers[q.field];
      const otherChosen = Array.isArray(selected) && selected.includes("other");
      if (otherChosen && valueBearing(text)) payload[q.other_text_field] = text;
    }
  }
  return payload;
}
