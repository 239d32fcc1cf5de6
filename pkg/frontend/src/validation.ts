/**
 * Client-side mirror of the service's annotation validation.
 *
 * The rules are driven entirely by the schema payload from GET /api/schema,
 * so the client never hardcodes question lists or alphabets. Outcomes must
 * match the server exactly; the conformance test in tests/validation.test.ts
 * holds both sides to the same 20-record fixture.
 */

export type QuestionKind = "bool" | "multi" | "scale";

export interface Question {
  field: string;
  kind: QuestionKind;
  prompt: string;
  alphabet?: string[];
  parent: [string, boolean] | null;
  required: boolean;
  other_text_field?: string;
  min?: number;
  max?: number;
}

export interface Schema {
  version: number;
  questions: Question[];
}

export type Answers = Record<string, unknown>;

export interface Violation {
  code: string;
  field: string;
  message: string;
}

export const ORPHAN_FOLLOW_UP = "orphan_follow_up";
export const MISSING_REQUIRED_BRANCH = "missing_required_branch";
export const OUT_OF_ALPHABET = "out_of_alphabet";
export const CONFIDENCE_OUT_OF_RANGE = "confidence_out_of_range";

/** null, [], and "" count as absent; hidden branches may ship empty placeholders. */
export function valueBearing(value: unknown): boolean {
  if (value === null || value === undefined) return false;
  if (typeof value === "string" || Array.isArray(value)) return value.length > 0;
  return true;
}

export function parentAffirmative(answers: Answers, question: Question): boolean {
  if (!question.parent) return true;
  const [parentField, expected] = question.parent;
  return answers[parentField] === expected;
}

function isStringArray(value: unknown): value is string[] {
  return Array.isArray(value) && value.every((v) => typeof v === "string");
}

export function validateAnnotation(answers: Answers, schema: Schema): Violation[] {
  const violations: Violation[] = [];
  const byField = new Map(schema.questions.map((q) => [q.field, q]));
  const otherTextParents = new Map<string, string>();
  for (const q of schema.questions) {
    if (q.other_text_field) otherTextParents.set(q.other_text_field, q.field);
  }

  for (const key of Object.keys(answers)) {
    if (!byField.has(key) && !otherTextParents.has(key)) {
      violations.push({
        code: OUT_OF_ALPHABET,
        field: key,
        message: `unknown field '${key}'`,
      });
    }
  }

  for (const q of schema.questions) {
    const raw = answers[q.field];
    if (!parentAffirmative(answers, q)) {
      if (valueBearing(raw)) {
        violations.push({
          code: ORPHAN_FOLLOW_UP,
          field: q.field,
          message: `follow-up '${q.field}' without affirmative parent '${q.parent![0]}'`,
        });
      }
      continue;
    }
    if (!valueBearing(raw)) {
      if (q.required) {
        violations.push({
          code: MISSING_REQUIRED_BRANCH,
          field: q.field,
          message: `missing required branch: '${q.field}'`,
        });
      }
      continue;
    }
    if (q.kind === "bool") {
      if (typeof raw !== "boolean") {
        violations.push({
          code: OUT_OF_ALPHABET,
          field: q.field,
          message: `'${q.field}' must be true or false`,
        });
      }
    } else if (q.kind === "multi") {
      if (!isStringArray(raw)) {
        violations.push({
          code: OUT_OF_ALPHABET,
          field: q.field,
          message: `'${q.field}' must be a list of strings`,
        });
        continue;
      }
      const alphabet = new Set(q.alphabet ?? []);
      const bad = [...new Set(raw.filter((v) => !alphabet.has(v)))].sort();
      if (bad.length > 0) {
        violations.push({
          code: OUT_OF_ALPHABET,
          field: q.field,
          message: `values not in '${q.field}' alphabet: ${bad.join(", ")}`,
        });
      }
      if (q.other_text_field && raw.includes("other")) {
        const text = answers[q.other_text_field];
        if (!(typeof text === "string" && text.trim().length > 0)) {
          violations.push({
            code: MISSING_REQUIRED_BRANCH,
            field: q.other_text_field,
            message: `'${q.field}' selects 'other' but '${q.other_text_field}' is empty`,
          });
        }
      }
    } else if (q.kind === "scale") {
      const min = q.min ?? 1;
      const max = q.max ?? 5;
      if (
        typeof raw === "boolean" ||
        typeof raw !== "number" ||
        !Number.isInteger(raw) ||
        raw < min ||
        raw > max
      ) {
        violations.push({
          code: CONFIDENCE_OUT_OF_RANGE,
          field: q.field,
          message: `'${q.field}' must be an integer in [${min}, ${max}]`,
        });
      }
    }
  }

  for (const [textField, parentField] of otherTextParents) {
    const raw = answers[textField];
    if (!valueBearing(raw)) continue;
    if (typeof raw !== "string") {
      violations.push({
        code: OUT_OF_ALPHABET,
        field: textField,
        message: `'${textField}' must be a string`,
      });
      continue;
    }
    const parentQ = byField.get(parentField)!;
    const selected = answers[parentField];
    if (
      !parentAffirmative(answers, parentQ) ||
      !isStringArray(selected) ||
      !selected.includes("other")
    ) {
      violations.push({
        code: ORPHAN_FOLLOW_UP,
        field: textField,
        message: `'${textField}' given but 'other' is not selected in '${parentField}'`,
      });
    }
  }

  return violations;
}
