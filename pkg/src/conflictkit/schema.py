"""Decision-tree coding schema for conflict annotation.

The schema is two-tiered: an affirmative answer to the top-level conflict
question unlocks five follow-up sections (conflict source, targets,
authority evoked, groups discussed, rhetorical strategy); context,
emotional reaction, and confidence are collected for every conversation.
Validation is structural and returns violations instead of raising, so a
submission can be rejected with the full list of problems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping, Optional

# Violation codes
ORPHAN_FOLLOW_UP = "orphan_follow_up"
MISSING_REQUIRED_BRANCH = "missing_required_branch"
OUT_OF_ALPHABET = "out_of_alphabet"
CONFIDENCE_OUT_OF_RANGE = "confidence_out_of_range"

INTERNAL_EXTERNAL = ("internal", "external")
TARGETS = ("individual", "group", "policy_institutions", "systemic", "events", "other")
AUTHORITY = (
    "personal_experience",
    "common_sense",
    "factual_institutional",
    "authority_rejected",
    "other",
)
RELATIONS = ("us_above_them", "us_below_them", "conjunctive", "disjunctive")
STRATEGIES = ("explicit_directives", "associations_metaphors", "sarcasm", "other")
CONTEXT_TYPES = ("cultural", "conversational", "missing_content", "media")
EMOTIONS = (
    "shock",
    "sadness",
    "disgust",
    "anger",
    "fear",
    "confusion",
    "indifference",
    "entertained",
    "hopeful",
)

# Machine description of the question tree. ``parent`` gates a question on a
# previous boolean answer; hidden questions must carry no values. This same
# structure is served to annotation clients so they drive the identical form.
SCHEMA: dict[str, Any] = {
    "version": 1,
    "questions": [
        {
            "field": "conflict",
            "kind": "bool",
            "prompt": "Is there conflict in the last message?",
            "parent": None,
            "required": True,
        },
        {
            "field": "internal_external",
            "kind": "multi",
            "prompt": "Is the conflict internal or external to the conversation?",
            "alphabet": list(INTERNAL_EXTERNAL),
            "parent": ["conflict", True],
            "required": True,
        },
        {
            "field": "targets",
            "kind": "multi",
            "prompt": "Who or what is the target of the conflict?",
            "alphabet": list(TARGETS),
            "parent": ["conflict", True],
            "required": True,
            "other_text_field": "targets_other_text",
        },
        {
            "field": "authority",
            "kind": "multi",
            "prompt": "What authority is evoked?",
            "alphabet": list(AUTHORITY),
            "parent": ["conflict", True],
            "required": True,
            "other_text_field": "authority_other_text",
        },
        {
            "field": "groups_discussed",
            "kind": "bool",
            "prompt": "Are clearly identified groups being discussed?",
            "parent": ["conflict", True],
            "required": True,
        },
        {
            "field": "relations",
            "kind": "multi",
            "prompt": "How are the groups related?",
            "alphabet": list(RELATIONS),
            "parent": ["groups_discussed", True],
            "required": True,
        },
        {
            "field": "rhetorical",
            "kind": "bool",
            "prompt": "Is a rhetorical strategy deployed?",
            "parent": ["conflict", True],
            "required": True,
        },
        {
            "field": "strategies",
            "kind": "multi",
            "prompt": "Which rhetorical strategies?",
            "alphabet": list(STRATEGIES),
            "parent": ["rhetorical", True],
            "required": True,
            "other_text_field": "strategies_other_text",
        },
        {
            "field": "context_needed",
            "kind": "bool",
            "prompt": "Did you need context beyond the thread?",
            "parent": None,
            "required": True,
        },
        {
            "field": "context_types",
            "kind": "multi",
            "prompt": "What kind of context was needed?",
            "alphabet": list(CONTEXT_TYPES),
            "parent": ["context_needed", True],
            "required": True,
        },
        {
            "field": "emotions",
            "kind": "multi",
            "prompt": "How did you feel when reading the conversation?",
            "alphabet": list(EMOTIONS),
            "parent": None,
            "required": False,
        },
        {
            "field": "confidence",
            "kind": "scale",
            "prompt": "How confident are you about your analysis?",
            "min": 1,
            "max": 5,
            "parent": None,
            "required": True,
        },
    ],
}

_QUESTIONS = {q["field"]: q for q in SCHEMA["questions"]}
_OTHER_TEXT_FIELDS = {
    q["other_text_field"]: q["field"]
    for q in SCHEMA["questions"]
    if "other_text_field" in q
}
_KNOWN_FIELDS = set(_QUESTIONS) | set(_OTHER_TEXT_FIELDS)


@dataclass(frozen=True)
class Violation:
    code: str
    field: str
    message: str

    def to_json(self) -> dict:
        return {"code": self.code, "field": self.field, "message": self.message}


def _value_bearing(value: Any) -> bool:
    """True when the answer actually carries information.

    None, [] and "" count as absent so a client may ship empty placeholders
    for hidden branches without tripping the orphan rule.
    """
    if value is None:
        return False
    if isinstance(value, (list, tuple, str)):
        return len(value) > 0
    return True


def _parent_affirmative(answers: Mapping[str, Any], question: Mapping[str, Any]) -> bool:
    parent = question.get("parent")
    if parent is None:
        return True
    parent_field, expected = parent
    return answers.get(parent_field) is expected


def validate_annotation(
    answers: Mapping[str, Any], schema: Mapping[str, Any] = SCHEMA
) -> list[Violation]:
    """Structural check of one answer set against the decision tree.

    Returns the empty list when the record is acceptable. Checks, in order:
    no follow-up value without an affirmative parent, required branches
    present, enumeration membership, and the confidence range.
    """
    violations: list[Violation] = []
    questions = schema["questions"]
    by_field = {q["field"]: q for q in questions}
    other_text_parents = {
        q["other_text_field"]: q["field"] for q in questions if "other_text_field" in q
    }
    known = set(by_field) | set(other_text_parents)

    for key in answers:
        if key not in known:
            violations.append(
                Violation(OUT_OF_ALPHABET, key, f"unknown field {key!r}")
            )

    for q in questions:
        name = q["field"]
        raw = answers.get(name)
        if not _parent_affirmative(answers, q):
            if _value_bearing(raw):
                parent_field = q["parent"][0]
                violations.append(
                    Violation(
                        ORPHAN_FOLLOW_UP,
                        name,
                        f"follow-up {name!r} without affirmative parent {parent_field!r}",
                    )
                )
            continue
        if not _value_bearing(raw):
            if q["required"]:
                violations.append(
                    Violation(
                        MISSING_REQUIRED_BRANCH, name, f"missing required branch: {name!r}"
                    )
                )
            continue
        kind = q["kind"]
        if kind == "bool":
            if not isinstance(raw, bool):
                violations.append(
                    Violation(OUT_OF_ALPHABET, name, f"{name!r} must be true or false")
                )
        elif kind == "multi":
            if not isinstance(raw, (list, tuple)) or any(
                not isinstance(v, str) for v in raw
            ):
                violations.append(
                    Violation(OUT_OF_ALPHABET, name, f"{name!r} must be a list of strings")
                )
                continue
            alphabet = set(q["alphabet"])
            bad = sorted(set(raw) - alphabet)
            if bad:
                violations.append(
                    Violation(
                        OUT_OF_ALPHABET, name, f"values not in {name!r} alphabet: {bad}"
                    )
                )
            text_field = q.get("other_text_field")
            if text_field and "other" in raw:
                text = answers.get(text_field)
                if not (isinstance(text, str) and text.strip()):
                    violations.append(
                        Violation(
                            MISSING_REQUIRED_BRANCH,
                            text_field,
                            f"{name!r} selects 'other' but {text_field!r} is empty",
                        )
                    )
        elif kind == "scale":
            if (
                isinstance(raw, bool)
                or not isinstance(raw, int)
                or not (q["min"] <= raw <= q["max"])
            ):
                violations.append(
                    Violation(
                        CONFIDENCE_OUT_OF_RANGE,
                        name,
                        f"{name!r} must be an integer in [{q['min']}, {q['max']}]",
                    )
                )

    for text_field, parent_field in other_text_parents.items():
        raw = answers.get(text_field)
        if not _value_bearing(raw):
            continue
        if not isinstance(raw, str):
            violations.append(
                Violation(OUT_OF_ALPHABET, text_field, f"{text_field!r} must be a string")
            )
            continue
        parent_q = by_field[parent_field]
        selected = answers.get(parent_field) or []
        if (
            not _parent_affirmative(answers, parent_q)
            or not isinstance(selected, (list, tuple))
            or "other" not in selected
        ):
            violations.append(
                Violation(
                    ORPHAN_FOLLOW_UP,
                    text_field,
                    f"{text_field!r} given but 'other' is not selected in {parent_field!r}",
                )
            )
    return violations


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's labels for the last message of one conversation."""

    conversation_id: str
    annotator_id: str
    answers: Mapping[str, Any]
    submitted_at: Optional[datetime] = None

    @property
    def conflict(self) -> bool:
        return self.answers.get("conflict") is True

    def bool_answer(self, field_name: str) -> Optional[bool]:
        value = self.answers.get(field_name)
        return value if isinstance(value, bool) else None

    def selected(self, field_name: str) -> frozenset[str]:
        value = self.answers.get(field_name)
        if isinstance(value, (list, tuple)):
            return frozenset(v for v in value if isinstance(v, str))
        return frozenset()

    def to_json(self) -> dict:
        out = {
            "conversation_id": self.conversation_id,
            "annotator_id": self.annotator_id,
            "answers": dict(self.answers),
        }
        if self.submitted_at is not None:
            out["submitted_at"] = self.submitted_at.isoformat().replace("+00:00", "Z")
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "AnnotationRecord":
        cid = obj.get("conversation_id")
        aid = obj.get("annotator_id")
        answers = obj.get("answers")
        if not isinstance(cid, str) or not cid:
            raise ValueError("annotation record needs a conversation_id")
        if not isinstance(aid, str) or not aid:
            raise ValueError("annotation record needs an annotator_id")
        if not isinstance(answers, dict):
            raise ValueError("annotation record needs an answers object")
        submitted = obj.get("submitted_at")
        ts = None
        if submitted is not None:
            raw = submitted[:-1] + "+00:00" if submitted.endswith("Z") else submitted
            ts = datetime.fromisoformat(raw)
            if ts.tzinfo is None:
                ts = ts.replace(tzinfo=timezone.utc)
        return cls(
            conversation_id=cid, annotator_id=aid, answers=answers, submitted_at=ts
        )


def load_annotations(
    lines: Iterable[str], validate: bool = False
) -> list[AnnotationRecord]:
    """Read an annotation log (one JSON record per line).

    With ``validate`` set, records failing schema validation raise instead of
    loading silently.
    """
    records: list[AnnotationRecord] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            rec = AnnotationRecord.from_json(obj)
        except (json.JSONDecodeError, ValueError) as exc:
            raise ValueError(f"annotation line {line_no}: {exc}") from None
        if validate:
            violations = validate_annotation(rec.answers)
            if violations:
                details = "; ".join(v.message for v in violations)
                raise ValueError(f"annotation line {line_no} invalid: {details}")
        records.append(rec)
    return records


def latest_records(records: Iterable[AnnotationRecord]) -> list[AnnotationRecord]:
    """Apply last-write-wins per (conversation, annotator), preserving order."""
    latest: dict[tuple[str, str], AnnotationRecord] = {}
    for rec in records:
        latest[(rec.conversation_id, rec.annotator_id)] = rec
    return list(latest.values())
