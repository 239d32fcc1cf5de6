"""Annotation collection service.

Hands out conversations to registered annotators (exactly two distinct
annotators per conversation, never the same conversation twice to one
annotator), validates submissions against the decision-tree schema, and
keeps every accepted event in an append-only JSONL log. Restarting the
service replays the log, so state never lives anywhere else. Repeated
submissions by the same annotator for the same conversation are allowed
and the last write wins.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

from .corpus import Conversation, Corpus, conversation_to_record
from .schema import SCHEMA, AnnotationRecord, Violation, validate_annotation
from .stats import AgreementTable, agreement_table

ANNOTATORS_PER_CONVERSATION = 2


class ServiceError(ValueError):
    """Misconfiguration or an operation the assignment rules forbid."""


try:  # request model at module scope so route annotations resolve
    from pydantic import BaseModel

    class AnnotationBody(BaseModel):
        conversation_id: str
        annotator_id: str
        answers: dict
except ImportError:  # pragma: no cover - service API simply unavailable
    AnnotationBody = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SubmitResult:
    accepted: bool
    violations: tuple[Violation, ...] = ()
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "violations": [v.to_json() for v in self.violations],
            "error": self.error,
        }


class AnnotationService:
    """In-memory state machine over an append-only event log."""

    def __init__(
        self,
        corpus: Corpus,
        annotators: Sequence[str],
        log_path: Optional[str | Path] = None,
    ) -> None:
        if len(set(annotators)) != len(annotators):
            raise ServiceError("annotator ids must be unique")
        if len(annotators) < ANNOTATORS_PER_CONVERSATION:
            raise ServiceError(
                f"need at least {ANNOTATORS_PER_CONVERSATION} registered annotators"
            )
        self.corpus = corpus
        self.annotators = tuple(annotators)
        self.log_path = Path(log_path) if log_path is not None else None
        self._lock = threading.Lock()
        # conversation -> {annotator -> completed}
        self._assignments: dict[str, dict[str, bool]] = {}
        # annotator -> conversation currently assigned and not yet submitted
        self._open: dict[str, str] = {}
        # (conversation, annotator) -> latest accepted record
        self._records: dict[tuple[str, str], AnnotationRecord] = {}
        if self.log_path is not None and self.log_path.exists():
            self._replay()

    # -- log ------------------------------------------------------------

    def _append_event(self, event: dict) -> None:
        if self.log_path is None:
            return
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def _replay(self) -> None:
        assert self.log_path is not None
        with self.log_path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ServiceError(f"corrupt log line {line_no}: {exc}") from None
                kind = event.get("event")
                if kind == "assign":
                    cid, aid = event["conversation_id"], event["annotator_id"]
                    if self.corpus.get(cid) is None:
                        raise ServiceError(
                            f"log line {line_no}: assignment for unknown conversation {cid!r}"
                        )
                    self._assignments.setdefault(cid, {}).setdefault(aid, False)
                    if not self._assignments[cid][aid]:
                        self._open[aid] = cid
                elif kind == "annotation":
                    rec = AnnotationRecord.from_json(event["record"])
                    self._apply_record(rec)
                else:
                    raise ServiceError(
                        f"log line {line_no}: unknown event kind {kind!r}"
                    )

    def _apply_record(self, rec: AnnotationRecord) -> None:
        assigned = self._assignments.setdefault(rec.conversation_id, {})
        assigned[rec.annotator_id] = True
        self._records[(rec.conversation_id, rec.annotator_id)] = rec
        if self._open.get(rec.annotator_id) == rec.conversation_id:
            del self._open[rec.annotator_id]

    # -- assignment -----------------------------------------------------

    def next_task(self, annotator_id: str) -> Optional[Conversation]:
        """The annotator's open conversation, or a fresh assignment.

        Polling is idempotent: until the open task is submitted, the same
        conversation comes back. New assignments prefer conversations that
        already have one other annotator (closing pairs early), then unseen
        conversations in corpus order. None means the annotator has
        exhausted everything they are allowed to label.
        """
        if annotator_id not in self.annotators:
            raise ServiceError(f"unknown annotator {annotator_id!r}")
        with self._lock:
            open_cid = self._open.get(annotator_id)
            if open_cid is not None:
                return self.corpus.get(open_cid)
            partial: Optional[str] = None
            fresh: Optional[str] = None
            for conv in self.corpus:
                cid = conv.conversation_id
                assigned = self._assignments.get(cid, {})
                if annotator_id in assigned:
                    continue
                if len(assigned) >= ANNOTATORS_PER_CONVERSATION:
                    continue
                if len(assigned) == 1 and partial is None:
                    partial = cid
                    break  # best possible choice in corpus order
                if len(assigned) == 0 and fresh is None:
                    fresh = cid
            chosen = partial if partial is not None else fresh
            if chosen is None:
                return None
            self._assignments.setdefault(chosen, {})[annotator_id] = False
            self._open[annotator_id] = chosen
            self._append_event(
                {
                    "event": "assign",
                    "conversation_id": chosen,
                    "annotator_id": annotator_id,
                    "ts": datetime.now(timezone.utc).isoformat(),
                }
            )
            return self.corpus.get(chosen)

    def submit(self, record: AnnotationRecord) -> SubmitResult:
        """Validate and store one annotation.

        Rejected (never raises) when the (conversation, annotator) pair was
        never assigned or when the answers violate the schema; the result
        carries the violation list so a client can show each problem.
        """
        with self._lock:
            if record.annotator_id not in self.annotators:
                return SubmitResult(
                    accepted=False,
                    error=f"unknown annotator {record.annotator_id!r}",
                )
            if self.corpus.get(record.conversation_id) is None:
                return SubmitResult(
                    accepted=False,
                    error=f"unknown conversation {record.conversation_id!r}",
                )
            assigned = self._assignments.get(record.conversation_id, {})
            if record.annotator_id not in assigned:
                return SubmitResult(
                    accepted=False,
                    error=(
                        f"conversation {record.conversation_id!r} is not assigned "
                        f"to annotator {record.annotator_id!r}"
                    ),
                )
            violations = validate_annotation(record.answers)
            if violations:
                return SubmitResult(accepted=False, violations=tuple(violations))
            stamped = AnnotationRecord(
                conversation_id=record.conversation_id,
                annotator_id=record.annotator_id,
                answers=dict(record.answers),
                submitted_at=record.submitted_at or datetime.now(timezone.utc),
            )
            self._apply_record(stamped)
            self._append_event({"event": "annotation", "record": stamped.to_json()})
            return SubmitResult(accepted=True)

    # -- read side ------------------------------------------------------

    def records(self) -> list[AnnotationRecord]:
        """Latest accepted record per (conversation, annotator)."""
        with self._lock:
            return list(self._records.values())

    def live_agreement(self) -> AgreementTable:
        return agreement_table(self.records())

    def progress(self, annotator_id: str) -> dict:
        if annotator_id not in self.annotators:
            raise ServiceError(f"unknown annotator {annotator_id!r}")
        with self._lock:
            completed = sum(
                1 for (_, aid) in self._records if aid == annotator_id
            )
            assigned = sum(
                1
                for assignments in self._assignments.values()
                if annotator_id in assignments
            )
            return {
                "annotator_id": annotator_id,
                "assigned": assigned,
                "completed": completed,
                "open_conversation_id": self._open.get(annotator_id),
                "total_conversations": len(self.corpus),
            }


def _task_payload(service: AnnotationService, annotator_id: str) -> dict:
    conv = service.next_task(annotator_id)
    task: Optional[dict[str, Any]] = None
    if conv is not None:
        task = {
            "conversation": conversation_to_record(conv),
            "target_message_id": conv.last_message.id,
            "schema_version": SCHEMA["version"],
        }
    return {
        "annotator_id": annotator_id,
        "task": task,
        "progress": service.progress(annotator_id),
    }


def create_app(service: AnnotationService, ui_dir: Optional[str | Path] = None):
    """HTTP facade over the service; static annotation UI mounted at the root."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import JSONResponse
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(title="conflictkit annotation service")

    @app.get("/api/schema")
    def get_schema() -> dict:
        return SCHEMA

    @app.get("/api/tasks")
    def get_task(annotator: str) -> dict:
        try:
            return _task_payload(service, annotator)
        except ServiceError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    @app.post("/api/annotations")
    def post_annotation(body: AnnotationBody):
        record = AnnotationRecord(
            conversation_id=body.conversation_id,
            annotator_id=body.annotator_id,
            answers=body.answers,
        )
        result = service.submit(record)
        if result.accepted:
            return result.to_json()
        return JSONResponse(status_code=422, content=result.to_json())

    @app.get("/api/agreement")
    def get_agreement() -> dict:
        table = service.live_agreement()
        return {
            "rows": [
                {"feature": r.feature, "kappa": r.kappa, "n_pairs": r.n_pairs}
                for r in table.rows
            ]
        }

    @app.get("/api/conversations/{conversation_id}")
    def get_conversation(conversation_id: str) -> dict:
        conv = service.corpus.get(conversation_id)
        if conv is None:
            raise HTTPException(
                status_code=404, detail=f"unknown conversation {conversation_id!r}"
            )
        return conversation_to_record(conv)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
