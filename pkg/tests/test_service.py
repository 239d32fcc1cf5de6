"""Assignment state machine, submission rules, event-log replay, and the
HTTP facade."""

import json

import pytest

from conflictkit.schema import AnnotationRecord
from conflictkit.service import AnnotationService, ServiceError, create_app

from conftest import corpus_from, make_thread, valid_no_answers, valid_yes_answers


def _corpus(n=3):
    return corpus_from([
        make_thread(f"c{k}", [f"m{k}a", f"m{k}b", f"m{k}c"], topic="parks")
        for k in range(1, n + 1)
    ])


def _service(n=3, annotators=("a1", "a2", "a3"), log_path=None):
    return AnnotationService(_corpus(n), annotators, log_path=log_path)


def _submit(service, cid, aid, answers=None):
    return service.submit(
        AnnotationRecord(cid, aid, answers if answers is not None else valid_no_answers())
    )


# -- construction ------------------------------------------------------------


def test_constructor_validation():
    with pytest.raises(ServiceError):
        AnnotationService(_corpus(), ["a1", "a1"])
    with pytest.raises(ServiceError):
        AnnotationService(_corpus(), ["solo"])


# -- assignment --------------------------------------------------------------


def test_polling_is_idempotent():
    service = _service()
    first = service.next_task("a1")
    assert first.conversation_id == "c1"
    for _ in range(3):
        assert service.next_task("a1").conversation_id == "c1"
    assert service.progress("a1")["assigned"] == 1


def test_pairs_close_before_fresh_assignments():
    service = _service()
    assert service.next_task("a1").conversation_id == "c1"
    # a2 joins the partially-assigned conversation rather than starting c2
    assert service.next_task("a2").conversation_id == "c1"
    # c1 now has two annotators; a3 must start fresh
    assert service.next_task("a3").conversation_id == "c2"


def test_annotator_never_assigned_same_conversation_twice():
    service = _service()
    service.next_task("a1")
    assert _submit(service, "c1", "a1").accepted
    following = service.next_task("a1")
    assert following.conversation_id != "c1"


def test_exhaustion_returns_none():
    service = _service(n=3)
    seen = {aid: [] for aid in ("a1", "a2", "a3")}
    for _ in range(4):
        for aid in seen:
            conv = service.next_task(aid)
            if conv is None:
                continue
            assert _submit(service, conv.conversation_id, aid).accepted
            seen[aid].append(conv.conversation_id)
    for aid in seen:
        assert service.next_task(aid) is None
    # every conversation labeled by exactly two distinct annotators
    per_conv = {}
    for aid, cids in seen.items():
        for cid in cids:
            per_conv.setdefault(cid, set()).add(aid)
    assert all(len(aids) == 2 for aids in per_conv.values())
    assert len(per_conv) == 3


def test_next_task_unknown_annotator():
    with pytest.raises(ServiceError):
        _service().next_task("ghost")


# -- submission --------------------------------------------------------------


def test_submit_requires_assignment():
    service = _service()
    result = _submit(service, "c1", "a1")
    assert not result.accepted
    assert "not assigned" in result.error


def test_submit_unknown_annotator_and_conversation():
    service = _service()
    bad_annotator = _submit(service, "c1", "ghost")
    assert not bad_annotator.accepted and "unknown annotator" in bad_annotator.error
    bad_conversation = _submit(service, "c99", "a1")
    assert not bad_conversation.accepted and "unknown conversation" in bad_conversation.error


def test_submit_rejects_schema_violations():
    service = _service()
    service.next_task("a1")
    answers = valid_yes_answers()
    answers["targets"] = ["martians"]
    result = _submit(service, "c1", "a1", answers)
    assert not result.accepted
    assert result.violations
    assert all(v.code for v in result.violations)
    # the rejected record is not stored and the task stays open
    assert service.records() == []
    assert service.next_task("a1").conversation_id == "c1"


def test_submit_stamps_time_and_stores():
    service = _service()
    service.next_task("a1")
    assert _submit(service, "c1", "a1").accepted
    (record,) = service.records()
    assert record.submitted_at is not None
    assert record.conversation_id == "c1"


def test_resubmission_last_write_wins():
    service = _service()
    service.next_task("a1")
    assert _submit(service, "c1", "a1", valid_no_answers()).accepted
    assert _submit(service, "c1", "a1", valid_yes_answers()).accepted
    (record,) = service.records()
    assert record.conflict is True


def test_progress_counts():
    service = _service()
    service.next_task("a1")
    progress = service.progress("a1")
    assert progress == {
        "annotator_id": "a1",
        "assigned": 1,
        "completed": 0,
        "open_conversation_id": "c1",
        "total_conversations": 3,
    }
    _submit(service, "c1", "a1")
    progress = service.progress("a1")
    assert progress["completed"] == 1
    assert progress["open_conversation_id"] is None
    with pytest.raises(ServiceError):
        service.progress("ghost")


def test_live_agreement_over_submissions():
    service = _service()
    for aid in ("a1", "a2"):
        service.next_task(aid)
        assert _submit(service, "c1", aid, valid_yes_answers()).accepted
    table = service.live_agreement().by_feature()
    assert table["conflict"].n_pairs == 1
    assert table["conflict"].kappa == 1.0


# -- event log ---------------------------------------------------------------


def test_log_replay_restores_state(tmp_path):
    log = tmp_path / "events.jsonl"
    service = _service(log_path=log)
    service.next_task("a1")
    service.next_task("a2")
    _submit(service, "c1", "a1", valid_yes_answers())

    events = [json.loads(line) for line in log.read_text().splitlines()]
    assert [e["event"] for e in events] == ["assign", "assign", "annotation"]

    revived = _service(log_path=log)
    # a1's submission is back; a2 still has c1 open
    assert len(revived.records()) == 1
    assert revived.next_task("a2").conversation_id == "c1"
    assert revived.progress("a1")["completed"] == 1
    # a1 gets a new assignment, not c1 again
    assert revived.next_task("a1").conversation_id == "c2"


def test_log_replay_full_cycle_reaches_same_agreement(tmp_path):
    log = tmp_path / "events.jsonl"
    service = _service(log_path=log)
    for aid in ("a1", "a2"):
        service.next_task(aid)
        _submit(service, "c1", aid, valid_yes_answers())
    revived = _service(log_path=log)
    assert revived.live_agreement().by_feature()["conflict"].n_pairs == 1


def test_log_replay_rejects_corruption(tmp_path):
    log = tmp_path / "events.jsonl"
    log.write_text("{not json\n")
    with pytest.raises(ServiceError, match="corrupt"):
        _service(log_path=log)

    log.write_text(json.dumps({"event": "frobnicate"}) + "\n")
    with pytest.raises(ServiceError, match="unknown event"):
        _service(log_path=log)

    log.write_text(
        json.dumps({"event": "assign", "conversation_id": "c99", "annotator_id": "a1"})
        + "\n"
    )
    with pytest.raises(ServiceError, match="unknown conversation"):
        _service(log_path=log)


# -- HTTP facade -------------------------------------------------------------


@pytest.fixture()
def client():
    from fastapi.testclient import TestClient

    service = _service()
    return TestClient(create_app(service)), service


def test_api_schema(client):
    http, _ = client
    response = http.get("/api/schema")
    assert response.status_code == 200
    payload = response.json()
    assert payload["version"] == 1
    assert len(payload["questions"]) == 12


def test_api_task_assignment_and_404(client):
    http, _ = client
    response = http.get("/api/tasks", params={"annotator": "a1"})
    assert response.status_code == 200
    payload = response.json()
    assert payload["annotator_id"] == "a1"
    assert payload["task"]["conversation"]["conversation_id"] == "c1"
    assert payload["task"]["target_message_id"] == "c1-m3"
    assert payload["task"]["schema_version"] == 1
    assert payload["progress"]["assigned"] == 1

    assert http.get("/api/tasks", params={"annotator": "ghost"}).status_code == 404


def test_api_submit_accept_and_reject(client):
    http, _ = client
    http.get("/api/tasks", params={"annotator": "a1"})

    ok = http.post(
        "/api/annotations",
        json={"conversation_id": "c1", "annotator_id": "a1", "answers": valid_yes_answers()},
    )
    assert ok.status_code == 200
    assert ok.json()["accepted"] is True

    bad_answers = valid_yes_answers()
    bad_answers["confidence"] = 11
    rejected = http.post(
        "/api/annotations",
        json={"conversation_id": "c1", "annotator_id": "a1", "answers": bad_answers},
    )
    assert rejected.status_code == 422
    body = rejected.json()
    assert body["accepted"] is False
    assert body["violations"][0]["code"] == "confidence_out_of_range"

    unassigned = http.post(
        "/api/annotations",
        json={"conversation_id": "c2", "annotator_id": "a1", "answers": valid_yes_answers()},
    )
    assert unassigned.status_code == 422
    assert "not assigned" in unassigned.json()["error"]


def test_api_agreement_endpoint(client):
    http, service = client
    for aid in ("a1", "a2"):
        http.get("/api/tasks", params={"annotator": aid})
        http.post(
            "/api/annotations",
            json={
                "conversation_id": "c1",
                "annotator_id": aid,
                "answers": valid_yes_answers(),
            },
        )
    response = http.get("/api/agreement")
    assert response.status_code == 200
    rows = {r["feature"]: r for r in response.json()["rows"]}
    assert rows["conflict"]["n_pairs"] == 1
    assert rows["conflict"]["kappa"] == 1.0


def test_api_conversation_lookup(client):
    http, _ = client
    response = http.get("/api/conversations/c2")
    assert response.status_code == 200
    record = response.json()
    assert record["conversation_id"] == "c2"
    assert len(record["messages"]) == 3
    assert http.get("/api/conversations/nope").status_code == 404


def test_static_ui_mount(tmp_path):
    from fastapi.testclient import TestClient

    (tmp_path / "index.html").write_text("<!doctype html><title>annotate</title>")
    http = TestClient(create_app(_service(), ui_dir=tmp_path))
    response = http.get("/")
    assert response.status_code == 200
    assert "annotate" in response.text
    # API routes still take precedence over the static mount
    assert http.get("/api/schema").status_code == 200
