"""Shared builders: tiny threaded conversations, a five-author example
thread, full annotation answer sets, and a seeded synthetic labeled corpus
whose topic markers carry label signal."""

from __future__ import annotations

import io
import json
import random

import pytest

from conflictkit.corpus import Corpus, filter_agreed, parse_corpus
from conflictkit.features import TopicLexicon
from conflictkit.schema import AnnotationRecord


def make_message(mid, author, ts, text, reply_to=None, mentions=()):
    return {
        "id": mid,
        "author_id": author,
        "timestamp": ts,
        "text": text,
        "reply_to_id": reply_to,
        "mentioned_author_ids": list(mentions),
    }


def make_thread(cid, texts, topic="general", authors=None, traversal="depth", day="2022-06-01"):
    """Chain-structured conversation: message k replies to message k-1."""
    authors = authors or [f"u{k % 3 + 1}" for k in range(len(texts))]
    messages = [
        make_message(
            f"{cid}-m{k + 1}",
            authors[k],
            f"{day}T10:{k:02d}:00Z",
            text,
            reply_to=f"{cid}-m{k}" if k else None,
        )
        for k, text in enumerate(texts)
    ]
    return {
        "conversation_id": cid,
        "topic": topic,
        "traversal": traversal,
        "messages": messages,
    }


def corpus_from(records) -> Corpus:
    result = parse_corpus(io.StringIO("\n".join(json.dumps(r) for r in records)))
    assert result.ok, [str(i) for i in result.issues]
    return result.corpus


def fig3_record():
    """Seven-message thread over five authors with one mutual reply pair."""
    msgs = [
        make_message("m1", "Amal", "2022-06-01T10:01:00Z", "starting a thread"),
        make_message("m2", "Boróka", "2022-06-01T10:02:00Z", "replying to the root", "m1"),
        make_message("m3", "Deniz", "2022-06-01T10:03:00Z", "answering Boróka", "m2"),
        make_message("m4", "Boróka", "2022-06-01T10:04:00Z", "back to Deniz", "m3"),
        make_message("m5", "Carlu", "2022-06-01T10:05:00Z", "also replying to the root", "m1"),
        make_message("m6", "Eryl", "2022-06-01T10:06:00Z", "joining under Deniz", "m3"),
        make_message("m7", "Eryl", "2022-06-01T10:07:00Z", "and under Carlu", "m5"),
    ]
    return {
        "conversation_id": "five-author-thread",
        "topic": "demo",
        "traversal": "depth",
        "messages": msgs,
    }


@pytest.fixture()
def fig3_conversation():
    return corpus_from([fig3_record()]).get("five-author-thread")


def valid_yes_answers(**overrides):
    """A complete affirmative-path answer set."""
    answers = {
        "conflict": True,
        "internal_external": ["internal"],
        "targets": ["individual"],
        "authority": ["personal_experience"],
        "groups_discussed": False,
        "rhetorical": True,
        "strategies": ["sarcasm"],
        "context_needed": False,
        "emotions": ["anger"],
        "confidence": 4,
    }
    answers.update(overrides)
    return answers


def valid_no_answers(**overrides):
    answers = {
        "conflict": False,
        "context_needed": True,
        "context_types": ["cultural"],
        "confidence": 5,
    }
    answers.update(overrides)
    return answers


def make_annotation(cid, aid, conflict=True, **overrides) -> AnnotationRecord:
    answers = valid_yes_answers(**overrides) if conflict else valid_no_answers(**overrides)
    return AnnotationRecord(conversation_id=cid, annotator_id=aid, answers=answers)


# -- synthetic labeled corpus ------------------------------------------------

CONFLICT_WORDS = ["wrong", "liar", "nonsense", "blame", "shameful", "ridiculous", "corrupt"]
CALM_WORDS = ["thanks", "agree", "lovely", "helpful", "interesting", "kind", "fair"]
FILLER = ["the", "a", "day", "city", "people", "time", "thing", "story", "news", "point"]
SYNTH_TOPICS = {
    # topic -> (marker word present in every message, conflict rate)
    "river-dam": ("dam", 1.0),
    "metro-fares": ("fares", 1.0),
    "park-renewal": ("parkland", 0.0),
    "library-hours": ("library", 0.0),
}


def build_synthetic(n_per_topic=30, seed=7, signal=0.6):
    """Corpus where the topic marker predicts the label perfectly and a
    weaker lexical signal survives topic-term removal.

    Returns (corpus with gold labels, lexicon banning the markers,
    annotation records from two unanimous annotators).
    """
    rng = random.Random(seed)
    records, annotations = [], []
    idx = 0
    for topic, (marker, rate) in SYNTH_TOPICS.items():
        for _ in range(n_per_topic):
            idx += 1
            cid = f"c{idx:03d}"
            conflict = rng.random() < rate
            n_msgs = rng.randint(3, 7)
            day = f"2022-0{rng.randint(5, 9)}-{rng.randint(10, 28):02d}"
            msgs = []
            for k in range(n_msgs):
                words = [marker] + rng.sample(FILLER, 3)
                if rng.random() < signal:
                    words.append(rng.choice(CONFLICT_WORDS if conflict else CALM_WORDS))
                rng.shuffle(words)
                msgs.append(
                    make_message(
                        f"{cid}-m{k + 1}",
                        f"u{rng.randint(1, 8)}",
                        f"{day}T12:{k:02d}:00Z",
                        " ".join(words),
                        reply_to=f"{cid}-m{k}" if k else None,
                    )
                )
            records.append(
                {
                    "conversation_id": cid,
                    "topic": topic,
                    "traversal": "depth",
                    "messages": msgs,
                }
            )
            for aid in ("a1", "a2"):
                annotations.append(make_annotation(cid, aid, conflict=conflict))
    corpus = corpus_from(records)
    corpus = filter_agreed(corpus, annotations)
    lexicon = TopicLexicon.from_mapping(
        {topic: [marker] for topic, (marker, _) in SYNTH_TOPICS.items()}
    )
    return corpus, lexicon, annotations


@pytest.fixture(scope="session")
def synthetic_corpus():
    return build_synthetic()
