"""Conversation corpus ingestion, validation, and interaction graphs.

A corpus is a line-delimited stream of conversation records. Each
conversation is a short thread (3-7 messages) with reply edges; the last
message is the classification/annotation target. From a conversation we
derive a directed author-interaction graph whose edges follow reply
authorship, plus the cardinality and bidirectionality features used
downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, Mapping, Optional, Sequence

MIN_THREAD_LEN = 3
MAX_THREAD_LEN = 7

TRAVERSALS = ("depth", "breadth")


class CorpusError(ValueError):
    """Raised for unrecoverable corpus-level problems."""


@dataclass(frozen=True)
class Message:
    id: str
    author_id: str
    timestamp: datetime
    text: str
    reply_to_id: Optional[str] = None
    mentioned_author_ids: tuple[str, ...] = ()
    # Populated by the topic filter; None means "tokenize text on demand".
    tokens: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    messages: tuple[Message, ...]
    topic: str
    traversal: str

    @property
    def last_message(self) -> Message:
        return self.messages[-1]

    @property
    def author_ids(self) -> tuple[str, ...]:
        """Distinct authors in order of first appearance."""
        seen: dict[str, None] = {}
        for m in self.messages:
            seen.setdefault(m.author_id, None)
        return tuple(seen)

    def message_by_id(self, message_id: str) -> Optional[Message]:
        for m in self.messages:
            if m.id == message_id:
                return m
        return None


@dataclass(frozen=True)
class ConversationGraph:
    """Directed author-interaction graph of one conversation.

    ``edges`` keeps one entry per reply (multiplicity preserved, message
    order); ``adjacency`` collapses multiplicity to 0/1.
    """

    authors: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    adjacency: tuple[tuple[int, ...], ...]
    cardinality: int
    bidirectional: bool

    def to_export(self) -> dict:
        return {
            "authors": list(self.authors),
            "edges": [list(e) for e in self.edges],
            "adjacency": [list(row) for row in self.adjacency],
            "cardinality": self.cardinality,
            "bidirectional": self.bidirectional,
        }


@dataclass(frozen=True)
class Corpus:
    conversations: tuple[Conversation, ...]
    # Agreed conflict labels, filled in by filter_agreed().
    gold: Mapping[str, bool] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.conversations)

    def __iter__(self) -> Iterator[Conversation]:
        return iter(self.conversations)

    def by_id(self, conversation_id: str) -> Conversation:
        try:
            return self._index[conversation_id]
        except KeyError:
            raise CorpusError(f"unknown conversation_id: {conversation_id}") from None

    def get(self, conversation_id: str) -> Optional[Conversation]:
        return self._index.get(conversation_id)

    @property
    def _index(self) -> dict[str, Conversation]:
        idx = getattr(self, "_index_cache", None)
        if idx is None:
            idx = {c.conversation_id: c for c in self.conversations}
            object.__setattr__(self, "_index_cache", idx)
        return idx

    def by_topic(self) -> dict[str, list[Conversation]]:
        groups: dict[str, list[Conversation]] = {}
        for c in self.conversations:
            groups.setdefault(c.topic, []).append(c)
        return groups

    @property
    def topics(self) -> list[str]:
        return sorted(self.by_topic())


@dataclass(frozen=True)
class ParseIssue:
    line_no: int
    conversation_id: Optional[str]
    message: str

    def __str__(self) -> str:
        who = self.conversation_id or "<unknown>"
        return f"line {self.line_no} ({who}): {self.message}"


@dataclass(frozen=True)
class ParseResult:
    corpus: Corpus
    issues: tuple[ParseIssue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues


def _parse_timestamp(raw: str) -> datetime:
    # Python 3.10's fromisoformat rejects a trailing Z.
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_message(obj: dict) -> Message:
    mid = obj.get("id")
    if not isinstance(mid, str) or not mid:
        raise ValueError("message id must be a non-empty string")
    author = obj.get("author_id")
    if not isinstance(author, str) or not author:
        raise ValueError(f"message {mid}: author_id must be a non-empty string")
    try:
        ts = _parse_timestamp(obj["timestamp"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"message {mid}: bad timestamp ({exc})") from None
    text = obj.get("text")
    if not isinstance(text, str):
        raise ValueError(f"message {mid}: text must be a string")
    reply_to = obj.get("reply_to_id")
    if reply_to is not None and not isinstance(reply_to, str):
        raise ValueError(f"message {mid}: reply_to_id must be a string or null")
    mentions = obj.get("mentioned_author_ids", [])
    if not isinstance(mentions, list) or any(not isinstance(x, str) for x in mentions):
        raise ValueError(f"message {mid}: mentioned_author_ids must be a list of strings")
    tokens = obj.get("tokens")
    if tokens is not None:
        if not isinstance(tokens, list) or any(not isinstance(t, str) for t in tokens):
            raise ValueError(f"message {mid}: tokens must be a list of strings")
        tokens = tuple(tokens)
    return Message(
        id=mid,
        author_id=author,
        timestamp=ts,
        text=text,
        reply_to_id=reply_to,
        mentioned_author_ids=tuple(mentions),
        tokens=tokens,
    )


def validate_conversation(conv: Conversation) -> list[str]:
    """Structural checks on a parsed conversation; returns human-readable problems."""
    problems: list[str] = []
    n = len(conv.messages)
    if not (MIN_THREAD_LEN <= n <= MAX_THREAD_LEN):
        problems.append(
            f"length outside {MIN_THREAD_LEN}-{MAX_THREAD_LEN} messages (got {n})"
        )
    if conv.traversal not in TRAVERSALS:
        problems.append(f"traversal must be one of {TRAVERSALS} (got {conv.traversal!r})")

    ids = [m.id for m in conv.messages]
    dupes = {i for i in ids if ids.count(i) > 1}
    if dupes:
        problems.append(f"duplicate message ids: {sorted(dupes)}")
        return problems  # reply resolution is meaningless with duplicate ids

    id_set = set(ids)
    roots = [m for m in conv.messages if m.reply_to_id is None]
    if len(roots) > 1:
        problems.append(f"multiple root messages: {[m.id for m in roots]}")
    # A breadth capture may miss the true root: the earliest message is then
    # allowed to reference a message outside the record (context head).
    context_head = conv.messages[0].id if not roots else None
    for m in conv.messages:
        if m.reply_to_id is None or m.reply_to_id in id_set:
            continue
        if m.id == context_head:
            continue
        problems.append(f"message {m.id}: reply_to_id {m.reply_to_id!r} not in conversation")
    return problems


def parse_conversation(obj: dict) -> Conversation:
    """Build a Conversation from one decoded record; raises ValueError on bad shape."""
    cid = obj.get("conversation_id")
    if not isinstance(cid, str) or not cid:
        raise ValueError("conversation_id must be a non-empty string")
    topic = obj.get("topic")
    if not isinstance(topic, str) or not topic:
        raise ValueError("topic must be a non-empty string")
    traversal = obj.get("traversal")
    if not isinstance(traversal, str):
        raise ValueError("traversal must be a string")
    raw_messages = obj.get("messages")
    if not isinstance(raw_messages, list) or not raw_messages:
        raise ValueError("messages must be a non-empty list")
    messages = [_parse_message(m) for m in raw_messages]
    # Deterministic chronology: strict order after tie-break on message id.
    messages.sort(key=lambda m: (m.timestamp, m.id))
    return Conversation(
        conversation_id=cid,
        messages=tuple(messages),
        topic=topic,
        traversal=traversal,
    )


def parse_corpus(source: Iterable[str]) -> ParseResult:
    """Parse a line-delimited record stream into a Corpus.

    Every valid record is kept; malformed or invalid ones are reported with
    their line numbers instead of aborting the whole ingest.
    """
    conversations: list[Conversation] = []
    issues: list[ParseIssue] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            issues.append(ParseIssue(line_no, None, f"malformed record: {exc}"))
            continue
        try:
            conv = parse_conversation(obj)
        except ValueError as exc:
            cid = obj.get("conversation_id") if isinstance(obj, dict) else None
            issues.append(ParseIssue(line_no, cid, str(exc)))
            continue
        if conv.conversation_id in seen_ids:
            issues.append(
                ParseIssue(line_no, conv.conversation_id, "duplicate conversation_id")
            )
            continue
        problems = validate_conversation(conv)
        if problems:
            for p in problems:
                issues.append(ParseIssue(line_no, conv.conversation_id, p))
            continue
        seen_ids.add(conv.conversation_id)
        conversations.append(conv)
    return ParseResult(Corpus(tuple(conversations)), tuple(issues))


def conversation_to_record(conv: Conversation) -> dict:
    """Inverse of parse_conversation, suitable for JSONL export."""
    messages = []
    for m in conv.messages:
        rec = {
            "id": m.id,
            "author_id": m.author_id,
            "timestamp": m.timestamp.isoformat().replace("+00:00", "Z"),
            "text": m.text,
            "reply_to_id": m.reply_to_id,
            "mentioned_author_ids": list(m.mentioned_author_ids),
        }
        if m.tokens is not None:
            rec["tokens"] = list(m.tokens)
        messages.append(rec)
    return {
        "conversation_id": conv.conversation_id,
        "topic": conv.topic,
        "traversal": conv.traversal,
        "messages": messages,
    }


def build_graph(conversation: Conversation) -> ConversationGraph:
    """Derive the directed author-interaction graph of a conversation.

    One node per distinct author; one directed edge (a, b) per message by a
    replying to a message authored by b. Self-replies produce no edges, and
    mentions never do: topology measures inter-participant reply structure.
    """
    authors = conversation.author_ids
    index = {a: i for i, a in enumerate(authors)}
    by_id = {m.id: m for m in conversation.messages}
    edges: list[tuple[str, str]] = []
    for m in conversation.messages:
        if m.reply_to_id is None:
            continue
        target = by_id.get(m.reply_to_id)
        if target is None:  # tolerated context-head dangle
            continue
        if target.author_id == m.author_id:
            continue
        edges.append((m.author_id, target.author_id))
    n = len(authors)
    adjacency = [[0] * n for _ in range(n)]
    for src, dst in edges:
        adjacency[index[src]][index[dst]] = 1
    bidirectional = any(
        adjacency[i][j] and adjacency[j][i] for i in range(n) for j in range(i + 1, n)
    )
    return ConversationGraph(
        authors=authors,
        edges=tuple(edges),
        adjacency=tuple(tuple(row) for row in adjacency),
        cardinality=n,
        bidirectional=bidirectional,
    )


def notified_authors(graph: ConversationGraph, from_author: str) -> set[str]:
    """Authors reachable from ``from_author`` along directed edges.

    A path u -> ... -> v means v is (transitively) notified by u. The origin
    itself is never part of the result, even when it sits on a cycle.
    """
    if from_author not in graph.authors:
        raise CorpusError(f"unknown author: {from_author}")
    succ: dict[str, set[str]] = {a: set() for a in graph.authors}
    for src, dst in graph.edges:
        succ[src].add(dst)
    reached: set[str] = set()
    frontier = [from_author]
    while frontier:
        node = frontier.pop()
        for nxt in succ[node]:
            if nxt not in reached:
                reached.add(nxt)
                frontier.append(nxt)
    reached.discard(from_author)
    return reached


def filter_agreed(corpus: Corpus, annotations: Sequence) -> Corpus:
    """Keep conversations whose two annotators agree on the conflict label.

    Conversations with fewer than two annotations are dropped (only
    doubly-annotated ones are eligible); more than two for one conversation
    is a data-integrity error. The agreed label is attached as gold.
    """
    by_conv: dict[str, list] = {}
    for rec in annotations:
        by_conv.setdefault(rec.conversation_id, []).append(rec)
    for cid, recs in by_conv.items():
        annotators = {r.annotator_id for r in recs}
        if len(recs) > 2 or len(annotators) != len(recs):
            raise CorpusError(
                f"conversation {cid} has {len(recs)} annotations from "
                f"{len(annotators)} annotators; exactly one each from two "
                f"distinct annotators is allowed"
            )
    kept: list[Conversation] = []
    gold: dict[str, bool] = {}
    for conv in corpus:
        recs = by_conv.get(conv.conversation_id, [])
        if len(recs) != 2:
            continue
        labels = {r.conflict for r in recs}
        if len(labels) == 1:
            kept.append(conv)
            gold[conv.conversation_id] = labels.pop()
    return Corpus(tuple(kept), gold=gold)


def estimate_first_interactions(
    corpus: Corpus, prior_contacts: Mapping[str, set[str]]
) -> float:
    """Fraction of conversations whose participants have no prior contact.

    A pair (a, b) counts as previously acquainted when either author appears
    in the other's prior-contact set. Authors missing from the map are
    treated as having no known contacts.
    """
    if len(corpus) == 0:
        return 0.0
    first = 0
    for conv in corpus:
        authors = conv.author_ids
        acquainted = False
        for i, a in enumerate(authors):
            for b in authors[i + 1 :]:
                if b in prior_contacts.get(a, ()) or a in prior_contacts.get(b, ()):
                    acquainted = True
                    break
            if acquainted:
                break
        if not acquainted:
            first += 1
    return first / len(corpus)
