"""Placing conversations in the toxicity / constructiveness / conflict cube.

Each conversation gets a likelihood triple (T, S, C) in the unit cube and
three proximity scores measuring Euclidean closeness to the corners of
interest: agonistic (0, 1, 1), unproductive (1, 0, 1), and small talk
(0, 0, 0). A score is 1 minus the distance to its corner, so the maximum
is exactly 1 at the corner and the minimum is 1 - sqrt(3) at the opposite
one. The agonism zone is the axis-aligned box with high conflict, high
constructiveness, and low toxicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import Corpus, ConversationGraph

SCORE_MIN = 1.0 - math.sqrt(3.0)
SCORE_MAX = 1.0


class AgonismError(ValueError):
    """Component out of range or inconsistent scoring input."""


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise AgonismError(f"{name} must be in [0, 1] (got {value})")
    return value


def logistic(z: float) -> float:
    """Scalar logistic, for mapping raw scores on the real line into [0, 1]."""
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@dataclass(frozen=True)
class LikelihoodTriple:
    """Per-conversation likelihoods: T toxicity, S constructiveness, C conflict."""

    conversation_id: str
    toxicity: float
    constructiveness: float
    conflict: float

    def __post_init__(self) -> None:
        _check_unit("toxicity", self.toxicity)
        _check_unit("constructiveness", self.constructiveness)
        _check_unit("conflict", self.conflict)

    @classmethod
    def from_logits(
        cls,
        conversation_id: str,
        toxicity_logit: float,
        constructiveness_logit: float,
        conflict: float,
    ) -> "LikelihoodTriple":
        """Build a triple from raw-score toxicity/constructiveness and an
        already-calibrated conflict probability."""
        return cls(
            conversation_id=conversation_id,
            toxicity=logistic(toxicity_logit),
            constructiveness=logistic(constructiveness_logit),
            conflict=conflict,
        )


@dataclass(frozen=True)
class AgonismScores:
    p_agonistic: float
    p_unproductive: float
    p_small_talk: float


def score(triple: LikelihoodTriple) -> AgonismScores:
    """Proximity of (T, S, C) to the three reference corners."""
    t, s, c = triple.toxicity, triple.constructiveness, triple.conflict
    p_a = 1.0 - math.sqrt(t * t + (s - 1.0) ** 2 + (c - 1.0) ** 2)
    p_u = 1.0 - math.sqrt((t - 1.0) ** 2 + s * s + (c - 1.0) ** 2)
    p_s = 1.0 - math.sqrt(t * t + s * s + c * c)
    return AgonismScores(p_agonistic=p_a, p_unproductive=p_u, p_small_talk=p_s)


@dataclass(frozen=True)
class ZoneThresholds:
    """Axis-aligned box bounds; all three comparisons are inclusive."""

    min_conflict: float = 0.5
    min_constructiveness: float = 0.5
    max_toxicity: float = 0.5

    def __post_init__(self) -> None:
        _check_unit("min_conflict", self.min_conflict)
        _check_unit("min_constructiveness", self.min_constructiveness)
        _check_unit("max_toxicity", self.max_toxicity)


AGONISM_ZONE = "agonism_zone"
OUTSIDE = "outside"


def classify_zone(
    triple: LikelihoodTriple, thresholds: ZoneThresholds = ZoneThresholds()
) -> str:
    """Either ``agonism_zone`` or ``outside`` for the closed box."""
    inside = (
        triple.conflict >= thresholds.min_conflict
        and triple.constructiveness >= thresholds.min_constructiveness
        and triple.toxicity <= thresholds.max_toxicity
    )
    return AGONISM_ZONE if inside else OUTSIDE


@dataclass(frozen=True)
class ScoredConversation:
    triple: LikelihoodTriple
    scores: AgonismScores
    zone: str

    @property
    def conversation_id(self) -> str:
        return self.triple.conversation_id

    @property
    def in_zone(self) -> bool:
        return self.zone == AGONISM_ZONE


def score_conversations(
    triples: Iterable[LikelihoodTriple],
    thresholds: ZoneThresholds = ZoneThresholds(),
) -> list[ScoredConversation]:
    out = []
    seen: set[str] = set()
    for triple in triples:
        if triple.conversation_id in seen:
            raise AgonismError(
                f"duplicate conversation in scoring input: {triple.conversation_id!r}"
            )
        seen.add(triple.conversation_id)
        out.append(
            ScoredConversation(
                triple=triple,
                scores=score(triple),
                zone=classify_zone(triple, thresholds),
            )
        )
    return out


_SCORE_FIELDS = {
    "P_A": "p_agonistic",
    "P_U": "p_unproductive",
    "P_S": "p_small_talk",
}


def top_k_by_score(
    scored: Sequence[ScoredConversation],
    which: str,
    k: int,
    bidirectional_only: bool = False,
    graphs: Optional[Mapping[str, ConversationGraph]] = None,
) -> list[ScoredConversation]:
    """Highest-scoring conversations for one of P_A, P_U, P_S.

    Ordered by score descending with conversation id breaking ties, so the
    top k is always a prefix of the top k+1. ``bidirectional_only`` keeps
    only conversations whose reply graph has a mutual edge, which requires
    the graphs mapping.
    """
    if which not in _SCORE_FIELDS:
        raise AgonismError(
            f"score must be one of {sorted(_SCORE_FIELDS)} (got {which!r})"
        )
    if k <= 0:
        raise AgonismError(f"k must be positive (got {k})")
    pool = list(scored)
    if bidirectional_only:
        if graphs is None:
            raise AgonismError("bidirectional_only requires conversation graphs")
        missing = [s.conversation_id for s in pool if s.conversation_id not in graphs]
        if missing:
            raise AgonismError(
                f"no graph for conversation(s): {', '.join(sorted(missing)[:5])}"
            )
        pool = [s for s in pool if graphs[s.conversation_id].bidirectional]
    attr = _SCORE_FIELDS[which]
    pool.sort(key=lambda s: (-getattr(s.scores, attr), s.conversation_id))
    return pool[:k]


SECONDARY_LABELS = ("agonistic", "antagonistic", "neither")
POOLS = ("from_PA_pool", "from_PU_pool")


@dataclass(frozen=True)
class SecondaryLabelReport:
    n: int
    distribution: dict[str, float]  # label -> percent of all labeled
    purity: dict[str, Optional[dict[str, float]]]  # label -> pool -> percent


def secondary_label_report(
    labels: Mapping[str, str], provenance: Mapping[str, str]
) -> SecondaryLabelReport:
    """Distribution of manual second-pass labels and their pool composition.

    Every labeled conversation must have a provenance pool; labels and pools
    outside the fixed alphabets are data errors. Purity for a label with no
    conversations is None rather than a division by zero.
    """
    if not labels:
        raise AgonismError("no labeled conversations")
    counts = {label: 0 for label in SECONDARY_LABELS}
    pool_counts = {label: {pool: 0 for pool in POOLS} for label in SECONDARY_LABELS}
    for cid, label in labels.items():
        if label not in SECONDARY_LABELS:
            raise AgonismError(f"unknown label {label!r} for {cid!r}")
        pool = provenance.get(cid)
        if pool is None:
            raise AgonismError(f"labeled conversation {cid!r} has no provenance pool")
        if pool not in POOLS:
            raise AgonismError(f"unknown pool {pool!r} for {cid!r}")
        counts[label] += 1
        pool_counts[label][pool] += 1
    n = len(labels)
    distribution = {label: 100.0 * counts[label] / n for label in SECONDARY_LABELS}
    purity: dict[str, Optional[dict[str, float]]] = {}
    for label in SECONDARY_LABELS:
        if counts[label] == 0:
            purity[label] = None
        else:
            purity[label] = {
                pool: 100.0 * pool_counts[label][pool] / counts[label]
                for pool in POOLS
            }
    return SecondaryLabelReport(n=n, distribution=distribution, purity=purity)


def _week_start(d: date) -> date:
    return d - timedelta(days=d.weekday())


def zone_ratio_timeseries(
    corpus: Corpus,
    scored: Sequence[ScoredConversation],
    bucket: str = "week",
) -> dict[str, list[tuple[date, int, float]]]:
    """Per-topic share of conversations inside the agonism zone over time.

    A conversation is bucketed by the UTC date of its last message. Entries
    are (bucket_start, n_conversations, in_zone_ratio), zero-filled across
    the global span observed in ``scored``.
    """
    if bucket not in ("day", "week"):
        raise AgonismError(f"bucket must be 'day' or 'week' (got {bucket!r})")
    by_id = {s.conversation_id: s for s in scored}
    totals: dict[str, dict[date, int]] = {}
    in_zone: dict[str, dict[date, int]] = {}
    all_buckets: set[date] = set()
    for conv in corpus:
        s = by_id.get(conv.conversation_id)
        if s is None:
            continue
        day = conv.last_message.timestamp.date()
        key = day if bucket == "day" else _week_start(day)
        totals.setdefault(conv.topic, {}).setdefault(key, 0)
        totals[conv.topic][key] += 1
        if s.in_zone:
            in_zone.setdefault(conv.topic, {}).setdefault(key, 0)
            in_zone[conv.topic][key] += 1
        all_buckets.add(key)
    if not all_buckets:
        raise AgonismError("no scored conversations found in the corpus")
    step = timedelta(days=1 if bucket == "day" else 7)
    start, end = min(all_buckets), max(all_buckets)
    span: list[date] = []
    cursor = start
    while cursor <= end:
        span.append(cursor)
        cursor += step
    out: dict[str, list[tuple[date, int, float]]] = {}
    for topic in sorted(totals):
        series = []
        for day in span:
            n = totals[topic].get(day, 0)
            hits = in_zone.get(topic, {}).get(day, 0)
            series.append((day, n, hits / n if n else 0.0))
        out[topic] = series
    return out
