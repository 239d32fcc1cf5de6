"""Agreement and distribution statistics for annotated conversations.

Cohen's kappa runs on integer counts so textbook fixtures come out exact;
the Kruskal-Wallis statistic uses pooled mid-ranks with the tie correction
applied unconditionally, and its p-value comes from a chi-square survival
function implemented here (series / continued-fraction split of the
regularized incomplete gamma).
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Hashable, Iterable, Mapping, Optional, Sequence

from .corpus import Corpus
from .schema import AnnotationRecord

log = logging.getLogger(__name__)


class StatsError(ValueError):
    """Bad input to a statistics routine."""


def cohen_kappa(
    labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]
) -> Optional[float]:
    """Chance-corrected agreement between two label sequences.

    Returns None when kappa is undefined: expected agreement is 1 (both
    annotators constant on the same label) while observed agreement is not.
    Computed from integer counts, so e.g. the 2x2 table (20, 5, 10, 15)
    yields exactly 0.4.
    """
    if len(labels_a) != len(labels_b):
        raise StatsError(
            f"label sequences differ in length ({len(labels_a)} vs {len(labels_b)})"
        )
    n = len(labels_a)
    if n == 0:
        raise StatsError("kappa needs at least one paired label")
    agree = sum(1 for a, b in zip(labels_a, labels_b) if a == b)
    counts_a = Counter(labels_a)
    counts_b = Counter(labels_b)
    # n^2 * p_e and n * p_o stay integral, so the ratio is exact.
    chance = sum(counts_a[k] * counts_b[k] for k in counts_a.keys() | counts_b.keys())
    denom = n * n - chance
    if denom == 0:
        return 1.0 if agree == n else None
    return (agree * n - chance) / denom


# Binary features in report order: the top-level question first, then
# follow-ups. Each entry is (feature name, gating parent or None, extractor).
_AGREEMENT_FEATURES: list[tuple[str, Optional[str], str, Optional[str]]] = [
    # (feature, parent bool field, source field, member)  member None => bool field
    ("conflict", None, "conflict", None),
    ("target_individual", "conflict", "targets", "individual"),
    ("external", "conflict", "internal_external", "external"),
    ("context_conversational", "context_needed", "context_types", "conversational"),
    ("internal", "conflict", "internal_external", "internal"),
    ("strategy_sarcasm", "rhetorical", "strategies", "sarcasm"),
    ("strategy_explicit_directives", "rhetorical", "strategies", "explicit_directives"),
    ("strategy_associations_metaphors", "rhetorical", "strategies", "associations_metaphors"),
    ("context_media", "context_needed", "context_types", "media"),
    ("context_cultural", "context_needed", "context_types", "cultural"),
    ("context_missing_content", "context_needed", "context_types", "missing_content"),
    ("groups_discussed", "conflict", "groups_discussed", None),
    ("rhetorical", "conflict", "rhetorical", None),
    ("context_needed", None, "context_needed", None),
]


@dataclass(frozen=True)
class AgreementRow:
    feature: str
    kappa: Optional[float]
    n_pairs: int


@dataclass(frozen=True)
class AgreementTable:
    rows: tuple[AgreementRow, ...]

    def by_feature(self) -> dict[str, AgreementRow]:
        return {r.feature: r for r in self.rows}


def _feature_value(record: AnnotationRecord, source: str, member: Optional[str]) -> bool:
    if member is None:
        return record.bool_answer(source) is True
    return member in record.selected(source)


def agreement_table(records: Iterable[AnnotationRecord]) -> AgreementTable:
    """Per-feature kappa across doubly-annotated conversations.

    Pairs are conversations with records from exactly two distinct
    annotators; anything unpaired is skipped with a warning. A follow-up
    feature only counts pairs where both annotators answered its parent
    question affirmatively.
    """
    by_conv: dict[str, list[AnnotationRecord]] = defaultdict(list)
    for rec in records:
        by_conv[rec.conversation_id].append(rec)

    pairs: list[tuple[AnnotationRecord, AnnotationRecord]] = []
    skipped: list[str] = []
    for cid in sorted(by_conv):
        recs = by_conv[cid]
        annotators = {r.annotator_id for r in recs}
        if len(recs) == 2 and len(annotators) == 2:
            pairs.append((recs[0], recs[1]))
        else:
            skipped.append(cid)
    if skipped:
        log.warning(
            "skipping %d conversation(s) without exactly two annotators: %s",
            len(skipped),
            ", ".join(skipped[:10]) + ("..." if len(skipped) > 10 else ""),
        )

    rows: list[AgreementRow] = []
    for feature, parent, source, member in _AGREEMENT_FEATURES:
        side_a: list[bool] = []
        side_b: list[bool] = []
        for rec_a, rec_b in pairs:
            if parent is not None and not (
                rec_a.bool_answer(parent) is True and rec_b.bool_answer(parent) is True
            ):
                continue
            side_a.append(_feature_value(rec_a, source, member))
            side_b.append(_feature_value(rec_b, source, member))
        kappa = cohen_kappa(side_a, side_b) if side_a else None
        rows.append(AgreementRow(feature=feature, kappa=kappa, n_pairs=len(side_a)))
    return AgreementTable(rows=tuple(rows))


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by power series (x < a + 1)."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(1000):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction (x >= a + 1)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution.

    Equals Q(df/2, x/2); the series form is used left of the a+1 switchover
    and the continued fraction right of it, which keeps both tails accurate.
    """
    if df <= 0:
        raise StatsError(f"degrees of freedom must be positive (got {df})")
    if x < 0:
        raise StatsError(f"chi-square statistic must be non-negative (got {x})")
    if x == 0.0:
        return 1.0
    a = df / 2.0
    half = x / 2.0
    if half < a + 1.0:
        return 1.0 - _lower_gamma_series(a, half)
    return _upper_gamma_cf(a, half)


def _mid_ranks(values: Sequence[float]) -> tuple[list[float], Counter]:
    """Ranks 1..N with ties sharing their average rank; also tie-run sizes."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    tie_sizes: Counter = Counter()
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # ranks are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        tie_sizes[j - i + 1] += 1
        i = j + 1
    return ranks, tie_sizes


@dataclass(frozen=True)
class KruskalWallisResult:
    h: float
    p_value: float
    df: int
    n: int
    group_sizes: tuple[int, ...]
    tie_corrected: bool


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> KruskalWallisResult:
    """Kruskal-Wallis H over k groups of pooled observations.

    Mid-ranks over the pooled sample, tie correction always applied, and the
    p-value from ``chi_square_sf`` with k-1 degrees of freedom. A pooled
    sample where every value is identical degenerates to H = 0, p = 1.
    """
    if len(groups) < 2:
        raise StatsError(f"need at least two groups (got {len(groups)})")
    sizes = [len(g) for g in groups]
    if any(s == 0 for s in sizes):
        raise StatsError("every group must be non-empty")
    pooled: list[float] = [float(v) for g in groups for v in g]
    n = len(pooled)
    if n < 3:
        raise StatsError(f"need at least three pooled observations (got {n})")
    if any(not math.isfinite(v) for v in pooled):
        raise StatsError("observations must be finite")

    ranks, tie_sizes = _mid_ranks(pooled)
    h = 0.0
    offset = 0
    for size in sizes:
        r_sum = sum(ranks[offset : offset + size])
        h += r_sum * r_sum / size
        offset += size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)

    tie_term = sum((t**3 - t) * count for t, count in tie_sizes.items() if t > 1)
    correction = 1.0 - tie_term / (n**3 - n)
    tie_corrected = tie_term > 0
    if correction == 0.0:
        # all observations identical
        return KruskalWallisResult(
            h=0.0,
            p_value=1.0,
            df=len(groups) - 1,
            n=n,
            group_sizes=tuple(sizes),
            tie_corrected=True,
        )
    h /= correction
    h = max(h, 0.0)  # guard float jitter just below zero
    df = len(groups) - 1
    return KruskalWallisResult(
        h=h,
        p_value=chi_square_sf(h, df),
        df=df,
        n=n,
        group_sizes=tuple(sizes),
        tie_corrected=tie_corrected,
    )


@dataclass(frozen=True)
class TopicSummaryRow:
    topic: str
    n: int
    conflict_rate: float
    sarcasm_rate: float
    metaphor_rate: float
    directive_rate: float
    target_individual_rate: float


@dataclass(frozen=True)
class TopicSummaryReport:
    rows: tuple[TopicSummaryRow, ...]
    total: TopicSummaryRow


_SUMMARY_LABELS = (
    ("sarcasm_rate", "strategies", "sarcasm"),
    ("metaphor_rate", "strategies", "associations_metaphors"),
    ("directive_rate", "strategies", "explicit_directives"),
    ("target_individual_rate", "targets", "individual"),
)


def topic_summary(
    corpus: Corpus, records: Iterable[AnnotationRecord]
) -> TopicSummaryReport:
    """Per-topic conversation counts with conflict and strategy rates.

    Conflict comes from the corpus gold labels where present, otherwise from
    unanimous annotator agreement. A strategy or target counts for a
    conversation when any of its annotators selected it. Rows are sorted by
    N descending (topic name breaking ties) and the total row aggregates
    over all conversations, so every rate times its N is an integer count.
    """
    by_conv: dict[str, list[AnnotationRecord]] = defaultdict(list)
    for rec in records:
        by_conv[rec.conversation_id].append(rec)

    per_topic: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    totals: dict[str, int] = defaultdict(int)
    for conv in corpus:
        recs = by_conv.get(conv.conversation_id, [])
        if conv.conversation_id in corpus.gold:
            conflict = corpus.gold[conv.conversation_id]
        else:
            conflict = bool(recs) and all(r.conflict for r in recs)
        counters = per_topic[conv.topic]
        counters["n"] += 1
        totals["n"] += 1
        if conflict:
            counters["conflict"] += 1
            totals["conflict"] += 1
        for rate_name, source, member in _SUMMARY_LABELS:
            if any(member in r.selected(source) for r in recs):
                counters[rate_name] += 1
                totals[rate_name] += 1

    if totals["n"] == 0:
        raise StatsError("corpus has no conversations to summarize")

    def _row(topic: str, counters: Mapping[str, int]) -> TopicSummaryRow:
        n = counters["n"]
        return TopicSummaryRow(
            topic=topic,
            n=n,
            conflict_rate=counters["conflict"] / n,
            sarcasm_rate=counters["sarcasm_rate"] / n,
            metaphor_rate=counters["metaphor_rate"] / n,
            directive_rate=counters["directive_rate"] / n,
            target_individual_rate=counters["target_individual_rate"] / n,
        )

    rows = sorted(
        (_row(topic, counters) for topic, counters in per_topic.items()),
        key=lambda r: (-r.n, r.topic),
    )
    return TopicSummaryReport(rows=tuple(rows), total=_row("total", totals))


def _week_start(d: date) -> date:
    return d - timedelta(days=d.weekday())


def topic_timeseries(
    corpus: Corpus, bucket: str = "day"
) -> dict[str, list[tuple[date, int]]]:
    """Message counts per topic over time, zero-filled across the corpus span.

    ``bucket`` is "day" or "week" (weeks start on Monday, UTC dates). Every
    topic's series covers the same global range so sparklines align.
    """
    if bucket not in ("day", "week"):
        raise StatsError(f"bucket must be 'day' or 'week' (got {bucket!r})")
    counts: dict[str, Counter] = defaultdict(Counter)
    all_buckets: set[date] = set()
    for conv in corpus:
        for msg in conv.messages:
            day = msg.timestamp.date()  # timestamps are normalized to UTC on parse
            key = day if bucket == "day" else _week_start(day)
            counts[conv.topic][key] += 1
            all_buckets.add(key)
    if not all_buckets:
        raise StatsError("corpus has no messages to bucket")

    step = timedelta(days=1 if bucket == "day" else 7)
    start, end = min(all_buckets), max(all_buckets)
    span: list[date] = []
    cursor = start
    while cursor <= end:
        span.append(cursor)
        cursor += step

    return {
        topic: [(day, counts[topic][day]) for day in span] for topic in sorted(counts)
    }


def conflict_rates_by_group(
    corpus: Corpus, group_of: Mapping[str, str]
) -> list[tuple[str, list[float]]]:
    """Gold conflict indicators (0/1) grouped by an arbitrary conversation key.

    Feeds ``kruskal_wallis`` when comparing conflict prevalence across
    groupings such as topics. Conversations without a gold label or a group
    assignment are skipped.
    """
    groups: dict[str, list[float]] = defaultdict(list)
    for conv in corpus:
        if conv.conversation_id not in corpus.gold:
            continue
        group = group_of.get(conv.conversation_id)
        if group is None:
            continue
        groups[group].append(1.0 if corpus.gold[conv.conversation_id] else 0.0)
    return sorted(groups.items())
