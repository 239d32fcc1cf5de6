"""Text featurization: tokenizer, n-gram TF-IDF, topic-word tooling.

The sparse block is a unigram+bigram TF-IDF matrix with smooth idf,
ln((1+N)/(1+df)) + 1, raw term counts, and L2-normalized rows. Dense
context columns (constructiveness/toxicity logits, cardinality,
bidirectionality) are appended separately so the sparse block is never
mutated.
"""

from __future__ import annotations

import csv
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
import math
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .corpus import Conversation, ConversationGraph, Corpus, Message

logger = logging.getLogger(__name__)

# Inserted between messages when a thread is flattened to one token list;
# blocks bigrams from straddling message boundaries. The tokenizer can never
# emit it (it splits on whitespace).
MESSAGE_BOUNDARY = "\n"

URL_TOKEN = "URL"
MENTION_TOKEN = "@USER"

LAST_MESSAGE = "last_message"
ALL_MESSAGES = "all_messages"

_TOKEN_RE = re.compile(
    r"""
    (?P<url>https?://\S+|www\.\S+)
  | (?P<mention>@\w+)
  | (?P<hashtag>\#\w+)
  | (?P<emoji>[\U0001F000-\U0001FAFF☀-➿⬀-⯿])
  | (?P<word>\w+(?:'\w+)*)
    """,
    re.VERBOSE | re.UNICODE,
)


class FeatureError(Exception):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercased word segmentation with platform-noise normalization.

    URLs collapse to ``URL`` and @-mentions to ``@USER`` (anonymization and
    topic independence); hashtags keep their ``#``; emoji come through as
    single tokens.
    """
    tokens: list[str] = []
    for m in _TOKEN_RE.finditer(text):
        if m.lastgroup == "url":
            tokens.append(URL_TOKEN)
        elif m.lastgroup == "mention":
            tokens.append(MENTION_TOKEN)
        else:
            tokens.append(m.group().lower())
    return tokens


def message_tokens(message: Message) -> list[str]:
    """Tokens for one message, honoring any pre-filtered token list."""
    if message.tokens is not None:
        return list(message.tokens)
    return tokenize(message.text)


def conversation_tokens(conversation: Conversation, scope: str) -> list[str]:
    """Flatten a conversation to one token list under the given scope.

    ``last_message`` uses only the annotation target; ``all_messages``
    concatenates the thread with MESSAGE_BOUNDARY between messages so that
    bigrams never straddle two messages.
    """
    if scope == LAST_MESSAGE:
        return message_tokens(conversation.last_message)
    if scope == ALL_MESSAGES:
        out: list[str] = []
        for i, msg in enumerate(conversation.messages):
            if i:
                out.append(MESSAGE_BOUNDARY)
            out.extend(message_tokens(msg))
        return out
    raise FeatureError(f"unknown scope: {scope!r}")


@dataclass(frozen=True)
class VectorizerConfig:
    ngram_range: tuple[int, int] = (1, 2)
    # The tokenizer already lowercases words; keeping this off preserves the
    # URL / @USER sentinels as distinct from the literal words.
    lowercase: bool = False
    # Bigrams blow up on a few thousand conversations; unigrams do not.
    min_df_unigram: int = 1
    min_df_bigram: int = 2

    def min_df(self, n: int) -> int:
        return self.min_df_unigram if n == 1 else self.min_df_bigram


@dataclass(frozen=True)
class Vocabulary:
    terms: Mapping[str, int]  # term -> contiguous column index, lexicographic
    document_frequencies: Mapping[str, int]
    n_documents: int
    config: VectorizerConfig

    def __len__(self) -> int:
        return len(self.terms)

    def idf(self, term: str) -> float:
        df = self.document_frequencies[term]
        return math.log((1 + self.n_documents) / (1 + df)) + 1.0

    @property
    def ordered_terms(self) -> list[str]:
        return sorted(self.terms, key=self.terms.__getitem__)


def _ngram_counts(tokens: Sequence[str], config: VectorizerConfig) -> Counter:
    lo, hi = config.ngram_range
    counts: Counter = Counter()
    toks = [t.lower() for t in tokens] if config.lowercase else list(tokens)
    if lo <= 1:
        for t in toks:
            if t != MESSAGE_BOUNDARY:
                counts[t] += 1
    if hi >= 2:
        for a, b in zip(toks, toks[1:]):
            if a != MESSAGE_BOUNDARY and b != MESSAGE_BOUNDARY:
                counts[f"{a} {b}"] += 1
    return counts


def fit_vectorizer(
    documents: Sequence[Sequence[str]], config: VectorizerConfig = VectorizerConfig()
) -> Vocabulary:
    """Build the n-gram vocabulary and document frequencies from token lists."""
    if not any(len([t for t in d if t != MESSAGE_BOUNDARY]) for d in documents):
        raise FeatureError("cannot fit a vectorizer: all documents are empty")
    df: Counter = Counter()
    for doc in documents:
        df.update(_ngram_counts(doc, config).keys())
    kept = {
        term: count
        for term, count in df.items()
        if count >= config.min_df(term.count(" ") + 1)
    }
    terms = {term: i for i, term in enumerate(sorted(kept))}
    return Vocabulary(
        terms=terms,
        document_frequencies=kept,
        n_documents=len(documents),
        config=config,
    )


def transform(
    documents: Sequence[Sequence[str]], vocabulary: Vocabulary
) -> sparse.csr_matrix:
    """TF-IDF weights for token lists, rows L2-normalized.

    weight(t, d) = tf(t, d) * (ln((1+N)/(1+df(t))) + 1). Out-of-vocabulary
    terms are ignored; a document with no in-vocabulary terms yields a zero
    row.
    """
    idf = {t: vocabulary.idf(t) for t in vocabulary.terms}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for r, doc in enumerate(documents):
        counts = _ngram_counts(doc, vocabulary.config)
        entries = [
            (vocabulary.terms[t], n * idf[t])
            for t, n in counts.items()
            if t in vocabulary.terms
        ]
        if not entries:
            continue
        norm = float(np.sqrt(sum(v * v for _, v in entries)))
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v / norm)
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(documents), len(vocabulary))
    )


def ctfidf_top_terms(corpus: Corpus, k: int = 10) -> dict[str, list[str]]:
    """Candidate topic words per topic by class-based TF-IDF.

    W(t, c) = (tf(t, c) / tokens(c)) * ln(1 + A / tf(t)) over unigrams,
    where tf(t, c) counts t inside topic c, tf(t) counts it everywhere, and
    A is the mean token count per topic. Ties break lexicographically. These
    are candidates: the shipped lexicon is a curated config file.
    """
    groups = corpus.by_topic()
    if not groups:
        raise FeatureError("corpus has no topics")
    topic_counts: dict[str, Counter] = {}
    total: Counter = Counter()
    for topic, convs in groups.items():
        counts: Counter = Counter()
        for conv in convs:
            for tok in conversation_tokens(conv, ALL_MESSAGES):
                if tok != MESSAGE_BOUNDARY:
                    counts[tok] += 1
        if not counts:
            raise FeatureError(f"topic {topic!r} has no tokens")
        topic_counts[topic] = counts
        total.update(counts)
    mean_tokens = sum(total.values()) / len(groups)
    out: dict[str, list[str]] = {}
    for topic, counts in topic_counts.items():
        size = sum(counts.values())
        scored = [
            (count / size * math.log(1 + mean_tokens / total[term]), term)
            for term, count in counts.items()
        ]
        scored.sort(key=lambda wt: (-wt[0], wt[1]))
        out[topic] = [term for _, term in scored[:k]]
    return out


@dataclass(frozen=True)
class TopicLexicon:
    """Per-topic banned unigrams (topic keys matched case-insensitively)."""

    banned: Mapping[str, frozenset[str]]

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Sequence[str]]) -> "TopicLexicon":
        banned: dict[str, frozenset[str]] = {}
        for topic, terms in raw.items():
            if not terms:
                raise FeatureError(f"topic {topic!r} has an empty banned-term list")
            banned[topic.lower()] = frozenset(t.lower() for t in terms)
        return cls(banned=banned)

    def terms_for(self, topic: str) -> Optional[frozenset[str]]:
        return self.banned.get(topic.lower())

    @property
    def all_terms(self) -> frozenset[str]:
        out: set[str] = set()
        for terms in self.banned.values():
            out |= terms
        return frozenset(out)


def apply_topic_filter(corpus: Corpus, lexicon: TopicLexicon) -> Corpus:
    """Delete each conversation's topic-banned terms at token level.

    Bigrams containing a banned term disappear with it. Original text is
    preserved for display; conversations whose topic is missing from the
    lexicon pass through unfiltered (logged once per topic).
    """
    warned: set[str] = set()
    filtered: list[Conversation] = []
    for conv in corpus:
        banned = lexicon.terms_for(conv.topic)
        if banned is None:
            if conv.topic not in warned:
                logger.warning("topic %r not in lexicon; passing through unfiltered", conv.topic)
                warned.add(conv.topic)
            filtered.append(conv)
            continue
        messages = tuple(
            Message(
                id=m.id,
                author_id=m.author_id,
                timestamp=m.timestamp,
                text=m.text,
                reply_to_id=m.reply_to_id,
                mentioned_author_ids=m.mentioned_author_ids,
                tokens=tuple(t for t in message_tokens(m) if t not in banned),
            )
            for m in conv.messages
        )
        filtered.append(
            Conversation(
                conversation_id=conv.conversation_id,
                messages=messages,
                topic=conv.topic,
                traversal=conv.traversal,
            )
        )
    return Corpus(tuple(filtered), gold=dict(corpus.gold))


def vocabulary_banned_overlap(vocabulary: Vocabulary, lexicon: TopicLexicon) -> set[str]:
    """Vocabulary terms that collide with any topic's banned list.

    Diagnostic for the filtered dataset: a unigram hit is a direct collision,
    a bigram hits when either of its halves is banned.
    """
    banned = lexicon.all_terms
    offenders: set[str] = set()
    for term in vocabulary.terms:
        if any(part in banned for part in term.split(" ")):
            offenders.add(term)
    return offenders


@dataclass(frozen=True)
class ContextScores:
    """Per-conversation constructiveness/toxicity logits from external models."""

    scores: Mapping[str, tuple[float, float]]  # id -> (constructiveness, toxicity)

    def __contains__(self, conversation_id: str) -> bool:
        return conversation_id in self.scores

    def get(self, conversation_id: str) -> Optional[tuple[float, float]]:
        return self.scores.get(conversation_id)


def load_context_scores(lines: Iterable[str]) -> ContextScores:
    """Read the ``conversation_id,constructiveness,toxicity`` delimited file."""
    reader = csv.DictReader(lines)
    required = {"conversation_id", "constructiveness", "toxicity"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise FeatureError(
            f"context scores file must have header columns {sorted(required)}"
        )
    scores: dict[str, tuple[float, float]] = {}
    for row in reader:
        try:
            scores[row["conversation_id"]] = (
                float(row["constructiveness"]),
                float(row["toxicity"]),
            )
        except ValueError as exc:
            raise FeatureError(
                f"bad context score for {row['conversation_id']!r}: {exc}"
            ) from None
    return ContextScores(scores=scores)


@dataclass(frozen=True)
class FeatureFlags:
    """Which context columns to append and which text scope to vectorize."""

    scope: str = LAST_MESSAGE
    use_context_scores: bool = False
    use_cardinality: bool = False
    use_topology: bool = False

    def label(self) -> str:
        parts = ["Last Msg" if self.scope == LAST_MESSAGE else "All Msg"]
        extras = []
        if self.use_context_scores:
            extras.append("constr, tox")
        if self.use_cardinality:
            extras.append("cardinality")
        if self.use_topology:
            extras.append("topology")
        if extras:
            parts.append("+ " + " + ".join(extras))
        return " ".join(parts)


@dataclass(frozen=True)
class FeatureMatrix:
    row_ids: tuple[str, ...]
    sparse_block: sparse.csr_matrix
    dense_block: np.ndarray  # (n_rows, n_dense), may have zero columns
    dense_names: tuple[str, ...]
    cardinality_stats: Optional[tuple[float, float]] = None  # (mean, sample std)

    @property
    def width(self) -> int:
        return self.sparse_block.shape[1] + self.dense_block.shape[1]

    def combined(self) -> sparse.csr_matrix:
        if self.dense_block.shape[1] == 0:
            return self.sparse_block
        return sparse.hstack(
            [self.sparse_block, sparse.csr_matrix(self.dense_block)], format="csr"
        )


def standardize(values, stats: Optional[tuple[float, float]] = None):
    """Z-score a column using sample std; constant columns map to zeros."""
    values = np.asarray(values, dtype=float)
    if stats is None:
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        stats = (mean, std)
    mean, std = stats
    if std == 0.0:
        return np.zeros_like(values, dtype=float), stats
    return (values - mean) / std, stats


def assemble_features(
    sparse_block: sparse.csr_matrix,
    row_ids: Sequence[str],
    flags: FeatureFlags,
    context_scores: Optional[ContextScores] = None,
    graphs: Optional[Mapping[str, ConversationGraph]] = None,
    cardinality_stats: Optional[tuple[float, float]] = None,
) -> FeatureMatrix:
    """Append the dense context columns requested by ``flags``.

    The sparse block passes through untouched. Cardinality is z-scored; pass
    ``cardinality_stats`` fitted on the training rows to apply the same
    standardization to held-out rows.
    """
    if sparse_block.shape[0] != len(row_ids):
        raise FeatureError("row_ids do not align with the sparse block")
    columns: list[np.ndarray] = []
    names: list[str] = []
    if flags.use_context_scores:
        if context_scores is None:
            raise FeatureError("use_context_scores set but no scores provided")
        missing = sorted(i for i in row_ids if i not in context_scores)
        if missing:
            raise FeatureError(f"missing context scores for: {', '.join(missing)}")
        pairs = np.array([context_scores.get(i) for i in row_ids], dtype=float)
        columns.extend([pairs[:, 0], pairs[:, 1]])
        names.extend(["constructiveness", "toxicity"])
    if flags.use_cardinality or flags.use_topology:
        if graphs is None:
            raise FeatureError("cardinality/topology flags set but no graphs provided")
        missing = sorted(i for i in row_ids if i not in graphs)
        if missing:
            raise FeatureError(f"missing graphs for: {', '.join(missing)}")
    if flags.use_cardinality:
        raw = np.array([graphs[i].cardinality for i in row_ids], dtype=float)
        z, cardinality_stats = standardize(raw, cardinality_stats)
        columns.append(z)
        names.append("cardinality")
    if flags.use_topology:
        columns.append(
            np.array([1.0 if graphs[i].bidirectional else 0.0 for i in row_ids])
        )
        names.append("bidirectional")
    dense = (
        np.column_stack(columns) if columns else np.zeros((len(row_ids), 0))
    )
    if not np.all(np.isfinite(dense)):
        raise FeatureError("dense context columns contain non-finite values")
    return FeatureMatrix(
        row_ids=tuple(row_ids),
        sparse_block=sparse_block,
        dense_block=dense,
        dense_names=tuple(names),
        cardinality_stats=cardinality_stats if flags.use_cardinality else None,
    )
