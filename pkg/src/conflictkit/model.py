"""Conflict classifier: L2-regularized logistic regression, written out.

The optimizer is full-batch gradient descent on mean log-loss plus an L2
penalty on the weights (never the bias), with step halving whenever a
proposed step would increase the loss. Training is deterministic: the same
(features, labels, hyperparameters) always produce the same model bytes.

Also home to the train/test split, the confusion-matrix evaluation report,
the multi-seed experiment driver, and JSON model persistence.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse

from .corpus import Corpus, ConversationGraph, build_graph
from .features import (
    ContextScores,
    FeatureFlags,
    TopicLexicon,
    VectorizerConfig,
    Vocabulary,
    apply_topic_filter,
    assemble_features,
    conversation_tokens,
    fit_vectorizer,
    transform,
)


class ModelError(ValueError):
    """Bad input to training, prediction, or persistence."""


MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Hyper:
    """Optimizer settings; the defaults are the ones used for every reported run."""

    l2: float = 1.0
    learning_rate: float = 0.5
    max_iterations: int = 1000
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.l2 < 0:
            raise ModelError(f"l2 penalty must be >= 0 (got {self.l2})")
        if self.learning_rate <= 0:
            raise ModelError(f"learning rate must be > 0 (got {self.learning_rate})")
        if self.max_iterations < 1:
            raise ModelError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ModelError("tolerance must be > 0")

    def to_json(self) -> dict:
        return {
            "l2": self.l2,
            "learning_rate": self.learning_rate,
            "max_iterations": self.max_iterations,
            "tolerance": self.tolerance,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Hyper":
        return cls(
            l2=obj["l2"],
            learning_rate=obj["learning_rate"],
            max_iterations=obj["max_iterations"],
            tolerance=obj["tolerance"],
        )


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray  # shape (n_features,)
    bias: float
    hyper: Hyper
    n_iterations: int
    final_loss: float
    converged: bool
    degenerate: bool = False  # single-class training data, bias-only fit
    loss_history: tuple[float, ...] = ()  # loss at init, then after each accepted step

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0])


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_matrix(features) -> sparse.csr_matrix | np.ndarray:
    if sparse.issparse(features):
        mat = features.tocsr()
        if not np.all(np.isfinite(mat.data)):
            raise ModelError("feature matrix contains non-finite values")
        return mat
    mat = np.asarray(features, dtype=float)
    if mat.ndim != 2:
        raise ModelError(f"feature matrix must be 2-d (got shape {mat.shape})")
    if not np.all(np.isfinite(mat)):
        raise ModelError("feature matrix contains non-finite values")
    return mat


def loss_value(
    features, labels: np.ndarray, weights: np.ndarray, bias: float, l2: float
) -> float:
    """Mean log-loss plus (l2/2) * ||w||^2; the bias is not penalized."""
    z = features @ weights + bias
    # per-sample loss = softplus(z) - y*z, stable via logaddexp
    data_term = float(np.mean(np.logaddexp(0.0, z) - labels * z))
    return data_term + 0.5 * l2 * float(weights @ weights)


def loss_gradient(
    features, labels: np.ndarray, weights: np.ndarray, bias: float, l2: float
) -> tuple[np.ndarray, float]:
    """Gradient of ``loss_value`` with respect to (weights, bias)."""
    n = features.shape[0]
    residual = sigmoid(features @ weights + bias) - labels
    grad_w = features.T @ residual / n + l2 * weights
    grad_b = float(np.mean(residual))
    return np.asarray(grad_w).ravel(), grad_b


def train(
    features, labels: Sequence[int] | np.ndarray, hyper: Hyper = Hyper()
) -> LogisticModel:
    """Fit the classifier by full-batch gradient descent.

    Stops when the gradient infinity-norm drops below ``hyper.tolerance`` or
    after ``hyper.max_iterations`` accepted steps. A proposed step that would
    raise the loss halves the step size and retries, so the loss sequence
    over accepted steps never increases. Training labels with a single class
    warn and produce a degenerate bias-only model.
    """
    mat = _as_matrix(features)
    y = np.asarray(labels, dtype=float).ravel()
    if mat.shape[0] != y.shape[0]:
        raise ModelError(
            f"row count mismatch: {mat.shape[0]} feature rows, {y.shape[0]} labels"
        )
    if mat.shape[0] == 0:
        raise ModelError("cannot train on an empty feature matrix")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ModelError("labels must be 0 or 1")

    degenerate = len(np.unique(y)) < 2
    if degenerate:
        warnings.warn(
            "training labels contain a single class; fitting a bias-only model",
            RuntimeWarning,
            stacklevel=2,
        )

    n_features = mat.shape[1]
    w = np.zeros(n_features)
    b = 0.0
    loss = loss_value(mat, y, w, b, hyper.l2)
    lr = hyper.learning_rate
    converged = False
    iterations = 0
    history = [loss]

    for _ in range(hyper.max_iterations):
        grad_w, grad_b = loss_gradient(mat, y, w, b, hyper.l2)
        if degenerate:
            grad_w = np.zeros_like(grad_w)
        grad_norm = max(
            float(np.max(np.abs(grad_w))) if n_features else 0.0, abs(grad_b)
        )
        if grad_norm < hyper.tolerance:
            converged = True
            break
        while True:
            w_next = w - lr * grad_w
            b_next = b - lr * grad_b
            loss_next = loss_value(mat, y, w_next, b_next, hyper.l2)
            if loss_next <= loss or lr < 1e-18:
                break
            lr *= 0.5
        if loss_next > loss:
            # step size underflowed without finding a descent step
            converged = True
            break
        w, b, loss = w_next, b_next, loss_next
        iterations += 1
        history.append(loss)

    return LogisticModel(
        weights=w,
        bias=b,
        hyper=hyper,
        n_iterations=iterations,
        final_loss=loss,
        converged=converged,
        degenerate=degenerate,
        loss_history=tuple(history),
    )


def predict_proba(model: LogisticModel, features) -> np.ndarray:
    """Conflict probability per row."""
    mat = _as_matrix(features)
    if mat.shape[1] != model.n_features:
        raise ModelError(
            f"feature width {mat.shape[1]} does not match model width {model.n_features}"
        )
    return sigmoid(mat @ model.weights + model.bias)


def predict(model: LogisticModel, features, threshold: float = 0.5) -> np.ndarray:
    return (predict_proba(model, features) >= threshold).astype(int)


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts and derived rates, conflict as the positive class.

    Rates are fractions in [0, 1]; multiply by 100 for the percent form used
    in reports. ``f1_minority`` is the non-conflict F1, the headline metric
    (non-conflict is the minority class in this setting).
    """

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def precision_conflict(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall_conflict(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1_conflict(self) -> float:
        p, r = self.precision_conflict, self.recall_conflict
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def precision_non_conflict(self) -> float:
        return self.tn / (self.tn + self.fn) if self.tn + self.fn else 0.0

    @property
    def recall_non_conflict(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else 0.0

    @property
    def f1_non_conflict(self) -> float:
        p, r = self.precision_non_conflict, self.recall_non_conflict
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def macro_f1(self) -> float:
        return (self.f1_conflict + self.f1_non_conflict) / 2.0

    @property
    def f1_minority(self) -> float:
        return self.f1_non_conflict

    def to_json(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "n": self.n,
            "accuracy": self.accuracy,
            "f1_conflict": self.f1_conflict,
            "f1_non_conflict": self.f1_non_conflict,
            "macro_f1": self.macro_f1,
        }


def evaluate(y_true: Sequence[int], y_pred: Sequence[int]) -> EvalReport:
    """Confusion-matrix report over binary labels (1 = conflict)."""
    t = np.asarray(y_true).ravel()
    p = np.asarray(y_pred).ravel()
    if t.shape != p.shape:
        raise ModelError(f"label shape mismatch: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise ModelError("cannot evaluate zero predictions")
    for arr, name in ((t, "y_true"), (p, "y_pred")):
        if not np.all(np.isin(arr, (0, 1))):
            raise ModelError(f"{name} must contain only 0 and 1")
    return EvalReport(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
        tn=int(np.sum((t == 0) & (p == 0))),
    )


@dataclass(frozen=True)
class SplitSpec:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int
    ratio: float


def split(
    ids: Sequence[str] | Corpus, ratio: float = 0.2, seed: int = 42
) -> SplitSpec:
    """Deterministic uniform train/test split.

    The test set takes ceil(ratio * N) items of a seeded permutation; the
    rest train. Needs at least 5 items so both sides are non-empty at the
    default ratio. Accepts a corpus directly, splitting its conversation ids.
    """
    if isinstance(ids, Corpus):
        ids = [c.conversation_id for c in ids]
    n = len(ids)
    if n < 5:
        raise ModelError(f"need at least 5 items to split (got {n})")
    if not 0.0 < ratio < 1.0:
        raise ModelError(f"split ratio must be in (0, 1) (got {ratio})")
    if len(set(ids)) != n:
        raise ModelError("split ids must be unique")
    n_test = math.ceil(ratio * n)
    perm = np.random.default_rng(seed).permutation(n)
    test = tuple(ids[i] for i in perm[:n_test])
    train_part = tuple(ids[i] for i in perm[n_test:])
    return SplitSpec(train_ids=train_part, test_ids=test, seed=seed, ratio=ratio)


@dataclass(frozen=True)
class TrainedPipeline:
    """Everything needed to score unseen conversations: vocabulary, feature
    switches, standardization constants, and the fitted model."""

    model: LogisticModel
    vocabulary: Vocabulary
    flags: FeatureFlags
    cardinality_stats: Optional[tuple[float, float]]
    metadata: dict = field(default_factory=dict)


def featurize(
    corpus: Corpus,
    ids: Sequence[str],
    flags: FeatureFlags,
    vocabulary: Optional[Vocabulary] = None,
    vectorizer_config: VectorizerConfig = VectorizerConfig(),
    context_scores: Optional[ContextScores] = None,
    graphs: Optional[Mapping[str, ConversationGraph]] = None,
    cardinality_stats: Optional[tuple[float, float]] = None,
):
    """Build the feature matrix for the given conversation ids.

    With ``vocabulary`` omitted the vectorizer is fitted on exactly these
    ids (the training side); passing a fitted vocabulary (and the training
    cardinality stats) featurizes evaluation rows without leakage.
    """
    docs = [conversation_tokens(corpus.get(cid), flags.scope) for cid in ids]
    if vocabulary is None:
        vocabulary = fit_vectorizer(docs, vectorizer_config)
    tfidf = transform(docs, vocabulary)
    if flags.use_topology or flags.use_cardinality:
        if graphs is None:
            graphs = {cid: build_graph(corpus.get(cid)) for cid in ids}
    matrix = assemble_features(
        tfidf,
        list(ids),
        flags,
        context_scores=context_scores,
        graphs=graphs,
        cardinality_stats=cardinality_stats,
    )
    return matrix, vocabulary


def train_pipeline(
    corpus: Corpus,
    ids: Sequence[str],
    labels: Sequence[int],
    flags: FeatureFlags,
    hyper: Hyper = Hyper(),
    vectorizer_config: VectorizerConfig = VectorizerConfig(),
    context_scores: Optional[ContextScores] = None,
    metadata: Optional[dict] = None,
) -> TrainedPipeline:
    """Fit vocabulary and classifier on the given conversations."""
    matrix, vocabulary = featurize(
        corpus, ids, flags, vectorizer_config=vectorizer_config, context_scores=context_scores
    )
    model = train(matrix.combined(), labels, hyper)
    return TrainedPipeline(
        model=model,
        vocabulary=vocabulary,
        flags=flags,
        cardinality_stats=matrix.cardinality_stats,
        metadata=dict(metadata or {}),
    )


def pipeline_predict(
    pipeline: TrainedPipeline,
    corpus: Corpus,
    ids: Sequence[str],
    context_scores: Optional[ContextScores] = None,
) -> np.ndarray:
    """Conflict probabilities for conversations under a fitted pipeline."""
    matrix, _ = featurize(
        corpus,
        ids,
        pipeline.flags,
        vocabulary=pipeline.vocabulary,
        context_scores=context_scores,
        cardinality_stats=pipeline.cardinality_stats,
    )
    return predict_proba(pipeline.model, matrix.combined())


def save_model(pipeline: TrainedPipeline, path: str | Path) -> None:
    """Write the pipeline to versioned JSON; ``load_model`` restores it exactly."""
    vocab = pipeline.vocabulary
    ordered = vocab.ordered_terms
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "vocabulary": {
            "terms": ordered,
            "document_frequencies": [vocab.document_frequencies[t] for t in ordered],
            "idf": [vocab.idf(t) for t in ordered],
            "n_documents": vocab.n_documents,
            "config": {
                "ngram_range": list(vocab.config.ngram_range),
                "lowercase": vocab.config.lowercase,
                "min_df_unigram": vocab.config.min_df_unigram,
                "min_df_bigram": vocab.config.min_df_bigram,
            },
        },
        "weights": pipeline.model.weights.tolist(),
        "bias": pipeline.model.bias,
        "hyper": pipeline.model.hyper.to_json(),
        "training": {
            "n_iterations": pipeline.model.n_iterations,
            "final_loss": pipeline.model.final_loss,
            "converged": pipeline.model.converged,
            "degenerate": pipeline.model.degenerate,
        },
        "flags": {
            "scope": pipeline.flags.scope,
            "use_context_scores": pipeline.flags.use_context_scores,
            "use_cardinality": pipeline.flags.use_cardinality,
            "use_topology": pipeline.flags.use_topology,
        },
        "cardinality_stats": list(pipeline.cardinality_stats)
        if pipeline.cardinality_stats
        else None,
        "metadata": pipeline.metadata,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedPipeline:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file is not valid JSON: {exc}") from None
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelError(f"unsupported model format version: {version!r}")
    vocab_obj = payload["vocabulary"]
    cfg = vocab_obj["config"]
    config = VectorizerConfig(
        ngram_range=tuple(cfg["ngram_range"]),
        lowercase=cfg["lowercase"],
        min_df_unigram=cfg["min_df_unigram"],
        min_df_bigram=cfg["min_df_bigram"],
    )
    terms = vocab_obj["terms"]
    dfs = vocab_obj["document_frequencies"]
    vocabulary = Vocabulary(
        terms={t: i for i, t in enumerate(terms)},
        document_frequencies=dict(zip(terms, dfs)),
        n_documents=vocab_obj["n_documents"],
        config=config,
    )
    weights = np.asarray(payload["weights"], dtype=float)
    if weights.shape[0] < len(terms):
        raise ModelError("model weights are narrower than the stored vocabulary")
    flags_obj = payload["flags"]
    flags = FeatureFlags(
        scope=flags_obj["scope"],
        use_context_scores=flags_obj["use_context_scores"],
        use_cardinality=flags_obj["use_cardinality"],
        use_topology=flags_obj["use_topology"],
    )
    training = payload.get("training", {})
    model = LogisticModel(
        weights=weights,
        bias=payload["bias"],
        hyper=Hyper.from_json(payload["hyper"]),
        n_iterations=training.get("n_iterations", 0),
        final_loss=training.get("final_loss", float("nan")),
        converged=training.get("converged", True),
        degenerate=training.get("degenerate", False),
    )
    stats = payload.get("cardinality_stats")
    return TrainedPipeline(
        model=model,
        vocabulary=vocabulary,
        flags=flags,
        cardinality_stats=tuple(stats) if stats else None,
        metadata=payload.get("metadata", {}),
    )


DEFAULT_SEEDS = (42, 43, 44)


@dataclass(frozen=True)
class ExperimentConfig:
    flags: FeatureFlags = FeatureFlags()
    dataset: int = 1  # 1 = full corpus, 2 = topic-filtered text
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    ratio: float = 0.2
    hyper: Hyper = Hyper()
    vectorizer: VectorizerConfig = VectorizerConfig()

    def __post_init__(self) -> None:
        if self.dataset not in (1, 2):
            raise ModelError(f"dataset must be 1 or 2 (got {self.dataset})")
        if not self.seeds:
            raise ModelError("need at least one seed")

    @property
    def label(self) -> str:
        return f"LR {self.flags.label()}"


@dataclass(frozen=True)
class SeedResult:
    seed: int
    report: EvalReport
    n_train: int
    n_test: int
    vocabulary_size: int


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    per_seed: tuple[SeedResult, ...]

    def mean(self, metric: str) -> float:
        return float(
            np.mean([getattr(r.report, metric) for r in self.per_seed])
        )

    @property
    def mean_f1_minority(self) -> float:
        return self.mean("f1_minority")

    @property
    def mean_f1_conflict(self) -> float:
        return self.mean("f1_conflict")

    @property
    def mean_macro_f1(self) -> float:
        return self.mean("macro_f1")

    @property
    def mean_accuracy(self) -> float:
        return self.mean("accuracy")


def run_experiment(
    corpus: Corpus,
    config: ExperimentConfig = ExperimentConfig(),
    context_scores: Optional[ContextScores] = None,
    lexicon: Optional[TopicLexicon] = None,
) -> ExperimentResult:
    """Split / featurize / train / evaluate once per seed.

    The vectorizer and standardization constants are fitted on the training
    side of each split only. Dataset 2 removes topic-lexicon terms from the
    text before any featurization, which requires ``lexicon``.
    """
    if config.dataset == 2:
        if lexicon is None:
            raise ModelError("dataset 2 requires a topic lexicon")
        corpus = apply_topic_filter(corpus, lexicon)
    labeled = [c.conversation_id for c in corpus if c.conversation_id in corpus.gold]
    if len(labeled) < 5:
        raise ModelError(
            f"need at least 5 gold-labeled conversations (got {len(labeled)})"
        )
    if config.flags.use_context_scores and context_scores is None:
        raise ModelError("feature flags request context scores but none were given")

    results = []
    for seed in config.seeds:
        spec = split(labeled, ratio=config.ratio, seed=seed)
        y_train = [int(corpus.gold[cid]) for cid in spec.train_ids]
        y_test = [int(corpus.gold[cid]) for cid in spec.test_ids]
        pipeline = train_pipeline(
            corpus,
            spec.train_ids,
            y_train,
            config.flags,
            hyper=config.hyper,
            vectorizer_config=config.vectorizer,
            context_scores=context_scores,
            metadata={"seed": seed, "dataset": config.dataset},
        )
        probs = pipeline_predict(pipeline, corpus, spec.test_ids, context_scores)
        report = evaluate(y_test, (probs >= 0.5).astype(int))
        results.append(
            SeedResult(
                seed=seed,
                report=report,
                n_train=len(spec.train_ids),
                n_test=len(spec.test_ids),
                vocabulary_size=len(pipeline.vocabulary.terms),
            )
        )
    return ExperimentResult(config=config, per_seed=tuple(results))
