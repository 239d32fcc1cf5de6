"""Command-line entry points.

One subcommand per pipeline stage: ingest/validate, graph export, topic
terms, corpus filtering, training, evaluation, the multi-seed experiment,
cube scoring, agreement (kappa), the rank test, topic summaries, message
time series, and the annotation service. Report-producing commands write
delimited data and render a PNG figure alongside it (suppress with
--no-figures).

Exit codes: 0 on success, 1 on validation or data errors, 2 on usage
errors. All outputs are deterministic for identical inputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import agonism, corpus as corpus_mod, features, model as model_mod, plots, stats
from .schema import AnnotationRecord, load_annotations

DATA_DIR_ENV = "CONFLICTKIT_DATA_DIR"

_SCOPES = {"last": features.LAST_MESSAGE, "all": features.ALL_MESSAGES}


def _resolve(path: str) -> Path:
    """Resolve an input path, falling back to the default data directory."""
    p = Path(path)
    if p.exists():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base:
        candidate = Path(base) / path
        if candidate.exists():
            return candidate
    return p


def _read_corpus(path: str) -> corpus_mod.ParseResult:
    resolved = _resolve(path)
    with resolved.open("r", encoding="utf-8") as fh:
        return corpus_mod.parse_corpus(fh)


def _require_corpus(path: str) -> corpus_mod.Corpus:
    result = _read_corpus(path)
    for issue in result.issues:
        print(f"warning: {issue}", file=sys.stderr)
    if len(result.corpus) == 0:
        raise corpus_mod.CorpusError(f"no valid conversations in {path}")
    return result.corpus


def _read_annotations(path: str) -> list[AnnotationRecord]:
    with _resolve(path).open("r", encoding="utf-8") as fh:
        return load_annotations(fh)


def _load_lexicon(path: Optional[str]) -> features.TopicLexicon:
    if path is None:
        payload = (
            resources.files("conflictkit").joinpath("data/topic_lexicon.json").read_text()
        )
    else:
        payload = _resolve(path).read_text(encoding="utf-8")
    return features.TopicLexicon.from_mapping(json.loads(payload))


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _figure_path(out: Path) -> Path:
    return out.with_suffix(".png")


def _flags_from_args(args: argparse.Namespace) -> features.FeatureFlags:
    return features.FeatureFlags(
        scope=_SCOPES[args.scope],
        use_context_scores=args.use_context_scores,
        use_cardinality=args.use_cardinality,
        use_topology=args.use_topology,
    )


def _context_scores(args: argparse.Namespace) -> Optional[features.ContextScores]:
    if not getattr(args, "context_scores", None):
        return None
    with _resolve(args.context_scores).open("r", encoding="utf-8") as fh:
        return features.load_context_scores(fh)


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


# -- subcommand implementations ------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    result = _read_corpus(args.corpus)
    for issue in result.issues:
        print(f"rejected: {issue}", file=sys.stderr)
    print(
        f"accepted {len(result.corpus)} conversation(s), "
        f"rejected {len(result.issues)} record(s)"
    )
    if args.out:
        with Path(args.out).open("w", encoding="utf-8") as fh:
            for conv in result.corpus:
                fh.write(json.dumps(corpus_mod.conversation_to_record(conv)) + "\n")
        print(f"wrote {args.out}")
    return 0 if result.ok else 1


def cmd_graph(args: argparse.Namespace) -> int:
    cps = _require_corpus(args.corpus)
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for conv in cps:
            graph = corpus_mod.build_graph(conv)
            record = {"conversation_id": conv.conversation_id, **graph.to_export()}
            if args.notify:
                if args.notify in graph.authors:
                    record["notify_origin"] = args.notify
                    record["notified"] = sorted(
                        corpus_mod.notified_authors(graph, args.notify)
                    )
                else:
                    record["notify_origin"] = args.notify
                    record["notified"] = None
            fh.write(json.dumps(record) + "\n")
    print(f"wrote graphs for {len(cps)} conversation(s) to {args.out}")
    return 0


def cmd_topics(args: argparse.Namespace) -> int:
    cps = _require_corpus(args.corpus)
    top = features.ctfidf_top_terms(cps, k=args.top_k)
    rows = [
        (topic, rank, term)
        for topic in sorted(top)
        for rank, term in enumerate(top[topic], start=1)
    ]
    _write_csv(Path(args.out), ("topic", "rank", "term"), rows)
    print(f"wrote top-{args.top_k} terms for {len(top)} topic(s) to {args.out}")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    if not args.annotations and not args.topic_terms:
        raise corpus_mod.CorpusError(
            "nothing to do: pass --annotations and/or --topic-terms"
        )
    cps = _require_corpus(args.corpus)
    total = len(cps)
    if args.annotations:
        records = _read_annotations(args.annotations)
        cps = corpus_mod.filter_agreed(cps, records)
        print(f"agreement filter kept {len(cps)} of {total} conversation(s)")
    if args.topic_terms:
        lexicon = _load_lexicon(args.lexicon)
        cps = features.apply_topic_filter(cps, lexicon)
        print("removed topic-lexicon terms from message tokens")
    with Path(args.out).open("w", encoding="utf-8") as fh:
        for conv in cps:
            fh.write(json.dumps(corpus_mod.conversation_to_record(conv)) + "\n")
    print(f"wrote {len(cps)} conversation(s) to {args.out}")
    return 0


def _gold_ids_labels(cps: corpus_mod.Corpus) -> tuple[list[str], list[int]]:
    ids = [c.conversation_id for c in cps if c.conversation_id in cps.gold]
    return ids, [int(cps.gold[cid]) for cid in ids]


def cmd_train(args: argparse.Namespace) -> int:
    cps = _require_corpus(args.corpus)
    records = _read_annotations(args.annotations)
    cps = corpus_mod.filter_agreed(cps, records)
    if args.dataset == 2:
        cps = features.apply_topic_filter(cps, _load_lexicon(args.lexicon))
    flags = _flags_from_args(args)
    scores = _context_scores(args)
    if flags.use_context_scores and scores is None:
        raise model_mod.ModelError(
            "--use-context-scores requires --context-scores FILE"
        )
    hyper = model_mod.Hyper(
        l2=args.l2,
        learning_rate=args.learning_rate,
        max_iterations=args.max_iterations,
        tolerance=args.tolerance,
    )
    ids, labels = _gold_ids_labels(cps)
    pipeline = model_mod.train_pipeline(
        cps,
        ids,
        labels,
        flags,
        hyper=hyper,
        vectorizer_config=features.VectorizerConfig(min_df_bigram=args.min_df_bigram),
        context_scores=scores,
        metadata={"dataset": args.dataset, "n_train": len(ids)},
    )
    model_mod.save_model(pipeline, args.out)
    print(
        f"trained on {len(ids)} conversation(s): vocabulary {len(pipeline.vocabulary.terms)}, "
        f"{pipeline.model.n_iterations} iteration(s), final loss {pipeline.model.final_loss:.6f}"
    )
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cps = _require_corpus(args.corpus)
    records = _read_annotations(args.annotations)
    cps = corpus_mod.filter_agreed(cps, records)
    pipeline = model_mod.load_model(_resolve(args.model))
    if args.dataset == 2:
        cps = features.apply_topic_filter(cps, _load_lexicon(args.lexicon))
    scores = _context_scores(args)
    ids, labels = _gold_ids_labels(cps)
    probs = model_mod.pipeline_predict(pipeline, cps, ids, scores)
    report = model_mod.evaluate(labels, (probs >= 0.5).astype(int))
    out = Path(args.out)
    _write_csv(
        out,
        ("metric", "value"),
        [
            ("tp", report.tp),
            ("fp", report.fp),
            ("fn", report.fn),
            ("tn", report.tn),
            ("n", report.n),
            ("accuracy", _pct(report.accuracy)),
            ("f1_conflict", _pct(report.f1_conflict)),
            ("f1_non_conflict", _pct(report.f1_non_conflict)),
            ("macro_f1", _pct(report.macro_f1)),
        ],
    )
    print(
        f"n={report.n} accuracy={_pct(report.accuracy)} "
        f"f1_conflict={_pct(report.f1_conflict)} f1_non_conflict={_pct(report.f1_non_conflict)}"
    )
    print(f"wrote {out}")
    if not args.no_figures:
        fig = plots.render_confusion(report, _figure_path(out))
        print(f"wrote {fig}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    cps = _require_corpus(args.corpus)
    records = _read_annotations(args.annotations)
    cps = corpus_mod.filter_agreed(cps, records)
    flags = _flags_from_args(args)
    scores = _context_scores(args)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    datasets = (1, 2) if args.dataset == "both" else (int(args.dataset),)
    lexicon = _load_lexicon(args.lexicon) if 2 in datasets else None

    results: dict[int, model_mod.ExperimentResult] = {}
    per_seed_rows = []
    for dataset in datasets:
        config = model_mod.ExperimentConfig(
            flags=flags,
            dataset=dataset,
            seeds=seeds,
            ratio=args.ratio,
            vectorizer=features.VectorizerConfig(min_df_bigram=args.min_df_bigram),
        )
        result = model_mod.run_experiment(
            cps, config, context_scores=scores, lexicon=lexicon
        )
        results[dataset] = result
        for sr in result.per_seed:
            per_seed_rows.append(
                (
                    config.label,
                    dataset,
                    sr.seed,
                    sr.n_train,
                    sr.n_test,
                    _pct(sr.report.f1_non_conflict),
                    _pct(sr.report.f1_conflict),
                    _pct(sr.report.macro_f1),
                    _pct(sr.report.accuracy),
                )
            )
        print(
            f"dataset {dataset}: mean minority F1 {_pct(result.mean_f1_minority)} "
            f"over seeds {','.join(str(s) for s in seeds)}"
        )

    label = next(iter(results.values())).config.label
    row = [
        label,
        _pct(results[1].mean_f1_minority) if 1 in results else "",
        _pct(results[2].mean_f1_minority) if 2 in results else "",
    ]
    _write_csv(Path(args.out), ("model", "dataset_1", "dataset_2"), [row])
    print(f"wrote {args.out}")
    if args.per_seed:
        _write_csv(
            Path(args.per_seed),
            (
                "model", "dataset", "seed", "n_train", "n_test",
                "f1_non_conflict", "f1_conflict", "macro_f1", "accuracy",
            ),
            per_seed_rows,
        )
        print(f"wrote {args.per_seed}")
    return 0


def _triples_from_file(path: str, logits: bool) -> list[agonism.LikelihoodTriple]:
    triples = []
    with _resolve(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"conversation_id", "toxicity", "constructiveness", "conflict"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise agonism.AgonismError(
                f"triples file needs columns {sorted(required)}"
            )
        for row in reader:
            if logits:
                triples.append(
                    agonism.LikelihoodTriple.from_logits(
                        row["conversation_id"],
                        float(row["toxicity"]),
                        float(row["constructiveness"]),
                        float(row["conflict"]),
                    )
                )
            else:
                triples.append(
                    agonism.LikelihoodTriple(
                        conversation_id=row["conversation_id"],
                        toxicity=float(row["toxicity"]),
                        constructiveness=float(row["constructiveness"]),
                        conflict=float(row["conflict"]),
                    )
                )
    return triples


def _triples_from_model(args: argparse.Namespace, cps: corpus_mod.Corpus):
    """Conflict from the trained model, T/S from raw context scores."""
    pipeline = model_mod.load_model(_resolve(args.model))
    scores = _context_scores(args)
    if scores is None:
        raise agonism.AgonismError("--model scoring requires --context-scores")
    ids = [c.conversation_id for c in cps]
    probs = model_mod.pipeline_predict(pipeline, cps, ids, scores)
    triples = []
    for cid, conflict in zip(ids, probs):
        pair = scores.get(cid)
        if pair is None:
            raise agonism.AgonismError(f"no context scores for {cid!r}")
        constructiveness_logit, toxicity_logit = pair
        triples.append(
            agonism.LikelihoodTriple.from_logits(
                cid, toxicity_logit, constructiveness_logit, float(conflict)
            )
        )
    return triples


def cmd_score(args: argparse.Namespace) -> int:
    thresholds = agonism.ZoneThresholds(
        min_conflict=args.min_conflict,
        min_constructiveness=args.min_constructiveness,
        max_toxicity=args.max_toxicity,
    )
    cps = _require_corpus(args.corpus) if args.corpus else None
    if args.triples:
        triples = _triples_from_file(args.triples, args.logits)
    elif args.model:
        if cps is None:
            raise agonism.AgonismError("--model scoring requires --corpus")
        triples = _triples_from_model(args, cps)
    else:
        raise agonism.AgonismError("pass --triples FILE or --model FILE")
    scored = agonism.score_conversations(triples, thresholds)

    out = Path(args.out)
    rows = [
        (
            s.conversation_id,
            f"{s.triple.toxicity:.6f}",
            f"{s.triple.constructiveness:.6f}",
            f"{s.triple.conflict:.6f}",
            f"{s.scores.p_agonistic:.6f}",
            f"{s.scores.p_unproductive:.6f}",
            f"{s.scores.p_small_talk:.6f}",
            "true" if s.in_zone else "false",
        )
        for s in scored
    ]
    _write_csv(out, ("conversation_id", "T", "S", "C", "P_A", "P_U", "P_S", "in_zone"), rows)
    in_zone = sum(1 for s in scored if s.in_zone)
    print(f"scored {len(scored)} conversation(s), {in_zone} in the agonism zone")
    print(f"wrote {out}")

    if args.top_k:
        graphs = None
        if args.bidirectional_only:
            if cps is None:
                raise agonism.AgonismError("--bidirectional-only requires --corpus")
            graphs = {
                c.conversation_id: corpus_mod.build_graph(c) for c in cps
            }
        top = agonism.top_k_by_score(
            scored,
            args.rank_by,
            args.top_k,
            bidirectional_only=args.bidirectional_only,
            graphs=graphs,
        )
        attr = {"P_A": "p_agonistic", "P_U": "p_unproductive", "P_S": "p_small_talk"}[
            args.rank_by
        ]
        print(f"top {len(top)} by {args.rank_by}:")
        for rank, s in enumerate(top, start=1):
            print(f"  {rank}. {s.conversation_id} {getattr(s.scores, attr):.6f}")

    if args.zone_series:
        if cps is None:
            raise agonism.AgonismError("--zone-series requires --corpus")
        series = agonism.zone_ratio_timeseries(cps, scored, bucket=args.bucket)
        series_rows = [
            (topic, day.isoformat(), n, f"{ratio:.6f}")
            for topic, points in series.items()
            for day, n, ratio in points
        ]
        _write_csv(
            Path(args.zone_series),
            ("topic", "bucket_start", "n", "in_zone_ratio"),
            series_rows,
        )
        print(f"wrote {args.zone_series}")

    if not args.no_figures:
        fig = plots.render_cube(scored, _figure_path(out), thresholds)
        print(f"wrote {fig}")
    return 0


def cmd_kappa(args: argparse.Namespace) -> int:
    records = _read_annotations(args.annotations)
    table = stats.agreement_table(records)
    rows = [
        (r.feature, f"{r.kappa:.4f}" if r.kappa is not None else "", r.n_pairs)
        for r in table.rows
    ]
    _write_csv(Path(args.out), ("feature", "kappa", "n_pairs"), rows)
    for r in table.rows:
        shown = f"{r.kappa:.4f}" if r.kappa is not None else "undefined"
        print(f"{r.feature}: kappa={shown} over {r.n_pairs} pair(s)")
    print(f"wrote {args.out}")
    return 0


def cmd_kw(args: argparse.Namespace) -> int:
    if args.values:
        groups: dict[str, list[float]] = {}
        with _resolve(args.values).open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"group", "value"}.issubset(
                reader.fieldnames
            ):
                raise stats.StatsError("values file needs columns group,value")
            for row in reader:
                groups.setdefault(row["group"], []).append(float(row["value"]))
        named = sorted(groups.items())
    else:
        if not args.corpus or not args.annotations:
            raise stats.StatsError(
                "pass --values FILE, or a corpus with --annotations"
            )
        cps = _require_corpus(args.corpus)
        records = _read_annotations(args.annotations)
        cps = corpus_mod.filter_agreed(cps, records)
        topic_of = {c.conversation_id: c.topic for c in cps}
        named = stats.conflict_rates_by_group(cps, topic_of)
    if len(named) < 2:
        raise stats.StatsError(f"need at least two groups (got {len(named)})")
    result = stats.kruskal_wallis([values for _, values in named])
    print(
        f"H = {result.h:.6f}, p = {result.p_value:.6g} "
        f"(df={result.df}, N={result.n}, ties={'yes' if result.tie_corrected else 'no'})"
    )
    if args.out:
        _write_csv(
            Path(args.out),
            ("h", "p_value", "df", "n", "tie_corrected", "groups"),
            [
                (
                    f"{result.h:.10g}",
                    f"{result.p_value:.10g}",
                    result.df,
                    result.n,
                    "true" if result.tie_corrected else "false",
                    ";".join(name for name, _ in named),
                )
            ],
        )
        print(f"wrote {args.out}")
    return 0


def cmd_summary(args: argparse.Namespace) -> int:
    cps = _require_corpus(args.corpus)
    records = _read_annotations(args.annotations)
    cps = corpus_mod.filter_agreed(cps, records)
    report = stats.topic_summary(cps, records)
    out = Path(args.out)

    def _row(r: stats.TopicSummaryRow) -> tuple:
        return (
            r.topic,
            r.n,
            f"{r.conflict_rate:.4f}",
            f"{r.sarcasm_rate:.4f}",
            f"{r.metaphor_rate:.4f}",
            f"{r.directive_rate:.4f}",
            f"{r.target_individual_rate:.4f}",
        )

    _write_csv(
        out,
        (
            "topic", "n", "conflict_rate", "sarcasm_rate",
            "metaphor_rate", "directive_rate", "target_individual_rate",
        ),
        [_row(r) for r in report.rows] + [_row(report.total)],
    )
    print(f"summarized {report.total.n} conversation(s) over {len(report.rows)} topic(s)")
    print(f"wrote {out}")
    if not args.no_figures:
        fig = plots.render_topic_summary(report, _figure_path(out))
        print(f"wrote {fig}")
    return 0


def cmd_timeseries(args: argparse.Namespace) -> int:
    cps = _require_corpus(args.corpus)
    series = stats.topic_timeseries(cps, bucket=args.bucket)
    out = Path(args.out)
    rows = [
        (topic, day.isoformat(), count)
        for topic in sorted(series)
        for day, count in series[topic]
    ]
    _write_csv(out, ("topic", "bucket_start", "count"), rows)
    print(f"wrote {len(rows)} bucket row(s) for {len(series)} topic(s) to {out}")
    if not args.no_figures:
        fig = plots.render_sparklines(series, _figure_path(out))
        print(f"wrote {fig}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import AnnotationService, create_app

    cps = _require_corpus(args.corpus)
    annotators = [a.strip() for a in args.annotators.split(",") if a.strip()]
    service = AnnotationService(cps, annotators, log_path=args.log)
    app = create_app(service, ui_dir=args.ui_dir)
    import uvicorn

    print(f"serving {len(cps)} conversation(s) for {len(annotators)} annotator(s)")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- parser ----------------------------------------------------------------


def _add_feature_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scope", choices=("last", "all"), default="all",
                   help="text scope: the last message or the whole thread")
    p.add_argument("--use-context-scores", action="store_true",
                   help="append constructiveness/toxicity columns")
    p.add_argument("--use-cardinality", action="store_true",
                   help="append the standardized author-count column")
    p.add_argument("--use-topology", action="store_true",
                   help="append the mutual-reply indicator column")
    p.add_argument("--context-scores", metavar="FILE",
                   help="CSV of conversation_id,constructiveness,toxicity raw scores")
    p.add_argument("--min-df-bigram", type=int, default=2,
                   help="minimum document frequency for bigrams (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conflictkit",
        description="detect and characterize conflict in threaded conversations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a conversation file")
    p.add_argument("corpus", help="conversations JSONL")
    p.add_argument("--out", help="write accepted conversations (normalized JSONL)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("graph", help="export reply graphs")
    p.add_argument("corpus")
    p.add_argument("--out", required=True, help="graphs JSONL")
    p.add_argument("--notify", metavar="AUTHOR",
                   help="include the notification set from this author")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("topics", help="characteristic terms per topic")
    p.add_argument("corpus")
    p.add_argument("--out", required=True, help="CSV of topic,rank,term")
    p.add_argument("--top-k", type=int, default=10)
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("filter", help="agreement and/or topic-term filtering")
    p.add_argument("corpus")
    p.add_argument("--out", required=True, help="filtered corpus JSONL")
    p.add_argument("--annotations", help="keep only conversations both annotators agree on")
    p.add_argument("--topic-terms", action="store_true",
                   help="delete topic-lexicon terms from message tokens")
    p.add_argument("--lexicon", help="topic lexicon JSON (default: packaged)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="fit the conflict classifier")
    p.add_argument("corpus")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--dataset", type=int, choices=(1, 2), default=1,
                   help="2 removes topic-lexicon terms first")
    p.add_argument("--lexicon")
    _add_feature_flags(p)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model against gold labels")
    p.add_argument("corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True, help="metrics CSV")
    p.add_argument("--dataset", type=int, choices=(1, 2), default=1)
    p.add_argument("--lexicon")
    p.add_argument("--context-scores", metavar="FILE")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="multi-seed split/train/evaluate")
    p.add_argument("corpus")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True, help="summary CSV (one row per model)")
    p.add_argument("--per-seed", help="CSV of per-seed metrics")
    p.add_argument("--dataset", choices=("1", "2", "both"), default="1")
    p.add_argument("--lexicon")
    p.add_argument("--seeds", default="42,43,44")
    p.add_argument("--ratio", type=float, default=0.2)
    _add_feature_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("score", help="cube scores and zone classification")
    p.add_argument("--corpus")
    p.add_argument("--triples", help="CSV of conversation_id,toxicity,constructiveness,conflict")
    p.add_argument("--logits", action="store_true",
                   help="toxicity/constructiveness in --triples are raw scores")
    p.add_argument("--model", help="score conflict with this saved model")
    p.add_argument("--context-scores", metavar="FILE")
    p.add_argument("--out", required=True, help="scored CSV")
    p.add_argument("--min-conflict", type=float, default=0.5)
    p.add_argument("--min-constructiveness", type=float, default=0.5)
    p.add_argument("--max-toxicity", type=float, default=0.5)
    p.add_argument("--top-k", type=int)
    p.add_argument("--rank-by", choices=("P_A", "P_U", "P_S"), default="P_A")
    p.add_argument("--bidirectional-only", action="store_true")
    p.add_argument("--zone-series", help="CSV of per-topic in-zone ratios over time")
    p.add_argument("--bucket", choices=("day", "week"), default="week")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("kappa", help="inter-annotator agreement per feature")
    p.add_argument("annotations", help="annotation records JSONL")
    p.add_argument("--out", required=True, help="CSV of feature,kappa,n_pairs")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("kw", help="rank test across groups")
    p.add_argument("corpus", nargs="?")
    p.add_argument("--annotations")
    p.add_argument("--values", help="CSV of group,value observations")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kw)

    p = sub.add_parser("summary", help="per-topic conversation counts and rates")
    p.add_argument("corpus")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("timeseries", help="message counts per topic over time")
    p.add_argument("corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--bucket", choices=("day", "week"), default="day")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_timeseries)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("corpus")
    p.add_argument("--annotators", required=True, help="comma-separated annotator ids")
    p.add_argument("--log", help="append-only event log (replayed on restart)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", help="static annotation UI to mount at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
