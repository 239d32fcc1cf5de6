"""Agreement statistics, the rank test with its chi-square tail, and the
per-topic reporting helpers."""

import logging
import math
from datetime import date

import pytest
from scipy import stats as scipy_stats

from conflictkit.corpus import filter_agreed
from conflictkit.stats import (
    KruskalWallisResult,
    StatsError,
    agreement_table,
    chi_square_sf,
    cohen_kappa,
    conflict_rates_by_group,
    kruskal_wallis,
    topic_summary,
    topic_timeseries,
)

from conftest import corpus_from, make_annotation, make_thread, valid_no_answers


def _labels_from_table(tn, fp, fn, tp):
    a = [0] * tn + [0] * fp + [1] * fn + [1] * tp
    b = [0] * tn + [1] * fp + [0] * fn + [1] * tp
    return a, b


# -- kappa -------------------------------------------------------------------


def test_kappa_reference_table_is_exact():
    a, b = _labels_from_table(20, 5, 10, 15)
    assert cohen_kappa(a, b) == 0.4  # exact, not approx


def test_kappa_perfect_and_chance():
    assert cohen_kappa([0, 1, 0, 1], [0, 1, 0, 1]) == 1.0
    # independent-looking split: agreement equals chance, kappa 0
    assert cohen_kappa([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0


def test_kappa_degenerate_cases():
    # both constant on the same label: observed = expected = 1
    assert cohen_kappa(["x"] * 5, ["x"] * 5) == 1.0
    # one annotator constant: chance term shrinks, kappa stays defined
    assert cohen_kappa([1, 1, 1], [1, 1, 0]) == 0.0


def test_kappa_validation():
    with pytest.raises(StatsError):
        cohen_kappa([1, 2], [1])
    with pytest.raises(StatsError):
        cohen_kappa([], [])


def test_kappa_symmetry_and_relabeling():
    import random

    rng = random.Random(1234)
    mapping = {0: "no", 1: "yes", 2: "maybe"}
    for _ in range(100):
        n = rng.randint(2, 40)
        a = [rng.randint(0, 2) for _ in range(n)]
        b = [rng.randint(0, 2) for _ in range(n)]
        k_ab = cohen_kappa(a, b)
        k_ba = cohen_kappa(b, a)
        assert k_ab == k_ba
        relabeled = cohen_kappa([mapping[x] for x in a], [mapping[x] for x in b])
        assert relabeled == k_ab
        if k_ab is not None:
            assert -1.0 <= k_ab <= 1.0


def test_kappa_matches_sklearn_formula():
    # spot-check against the standard confusion-matrix formula on floats
    import random

    rng = random.Random(77)
    for _ in range(30):
        n = rng.randint(3, 50)
        a = [rng.randint(0, 1) for _ in range(n)]
        b = [rng.randint(0, 1) for _ in range(n)]
        p_o = sum(x == y for x, y in zip(a, b)) / n
        p_e = sum(
            (a.count(k) / n) * (b.count(k) / n) for k in set(a) | set(b)
        )
        got = cohen_kappa(a, b)
        if p_e == 1.0:
            assert got in (1.0, None)
        else:
            assert got == pytest.approx((p_o - p_e) / (1 - p_e), abs=1e-12)


# -- agreement table ---------------------------------------------------------


def _pair(cid, conflict_a=True, conflict_b=True, **overrides_both):
    a = make_annotation(cid, "ann1", conflict=conflict_a, **overrides_both)
    b = make_annotation(cid, "ann2", conflict=conflict_b, **overrides_both)
    return [a, b]


def test_agreement_table_feature_order():
    table = agreement_table(_pair("c1"))
    assert [r.feature for r in table.rows][:10] == [
        "conflict",
        "target_individual",
        "external",
        "context_conversational",
        "internal",
        "strategy_sarcasm",
        "strategy_explicit_directives",
        "strategy_associations_metaphors",
        "context_media",
        "context_cultural",
    ]


def test_agreement_parent_gating():
    # two conversations: one where both say conflict, one where they disagree.
    # Follow-up features must only count the first pair.
    records = _pair("c1") + _pair("c2", conflict_a=True, conflict_b=False)
    table = agreement_table(records).by_feature()
    assert table["conflict"].n_pairs == 2
    assert table["target_individual"].n_pairs == 1
    assert table["internal"].n_pairs == 1


def test_agreement_followup_needs_both_affirmative():
    a = make_annotation("c1", "ann1", conflict=False)
    b = make_annotation("c1", "ann2", conflict=False)
    table = agreement_table([a, b]).by_feature()
    assert table["conflict"].n_pairs == 1
    assert table["conflict"].kappa == 1.0
    assert table["target_individual"].n_pairs == 0
    assert table["target_individual"].kappa is None


def test_agreement_skips_unpaired(caplog):
    records = _pair("c1") + [make_annotation("c2", "ann1")]
    with caplog.at_level(logging.WARNING):
        table = agreement_table(records)
    assert table.by_feature()["conflict"].n_pairs == 1
    assert any("c2" in r.message for r in caplog.records)


def test_agreement_hand_computed_kappa():
    # 4 paired conversations on conflict: tables a=(y,y,n,n), b=(y,n,y,n)
    records = (
        _pair("c1", True, True)
        + _pair("c2", True, False)
        + _pair("c3", False, True)
        + _pair("c4", False, False)
    )
    table = agreement_table(records).by_feature()
    assert table["conflict"].kappa == 0.0  # observed 1/2 = chance 1/2


def test_agreement_multi_select_member_features():
    both = {"strategies": ["sarcasm", "explicit_directives"]}
    records = [
        make_annotation("c1", "ann1", **both),
        make_annotation("c1", "ann2", strategies=["sarcasm"]),
    ]
    table = agreement_table(records).by_feature()
    assert table["strategy_sarcasm"].kappa == 1.0
    # one side selected directives, the other did not: single pair, disagree
    assert table["strategy_explicit_directives"].n_pairs == 1
    assert table["strategy_explicit_directives"].kappa == 0.0


# -- chi-square tail ---------------------------------------------------------


def test_chi_square_sf_matches_scipy_on_grid():
    for df in (1, 2, 3, 5, 10, 30):
        for x in (0.01, 0.5, 1.0, 2.4, 7.2, 15.0, 40.0, 120.0):
            mine = chi_square_sf(x, df)
            ref = float(scipy_stats.chi2.sf(x, df))
            assert mine == pytest.approx(ref, rel=1e-10, abs=1e-300)


def test_chi_square_sf_edges():
    assert chi_square_sf(0.0, 3) == 1.0
    assert chi_square_sf(1e6, 2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(StatsError):
        chi_square_sf(-1.0, 2)
    with pytest.raises(StatsError):
        chi_square_sf(1.0, 0)


# -- Kruskal-Wallis ----------------------------------------------------------


def test_kw_three_group_reference():
    result = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    assert result.h == pytest.approx(7.2, abs=1e-9)
    assert result.df == 2
    assert result.p_value == pytest.approx(float(scipy_stats.chi2.sf(7.2, 2)), rel=1e-9)
    assert not result.tie_corrected


def test_kw_two_group_reference():
    result = kruskal_wallis([[1, 2], [3, 4]])
    assert result.h == pytest.approx(2.4, abs=1e-9)
    assert result.df == 1
    assert result.group_sizes == (2, 2)


def test_kw_matches_scipy():
    import random

    rng = random.Random(99)
    for _ in range(25):
        k = rng.randint(2, 4)
        groups = [
            [rng.choice([0.0, 1.0, 2.5, 3.5]) for _ in range(rng.randint(2, 12))]
            for _ in range(k)
        ]
        pooled = [v for g in groups for v in g]
        if min(pooled) == max(pooled):
            continue
        mine = kruskal_wallis(groups)
        ref_h, ref_p = scipy_stats.kruskal(*groups)
        assert mine.h == pytest.approx(float(ref_h), rel=1e-9, abs=1e-12)
        assert mine.p_value == pytest.approx(float(ref_p), rel=1e-9, abs=1e-12)


def test_kw_monotone_transform_invariance():
    import random

    rng = random.Random(5)
    for _ in range(50):
        groups = [
            [rng.uniform(0, 10) for _ in range(rng.randint(3, 8))] for _ in range(3)
        ]
        base = kruskal_wallis(groups)
        squeezed = kruskal_wallis([[math.atan(v) for v in g] for g in groups])
        assert squeezed.h == pytest.approx(base.h, abs=1e-9)
        assert base.h >= 0.0


def test_kw_all_identical_values():
    result = kruskal_wallis([[2.0, 2.0], [2.0, 2.0, 2.0]])
    assert result == KruskalWallisResult(
        h=0.0, p_value=1.0, df=1, n=5, group_sizes=(2, 3), tie_corrected=True
    )


def test_kw_tie_correction_flagged():
    result = kruskal_wallis([[1, 1, 2], [2, 3, 3]])
    assert result.tie_corrected
    ref_h, _ = scipy_stats.kruskal([1, 1, 2], [2, 3, 3])
    assert result.h == pytest.approx(float(ref_h), rel=1e-12)


def test_kw_binary_indicator_groups():
    # conflict-rate style input: 0/1 indicators, heavy ties
    groups = [[1, 1, 1, 0], [0, 0, 1, 0], [0, 0, 0, 0]]
    mine = kruskal_wallis(groups)
    ref_h, ref_p = scipy_stats.kruskal(*groups)
    assert mine.h == pytest.approx(float(ref_h), rel=1e-12)
    assert mine.p_value == pytest.approx(float(ref_p), rel=1e-12)


def test_kw_validation():
    with pytest.raises(StatsError):
        kruskal_wallis([[1, 2, 3]])
    with pytest.raises(StatsError):
        kruskal_wallis([[1, 2], []])
    with pytest.raises(StatsError):
        kruskal_wallis([[1], [2]])
    with pytest.raises(StatsError):
        kruskal_wallis([[1, float("nan")], [2, 3]])


# -- topic reporting ---------------------------------------------------------


def _summary_fixture():
    # parks: 2 conversations, 1 conflict; transit: 1 conversation, conflict
    corpus = corpus_from([
        make_thread("p1", ["a b", "c d", "e f"], topic="parks"),
        make_thread("p2", ["g h", "i j", "k l"], topic="parks"),
        make_thread("t1", ["m n", "o p", "q r"], topic="transit"),
    ])
    annotations = [
        make_annotation("p1", "ann1", conflict=True, strategies=["sarcasm"]),
        make_annotation("p1", "ann2", conflict=True, strategies=["explicit_directives"]),
        make_annotation("p2", "ann1", conflict=False),
        make_annotation("p2", "ann2", conflict=False),
        make_annotation("t1", "ann1", conflict=True, targets=["individual"]),
        make_annotation("t1", "ann2", conflict=True, targets=["individual"]),
    ]
    return corpus, annotations


def test_topic_summary_hand_counts():
    corpus, annotations = _summary_fixture()
    report = topic_summary(corpus, annotations)
    rows = {r.topic: r for r in report.rows}
    assert rows["parks"].n == 2
    assert rows["parks"].conflict_rate == 0.5
    assert rows["parks"].sarcasm_rate == 0.5  # any-annotator union
    assert rows["parks"].directive_rate == 0.5
    assert rows["transit"].n == 1
    assert rows["transit"].conflict_rate == 1.0
    assert rows["transit"].target_individual_rate == 1.0
    assert report.total.n == 3
    assert report.total.conflict_rate == pytest.approx(2 / 3)


def test_topic_summary_rates_times_n_integral():
    corpus, annotations = _summary_fixture()
    report = topic_summary(corpus, annotations)
    for row in list(report.rows) + [report.total]:
        for rate in (
            row.conflict_rate,
            row.sarcasm_rate,
            row.metaphor_rate,
            row.directive_rate,
            row.target_individual_rate,
        ):
            assert (rate * row.n) == pytest.approx(round(rate * row.n), abs=1e-9)


def test_topic_summary_ordering():
    corpus, annotations = _summary_fixture()
    report = topic_summary(corpus, annotations)
    assert [r.topic for r in report.rows] == ["parks", "transit"]  # n desc, then name


def test_topic_summary_prefers_gold_labels():
    corpus, annotations = _summary_fixture()
    # force p1 annotations to disagree; gold (unanimous earlier) should decide
    annotations = [
        a for a in annotations if a.conversation_id != "p1"
    ] + [
        make_annotation("p1", "ann1", conflict=True),
        make_annotation("p1", "ann2", conflict=False),
    ]
    filtered = filter_agreed(corpus, [a for a in annotations if a.conversation_id != "p1"])
    assert "p1" not in filtered.gold
    # without gold and without unanimity, p1 counts as non-conflict
    report = topic_summary(corpus, annotations)
    rows = {r.topic: r for r in report.rows}
    assert rows["parks"].conflict_rate == 0.0


def test_topic_summary_empty_corpus():
    corpus = corpus_from([])
    with pytest.raises(StatsError):
        topic_summary(corpus, [])


def test_timeseries_day_buckets_zero_filled():
    corpus = corpus_from([
        make_thread("c1", ["a", "b", "c"], topic="parks", day="2022-06-01"),
        make_thread("c2", ["d", "e", "f"], topic="parks", day="2022-06-04"),
        make_thread("c3", ["g", "h", "i", "j"], topic="transit", day="2022-06-02"),
    ])
    series = topic_timeseries(corpus, bucket="day")
    assert sorted(series) == ["parks", "transit"]
    parks = dict(series["parks"])
    assert parks[date(2022, 6, 1)] == 3
    assert parks[date(2022, 6, 2)] == 0  # zero-filled
    assert parks[date(2022, 6, 4)] == 3
    # global span shared by all topics
    assert [d for d, _ in series["parks"]] == [d for d, _ in series["transit"]]
    assert series["transit"][1][1] == 4


def test_timeseries_week_buckets_start_monday():
    corpus = corpus_from([
        make_thread("c1", ["a", "b", "c"], topic="parks", day="2022-06-01"),  # Wed
        make_thread("c2", ["d", "e", "f"], topic="parks", day="2022-06-07"),  # Tue next wk
    ])
    series = topic_timeseries(corpus, bucket="week")
    weeks = [d for d, _ in series["parks"]]
    assert weeks == [date(2022, 5, 30), date(2022, 6, 6)]
    assert all(d.weekday() == 0 for d in weeks)
    assert [n for _, n in series["parks"]] == [3, 3]


def test_timeseries_validation():
    corpus = corpus_from([make_thread("c1", ["a", "b", "c"], topic="parks")])
    with pytest.raises(StatsError):
        topic_timeseries(corpus, bucket="month")
    with pytest.raises(StatsError):
        topic_timeseries(corpus_from([]), bucket="day")


def test_conflict_rates_by_group():
    corpus, annotations = _summary_fixture()
    corpus = filter_agreed(corpus, annotations)
    groups = conflict_rates_by_group(
        corpus, {c.conversation_id: c.topic for c in corpus}
    )
    assert groups == [("parks", [1.0, 0.0]), ("transit", [1.0])]
