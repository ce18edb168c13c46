import itertools
import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from tablerank.corpus import Judgment
from tablerank.evaluation import (
    EvaluationError,
    MetricReport,
    RankedRun,
    average_precision,
    evaluate_run,
    judgments_by_query,
    kfold_split,
    mean_reciprocal_rank,
    ndcg_at_k,
    paired_ttest,
    rank_tables,
    read_run,
    reciprocal_rank,
    write_run,
)

# Frozen from the hand computation: DCG = 3/1 + 0 + 1/2 = 3.5,
# IDCG = 3 + 1/log2(3), NDCG = 0.9639404333166532.
NDCG_FIXTURE = 3.5 / (3.0 + 1.0 / math.log2(3.0))


def brute_ndcg(grades_in_rank_order, all_grades, k):
    dcg = sum((2**g - 1) / math.log2(i + 2) for i, g in enumerate(grades_in_rank_order[:k]))
    ideal = sorted(all_grades, reverse=True)
    idcg = sum((2**g - 1) / math.log2(i + 2) for i, g in enumerate(ideal[:k]))
    return dcg / idcg if idcg else 0.0


def brute_ap(binary_in_rank_order, total_relevant):
    if total_relevant == 0:
        return 0.0
    hits, acc = 0, 0.0
    for i, rel in enumerate(binary_in_rank_order, start=1):
        if rel:
            hits += 1
            acc += hits / i
    return acc / total_relevant


class TestNdcg:
    def test_ideal_ordering_is_one(self):
        judged = {"a": 2, "b": 1, "c": 0}
        assert ndcg_at_k(["a", "b", "c"], judged, 5) == pytest.approx(1.0)

    def test_hand_computed_fixture(self):
        judged = {"a": 2, "b": 0, "c": 1}
        value = ndcg_at_k(["a", "b", "c"], judged, 5)
        assert value == pytest.approx(NDCG_FIXTURE, abs=1e-12)
        assert value == pytest.approx(0.9639, abs=1e-4)

    def test_no_relevant_tables_scores_zero(self):
        assert ndcg_at_k(["a", "b"], {"a": 0, "b": 0}, 5) == 0.0

    def test_unretrieved_relevant_counts_in_ideal(self):
        judged = {"a": 1, "zz": 2}  # zz judged but not retrieved
        value = ndcg_at_k(["a"], judged, 5)
        ideal = (2**2 - 1) / math.log2(2) + (2**1 - 1) / math.log2(3)
        assert value == pytest.approx(1.0 / ideal)

    def test_linear_gain_flag(self):
        judged = {"a": 3, "b": 0}
        exp = ndcg_at_k(["b", "a"], judged, 5, gain="exp")
        lin = ndcg_at_k(["b", "a"], judged, 5, gain="linear")
        assert exp == pytest.approx((7 / math.log2(3)) / 7)
        assert lin == pytest.approx((3 / math.log2(3)) / 3)

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            ndcg_at_k(["a"], {"a": 1}, 0)


class TestAveragePrecision:
    def test_hand_computed_fixture(self):
        # 2 relevant retrieved at ranks 1 and 3 -> (1 + 2/3)/2
        judged = {"a": 1, "b": 0, "c": 2}
        assert average_precision(["a", "b", "c"], judged) == pytest.approx(0.8333333333, abs=1e-9)

    def test_all_retrieved_relevant(self):
        judged = {"a": 1, "b": 2}
        assert average_precision(["a", "b"], judged) == 1.0

    def test_no_relevant_retrieved(self):
        judged = {"x": 1}
        assert average_precision(["a", "b"], judged) == 0.0

    def test_unretrieved_relevant_are_misses(self):
        judged = {"a": 1, "x": 1}
        assert average_precision(["a"], judged) == pytest.approx(0.5)


class TestReciprocalRank:
    def test_first_relevant(self):
        assert reciprocal_rank(["a"], {"a": 1}) == 1.0

    def test_rank_four(self):
        judged = {"d": 2}
        assert reciprocal_rank(["a", "b", "c", "d"], judged) == 0.25

    def test_mrr_average(self):
        run = RankedRun()
        run.add("q1", [("a", 2.0), ("b", 1.0)])
        run.add("q2", [("a", 2.0), ("b", 1.0)])
        judged = {"q1": {"a": 1}, "q2": {"b": 1}}
        assert mean_reciprocal_rank(run, judged) == pytest.approx(0.75)


class TestRankTables:
    def test_sorts_desc_ties_by_id(self):
        scored = [("b", 1.0), ("a", 1.0), ("c", 2.0)]
        assert rank_tables(scored) == [("c", 2.0), ("a", 1.0), ("b", 1.0)]

    def test_duplicate_ids_rejected(self):
        run = RankedRun()
        with pytest.raises(EvaluationError, match="duplicate"):
            run.add("q", [("a", 1.0), ("a", 2.0)])


class TestBruteForcePermutations:
    def test_all_metrics_match_reference_on_all_4_permutations(self):
        grades = {"t0": 2, "t1": 1, "t2": 0, "t3": 1}
        ids = list(grades)
        for perm in itertools.permutations(ids):
            ranking = list(perm)
            in_order = [grades[t] for t in ranking]
            binary = [g >= 1 for g in in_order]
            assert average_precision(ranking, grades) == brute_ap(binary, 3)
            expected_rr = 0.0
            for i, rel in enumerate(binary, start=1):
                if rel:
                    expected_rr = 1.0 / i
                    break
            assert reciprocal_rank(ranking, grades) == expected_rr
            for k in (1, 2, 3, 4, 5):
                assert ndcg_at_k(ranking, grades, k) == brute_ndcg(
                    in_order, list(grades.values()), k
                )

    def test_ndcg_never_exceeds_best_permutation(self):
        grades = {"a": 2, "b": 1, "c": 1, "d": 0, "e": 2}
        best = max(
            brute_ndcg([grades[t] for t in perm], list(grades.values()), 5)
            for perm in itertools.permutations(grades)
        )
        assert best == pytest.approx(1.0)
        for perm in itertools.permutations(grades):
            assert ndcg_at_k(list(perm), grades, 5) <= best + 1e-12

    def test_monotone_score_transform_leaves_metrics_unchanged(self):
        rng = np.random.default_rng(0)
        grades = {"a": 2, "b": 0, "c": 1, "d": 0}
        scores = [("a", 0.1), ("b", 0.9), ("c", 0.5), ("d", 0.2)]
        base_ranking = [t for t, _ in rank_tables(scores)]
        transformed = [(t, math.exp(3 * s) + 1) for t, s in scores]
        new_ranking = [t for t, _ in rank_tables(transformed)]
        assert base_ranking == new_ranking
        for k in (2, 4):
            assert ndcg_at_k(base_ranking, grades, k) == ndcg_at_k(new_ranking, grades, k)


class TestKfold:
    def test_even_split(self):
        folds = kfold_split([f"q{i}" for i in range(60)], 5, seed=0)
        assert [len(f) for f in folds] == [12] * 5

    def test_uneven_split(self):
        folds = kfold_split([f"q{i}" for i in range(61)], 5, seed=0)
        assert sorted(len(f) for f in folds) == [12, 12, 12, 12, 13]

    def test_same_seed_identical(self):
        ids = [f"q{i}" for i in range(23)]
        assert kfold_split(ids, 5, seed=9) == kfold_split(ids, 5, seed=9)

    def test_partition_properties(self):
        ids = [f"q{i}" for i in range(17)]
        folds = kfold_split(ids, 4, seed=3)
        flat = [q for fold in folds for q in fold]
        assert sorted(flat) == sorted(ids)
        assert len(set(flat)) == len(ids)

    def test_too_many_folds(self):
        with pytest.raises(ValueError):
            kfold_split(["a", "b"], 3)


class TestPairedTTest:
    def test_hand_derived_fixture(self):
        # differences [1,2,3,4]: mean 2.5, sd 1.2910, t 3.8730, p 0.0305
        a = [2.0, 3.0, 4.0, 5.0]
        b = [1.0, 1.0, 1.0, 1.0]
        t, p = paired_ttest(a, b)
        assert t == pytest.approx(3.8730, abs=1e-4)
        assert p == pytest.approx(0.0305, abs=1e-4)

    def test_identical_vectors_degenerate(self):
        t, p = paired_ttest([0.5, 0.7, 0.9], [0.5, 0.7, 0.9])
        assert t == 0.0
        assert p == 1.0

    def test_constant_nonzero_difference(self):
        t, p = paired_ttest([1.0, 2.0, 3.0], [0.5, 1.5, 2.5])
        assert math.isinf(t) and t > 0
        assert p == 0.0

    def test_swapping_negates_t(self):
        a = [0.9, 0.8, 0.7, 0.95, 0.6]
        b = [0.5, 0.6, 0.65, 0.9, 0.4]
        t_ab, p_ab = paired_ttest(a, b)
        t_ba, p_ba = paired_ttest(b, a)
        assert t_ab == pytest.approx(-t_ba)
        assert p_ab == pytest.approx(p_ba)

    @pytest.mark.parametrize(
        "a,b",
        [
            ([0.9, 0.8, 0.7, 0.95, 0.6], [0.5, 0.6, 0.65, 0.9, 0.4]),
            ([0.1, 0.2, 0.3], [0.3, 0.2, 0.1]),
            ([0.62, 0.58, 0.71, 0.66], [0.60, 0.59, 0.64, 0.70]),
            ([2.0, 4.0, 6.0, 8.0, 10.0], [1.0, 4.5, 5.5, 8.5, 9.0]),
            ([1.0, 0.0, 1.0, 0.0, 1.0, 0.5], [0.5, 0.5, 0.5, 0.5, 0.5, 0.25]),
        ],
    )
    def test_matches_reference_implementation(self, a, b):
        t, p = paired_ttest(a, b)
        ref = scipy_stats.ttest_rel(a, b)
        assert t == pytest.approx(float(ref.statistic), abs=1e-10)
        assert p == pytest.approx(float(ref.pvalue), abs=1e-10)

    def test_misaligned_lengths_rejected(self):
        with pytest.raises(EvaluationError):
            paired_ttest([1.0, 2.0], [1.0])

    def test_single_pair_rejected(self):
        with pytest.raises(EvaluationError):
            paired_ttest([1.0], [2.0])


class TestRunFiles:
    def make_run(self):
        run = RankedRun()
        run.add("q1", [("t2", 0.25), ("t1", 0.75)])
        run.add("q2", [("t3", -0.5), ("t1", 1.5)])
        return run

    def test_layout(self, tmp_path):
        path = tmp_path / "run.txt"
        write_run(self.make_run(), path, tag="unit")
        lines = path.read_text().strip().split("\n")
        assert lines[0].split() == ["q1", "Q0", "t1", "1", "0.75", "unit"]

    def test_round_trip_scores_exact(self, tmp_path):
        path = tmp_path / "run.txt"
        run = self.make_run()
        write_run(run, path)
        loaded = read_run(path)
        for qid in run.query_ids():
            assert loaded.ranking(qid) == run.ranking(qid)

    def test_metrics_survive_round_trip(self, tmp_path):
        judgments = judgments_by_query(
            [
                Judgment("q1", "t1", 2),
                Judgment("q1", "t2", 0),
                Judgment("q2", "t1", 1),
                Judgment("q2", "t3", 1),
            ]
        )
        run = self.make_run()
        before = evaluate_run(run, judgments)
        path = tmp_path / "run.txt"
        write_run(run, path)
        after = evaluate_run(read_run(path), judgments)
        for metric in before.metrics:
            for qid in before.per_query:
                assert abs(before.per_query[qid][metric] - after.per_query[qid][metric]) <= 1e-12


class TestMetricReport:
    def test_aggregate_is_mean_of_per_query(self):
        report = MetricReport(metrics=("MAP",), per_query={"a": {"MAP": 0.2}, "b": {"MAP": 0.6}})
        assert report.aggregates["MAP"] == pytest.approx(0.4)

    def test_json_round_trip(self, tmp_path):
        report = MetricReport(
            metrics=("MAP", "MRR"),
            per_query={"q1": {"MAP": 0.5, "MRR": 1.0}, "q2": {"MAP": 0.25, "MRR": 0.5}},
        )
        path = tmp_path / "metrics.json"
        report.to_json(path)
        loaded = MetricReport.from_json(path)
        assert loaded.metrics == report.metrics
        assert loaded.per_query == report.per_query

    def test_all_metrics_within_unit_interval(self, toy_corpus):
        rng = np.random.default_rng(1)
        judgments = {}
        run = RankedRun()
        for q in range(8):
            qid = f"q{q}"
            judged = {f"t{i}": int(rng.integers(0, 3)) for i in range(6)}
            judgments[qid] = judged
            run.add(qid, [(t, float(rng.normal())) for t in judged])
        report = evaluate_run(run, judgments)
        for row in report.per_query.values():
            for value in row.values():
                assert 0.0 <= value <= 1.0
