"""Ranking metrics, cross-validation splits, and significance testing.

Metrics are computed per query and averaged. NDCG uses the exponential gain
(2^grade - 1) with a log2(rank+1) discount by default; the linear gain is
available behind a flag. MAP and MRR binarize at grade >= 1, and unjudged
tables count as grade 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from .corpus import Judgment

DEFAULT_CUTOFFS = (5, 10, 15, 20)


class EvaluationError(ValueError):
    """Raised for structurally invalid runs or misaligned comparisons."""


def judgments_by_query(judgments: list[Judgment]) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = {}
    for j in judgments:
        out.setdefault(j.query_id, {})[j.table_id] = j.grade
    return out


def rank_tables(scored: list[tuple[str, float]]) -> list[tuple[str, float]]:
    """Sort score-descending, ties by ascending table id."""
    return sorted(scored, key=lambda pair: (-pair[1], pair[0]))


class RankedRun:
    """Per-query ranked (table_id, score) lists."""

    def __init__(self):
        self._rankings: dict[str, list[tuple[str, float]]] = {}

    def add(self, query_id: str, scored: list[tuple[str, float]]) -> None:
        ids = [t for t, _ in scored]
        if len(ids) != len(set(ids)):
            raise EvaluationError(f"duplicate table ids in ranking for query {query_id!r}")
        self._rankings[query_id] = rank_tables(scored)

    def ranking(self, query_id: str) -> list[tuple[str, float]]:
        return self._rankings[query_id]

    def query_ids(self) -> list[str]:
        return sorted(self._rankings)

    def __len__(self) -> int:
        return len(self._rankings)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._rankings


def _gain(grade: int, gain: str) -> float:
    if gain == "exp":
        return float(2**grade - 1)
    if gain == "linear":
        return float(grade)
    raise ValueError(f"unknown gain {gain!r}; expected 'exp' or 'linear'")


def ndcg_at_k(
    ranking: list[str], judgments: dict[str, int], k: int, gain: str = "exp"
) -> float:
    """NDCG@k with the ideal computed over every judged table for the query."""
    if k < 1:
        raise ValueError("k must be at least 1")
    dcg = 0.0
    for i, table_id in enumerate(ranking[:k]):
        dcg += _gain(judgments.get(table_id, 0), gain) / math.log2(i + 2)
    ideal = sorted(judgments.values(), reverse=True)
    idcg = 0.0
    for i, grade in enumerate(ideal[:k]):
        idcg += _gain(grade, gain) / math.log2(i + 2)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def average_precision(ranking: list[str], judgments: dict[str, int]) -> float:
    """AP with binary relevance (grade >= 1); unretrieved relevant are misses."""
    total_relevant = sum(1 for g in judgments.values() if g >= 1)
    if total_relevant == 0:
        return 0.0
    hits = 0
    acc = 0.0
    for i, table_id in enumerate(ranking, start=1):
        if judgments.get(table_id, 0) >= 1:
            hits += 1
            acc += hits / i
    return acc / total_relevant


def reciprocal_rank(ranking: list[str], judgments: dict[str, int]) -> float:
    for i, table_id in enumerate(ranking, start=1):
        if judgments.get(table_id, 0) >= 1:
            return 1.0 / i
    return 0.0


def mean_average_precision(run: RankedRun, judgments: dict[str, dict[str, int]]) -> float:
    values = [
        average_precision([t for t, _ in run.ranking(q)], judgments.get(q, {}))
        for q in run.query_ids()
    ]
    return sum(values) / len(values)


def mean_reciprocal_rank(run: RankedRun, judgments: dict[str, dict[str, int]]) -> float:
    values = [
        reciprocal_rank([t for t, _ in run.ranking(q)], judgments.get(q, {}))
        for q in run.query_ids()
    ]
    return sum(values) / len(values)


@dataclass
class MetricReport:
    """Per-query metric values plus their arithmetic-mean aggregates."""

    metrics: tuple[str, ...]
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def aggregates(self) -> dict[str, float]:
        n = len(self.per_query)
        return {
            m: sum(row[m] for row in self.per_query.values()) / n for m in self.metrics
        }

    def values(self, metric: str) -> list[float]:
        """Metric values ordered by sorted query id (alignment for t-tests)."""
        return [self.per_query[q][metric] for q in sorted(self.per_query)]

    def to_json(self, path: str | Path) -> None:
        record = {
            "metrics": list(self.metrics),
            "per_query": self.per_query,
            "aggregates": self.aggregates,
        }
        Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "MetricReport":
        record = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(metrics=tuple(record["metrics"]), per_query=record["per_query"])

    def to_tsv(self, path: str | Path) -> None:
        lines = ["\t".join(("query",) + self.metrics)]
        for qid in sorted(self.per_query):
            row = self.per_query[qid]
            lines.append("\t".join([qid] + [repr(row[m]) for m in self.metrics]))
        agg = self.aggregates
        lines.append("\t".join(["ALL"] + [repr(agg[m]) for m in self.metrics]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def evaluate_run(
    run: RankedRun,
    judgments: dict[str, dict[str, int]],
    cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS,
    gain: str = "exp",
) -> MetricReport:
    metrics = ("MAP", "MRR") + tuple(f"NDCG@{k}" for k in cutoffs)
    report = MetricReport(metrics=metrics)
    for qid in run.query_ids():
        ranking = [t for t, _ in run.ranking(qid)]
        judged = judgments.get(qid, {})
        row = {
            "MAP": average_precision(ranking, judged),
            "MRR": reciprocal_rank(ranking, judged),
        }
        for k in cutoffs:
            row[f"NDCG@{k}"] = ndcg_at_k(ranking, judged, k, gain=gain)
        report.per_query[qid] = row
    return report


def kfold_split(query_ids: list[str], k: int, seed: int = 0) -> list[list[str]]:
    """Seeded shuffle then round-robin; fold sizes differ by at most one."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(query_ids):
        raise ValueError(f"cannot split {len(query_ids)} queries into {k} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(query_ids))
    folds: list[list[str]] = [[] for _ in range(k)]
    for position, idx in enumerate(order):
        folds[position % k].append(query_ids[idx])
    return folds


def paired_ttest(a: list[float], b: list[float]) -> tuple[float, float]:
    """Two-tailed paired t-test on aligned per-query values.

    Zero-variance differences are degenerate: identical inputs give p = 1,
    a constant nonzero shift gives p -> 0 with the sign of the shift.
    """
    if len(a) != len(b):
        raise EvaluationError(f"paired t-test needs aligned samples, got {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise EvaluationError("paired t-test needs at least two pairs")
    diffs = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    n = len(diffs)
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(scipy_stats.t.sf(abs(t), n - 1))
    return t, p


def write_run(run: RankedRun, path: str | Path, tag: str = "tablerank") -> None:
    """Write the standard ``qid Q0 table_id rank score tag`` layout.

    Scores are rendered with ``repr`` so they round-trip exactly.
    """
    lines = []
    for qid in run.query_ids():
        for rank, (table_id, score) in enumerate(run.ranking(qid), start=1):
            lines.append(f"{qid} Q0 {table_id} {rank} {score!r} {tag}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_run(path: str | Path) -> RankedRun:
    per_query: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise EvaluationError(f"{path}:{lineno}: expected 'qid Q0 table_id rank score tag'")
            qid, _, table_id, _, score, _ = parts
            per_query.setdefault(qid, []).append((table_id, float(score)))
    run = RankedRun()
    for qid, scored in per_query.items():
        run.add(qid, scored)
    return run
