"""Experiment orchestration: cross-validated runs and method comparison.

A run scores every judged (query, table) pair — the re-ranking setup used
by the table-retrieval benchmarks — with a pluggable feature source: the
remote neural scorer's [CLS] features, or the native embedding scorer's
single cosine feature for desk-scale runs. A fusion head is trained on each
fold's training queries and applied to its test queries; per-query metrics
are concatenated across folds.
"""

from __future__ import annotations

import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from .corpus import FeatureStore, Judgment, Query, Table
from .embed import VectorStore, load_vectors
from .encoder import Budgets, PackedInput, pack, render
from .evaluation import (
    MetricReport,
    RankedRun,
    evaluate_run,
    judgments_by_query,
    kfold_split,
    paired_ttest,
    write_run,
)
from .fusion import TrainConfig, predict, train_head
from .scorer import RemoteScorer, score_native
from .selector import select
from .textproc import WordPieceVocab, load_vocab

logger = logging.getLogger(__name__)

ITEM_CHOICES = ("row", "col", "cell", "none")
MODE_CHOICES = ("mean", "sum", "max", "random")


class PipelineError(RuntimeError):
    """A stage failure, tagged with the stage that raised it."""


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"[{name}] {exc}") from exc


@dataclass
class RunConfig:
    """Everything a run needs; defaults mirror the training recipe."""

    tables: str
    queries: str
    qrels: str
    vocab: str
    vectors: str | None = None
    tables_format: str = "canonical"
    features: str | None = None
    items: str = "row"
    mode: str = "max"
    budgets: Budgets = field(default_factory=Budgets)
    scorer: str = "native"
    endpoint: str | None = None
    folds: int = 5
    seed: int = 0
    out: str = "out"
    epochs: int = 5
    batch_size: int = 16
    learning_rate: float = 1e-5
    warmup: float = 0.1
    normalize_extra: bool = False
    gain: str = "exp"
    include_header_row: bool = False
    tag: str | None = None

    def __post_init__(self):
        if self.items not in ITEM_CHOICES:
            raise ValueError(f"items must be one of {ITEM_CHOICES}")
        if self.mode not in MODE_CHOICES:
            raise ValueError(f"mode must be one of {MODE_CHOICES}")
        if self.scorer not in ("native", "remote"):
            raise ValueError("scorer must be 'native' or 'remote'")
        if self.scorer == "remote" and not self.endpoint:
            raise ValueError("remote scorer requires an endpoint")
        if self.scorer == "native" and not self.vectors:
            raise ValueError("native scorer requires a vectors file")
        if self.mode in ("mean", "sum", "max") and self.items != "none" and not self.vectors:
            raise ValueError("salience selection requires a vectors file")

    @property
    def run_tag(self) -> str:
        if self.tag:
            return self.tag
        if self.items == "none":
            return "text"
        return f"{self.items}-{self.mode}"

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        record = json.loads(Path(path).read_text(encoding="utf-8"))
        budgets = record.pop("budgets", None)
        known = {f.name for f in fields(cls)}
        unknown = set(record) - known
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        config = cls(**record)
        if budgets is not None:
            config = replace(config, budgets=Budgets(**budgets))
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if overrides:
            config = replace(config, **overrides)
        return config


@dataclass
class CorpusBundle:
    tables: corpus_mod.TableCorpus
    queries: list[Query]
    qrels: list[Judgment]
    vocab: WordPieceVocab
    store: VectorStore | None
    features: FeatureStore | None


@dataclass(frozen=True)
class Pair:
    query: Query
    table: Table
    grade: int

    @property
    def key(self) -> str:
        # Query ids come from TSV and table ids from whitespace-split qrels,
        # so a tab can never collide with either.
        return f"{self.query.id}\t{self.table.id}"


def load_inputs(config: RunConfig) -> CorpusBundle:
    with _stage("load"):
        tables = corpus_mod.load_tables(config.tables, format=config.tables_format)
        queries = corpus_mod.load_queries(config.queries)
        qrels = corpus_mod.load_qrels(config.qrels)
        vocab = load_vocab(config.vocab)
        store = load_vectors(config.vectors) if config.vectors else None
        features = corpus_mod.load_features(config.features) if config.features else None
    return CorpusBundle(tables, queries, qrels, vocab, store, features)


def judged_pairs(bundle: CorpusBundle) -> list[Pair]:
    """The scoring pool: every judgment whose query and table are loadable."""
    queries = {q.id: q for q in bundle.queries}
    pairs: list[Pair] = []
    dropped = 0
    for j in bundle.qrels:
        query = queries.get(j.query_id)
        table = bundle.tables.get(j.table_id)
        if query is None or table is None:
            dropped += 1
            continue
        pairs.append(Pair(query=query, table=table, grade=j.grade))
    if dropped:
        logger.warning("dropped %d judgments with missing query or table", dropped)
    if not pairs:
        raise PipelineError("[pairs] no judged (query, table) pairs resolvable")
    return pairs


def pack_pair(config: RunConfig, bundle: CorpusBundle, pair: Pair) -> PackedInput:
    if config.items == "none":
        items = []
    else:
        kind = "column" if config.items == "col" else config.items
        items = select(
            pair.table,
            pair.query,
            config.mode,
            kind,
            bundle.store,
            seed=config.seed,
            include_header_row=config.include_header_row,
        )
    return pack(pair.query, pair.table, items, config.budgets, bundle.vocab)


def gather_features(
    config: RunConfig, bundle: CorpusBundle, pairs: list[Pair]
) -> tuple[np.ndarray, np.ndarray | None]:
    """Scorer features for every pair, plus aligned additional features.

    Remote runs use the service's [CLS] vectors; native runs use the
    embedding scorer's cosine as a single-component feature. When a feature
    file is configured but misses any pair, the run degrades to
    scorer-features-only rather than mixing head shapes.
    """
    with _stage("encode"):
        packed = [pack_pair(config, bundle, p) for p in pairs]
    with _stage("score"):
        if config.scorer == "native":
            matrix = np.array(
                [[score_native(pk, p.query, bundle.store)] for pk, p in zip(packed, pairs)]
            )
        else:
            client = RemoteScorer(config.endpoint)
            wire = [(p.key, render(pk)) for p, pk in zip(pairs, packed)]
            by_key = client.features(wire)
            matrix = np.stack([by_key[p.key][1] for p in pairs])
    extra: np.ndarray | None = None
    if bundle.features is not None:
        keys = [(p.query.id, p.table.id) for p in pairs]
        missing = bundle.features.missing(keys)
        if missing:
            logger.warning(
                "feature file misses %d of %d pairs; falling back to scorer-features-only",
                len(missing),
                len(keys),
            )
        else:
            extra = np.stack([bundle.features.get(q, t) for q, t in keys])
    return matrix, extra


def run_cv(config: RunConfig) -> MetricReport:
    """Cross-validated evaluation; writes the run file and metric reports."""
    bundle = load_inputs(config)
    pairs = judged_pairs(bundle)
    matrix, extra = gather_features(config, bundle, pairs)

    qids = sorted({p.query.id for p in pairs})
    with _stage("folds"):
        folds = kfold_split(qids, config.folds, seed=config.seed)

    run = RankedRun()
    with _stage("cv"):
        for fold_idx, test_qids in enumerate(folds):
            test_set = set(test_qids)
            train_idx = [i for i, p in enumerate(pairs) if p.query.id not in test_set]
            test_idx = [i for i, p in enumerate(pairs) if p.query.id in test_set]
            if not train_idx or not test_idx:
                raise PipelineError(f"[cv] fold {fold_idx} has an empty partition")
            train_config = TrainConfig(
                epochs=config.epochs,
                batch_size=config.batch_size,
                learning_rate=config.learning_rate,
                warmup=config.warmup,
                seed=config.seed + fold_idx,
            )
            samples = [
                (matrix[i], None if extra is None else extra[i], pairs[i].grade)
                for i in train_idx
            ]
            head = train_head(samples, train_config)
            scores = predict(
                head,
                matrix[test_idx],
                None if extra is None else extra[test_idx],
            )
            scored_by_query: dict[str, list[tuple[str, float]]] = {}
            for local, i in enumerate(test_idx):
                scored_by_query.setdefault(pairs[i].query.id, []).append(
                    (pairs[i].table.id, float(scores[local]))
                )
            for qid, scored in scored_by_query.items():
                run.add(qid, scored)

    with _stage("report"):
        report = evaluate_run(run, judgments_by_query(bundle.qrels), gain=config.gain)
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        write_run(run, out / "run.txt", tag=config.run_tag)
        report.to_json(out / "metrics.json")
        report.to_tsv(out / "metrics.tsv")
    return report


MARKER_LEVELS = ((0.005, "‡"), (0.05, "†"))  # ‡ then †


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    mean_a: float
    mean_b: float
    t: float
    p: float
    marker: str


def compare(report_a: MetricReport, report_b: MetricReport) -> list[ComparisonRow]:
    """Per-metric paired t-tests between two aligned reports."""
    if sorted(report_a.per_query) != sorted(report_b.per_query):
        raise PipelineError("[compare] reports cover different query sets")
    if report_a.metrics != report_b.metrics:
        raise PipelineError("[compare] reports cover different metrics")
    rows = []
    for metric in report_a.metrics:
        a = report_a.values(metric)
        b = report_b.values(metric)
        t, p = paired_ttest(a, b)
        marker = ""
        for level, symbol in MARKER_LEVELS:
            if p < level:
                marker = symbol
                break
        rows.append(
            ComparisonRow(
                metric=metric,
                mean_a=sum(a) / len(a),
                mean_b=sum(b) / len(b),
                t=t,
                p=p,
                marker=marker,
            )
        )
    return rows
