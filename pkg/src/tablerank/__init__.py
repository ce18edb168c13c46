"""Select-then-rank table search toolkit.

Slice tables into row/column/cell items, rank the items by query salience
computed from word embeddings, pack the winners into a budgeted token
sequence, score with a pluggable scorer plus a feature-fusion regression
head, and evaluate with standard retrieval metrics.
"""

from .corpus import (
    FeatureStore,
    Judgment,
    Query,
    Table,
    TableCorpus,
    corpus_stats,
    load_features,
    load_qrels,
    load_queries,
    load_tables,
)
from .embed import VectorStore, cosine, load_vectors, mean_vector
from .encoder import Budgets, InputPacker, PackedInput, pack, parse_wire, render
from .evaluation import (
    MetricReport,
    RankedRun,
    average_precision,
    evaluate_run,
    kfold_split,
    mean_average_precision,
    mean_reciprocal_rank,
    ndcg_at_k,
    paired_ttest,
    read_run,
    reciprocal_rank,
    write_run,
)
from .fusion import (
    FusionHead,
    FusionRegressor,
    TrainConfig,
    fuse_score,
    head_gradient,
    load_head,
    save_head,
    train_head,
)
from .pipeline import RunConfig, compare, run_cv
from .scorer import (
    FeatureCache,
    RemoteScorer,
    cache_features,
    load_cached_features,
    score_native,
)
from .selector import SalienceSelector, TableItem, salience, select, slice_table
from .textproc import (
    TokenSeq,
    WordPieceVocab,
    load_vocab,
    simple_tokenize,
    wordpiece_tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "Budgets",
    "FeatureCache",
    "FeatureStore",
    "FusionHead",
    "FusionRegressor",
    "InputPacker",
    "Judgment",
    "MetricReport",
    "PackedInput",
    "Query",
    "RankedRun",
    "RemoteScorer",
    "RunConfig",
    "SalienceSelector",
    "Table",
    "TableCorpus",
    "TableItem",
    "TokenSeq",
    "TrainConfig",
    "VectorStore",
    "WordPieceVocab",
    "average_precision",
    "cache_features",
    "compare",
    "corpus_stats",
    "cosine",
    "evaluate_run",
    "fuse_score",
    "head_gradient",
    "kfold_split",
    "load_cached_features",
    "load_features",
    "load_head",
    "load_qrels",
    "load_queries",
    "load_tables",
    "load_vectors",
    "load_vocab",
    "mean_average_precision",
    "mean_reciprocal_rank",
    "mean_vector",
    "ndcg_at_k",
    "pack",
    "paired_ttest",
    "parse_wire",
    "read_run",
    "reciprocal_rank",
    "render",
    "run_cv",
    "salience",
    "save_head",
    "score_native",
    "select",
    "simple_tokenize",
    "slice_table",
    "train_head",
    "wordpiece_tokenize",
    "write_run",
]
