"""Shared fixtures: a character-complete vocabulary, a small deterministic
vector store, and an on-disk toy corpus for pipeline-level tests."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from tablerank.embed import VectorStore
from tablerank.textproc import WordPieceVocab

WORD_POOL = [
    "dog", "cat", "fish", "bird", "horse",
    "paris", "tokyo", "london", "beijing", "york",
    "soccer", "tennis", "golf", "swimming", "running",
    "table", "data", "list", "country", "city",
    "year", "world", "rate", "interest", "price",
    "olympics", "games", "medal", "breed", "wrestler",
]


def build_vocab(extra: tuple[str, ...] = ()) -> WordPieceVocab:
    """Specials plus every alphanumeric character (and its continuation),
    so any alphanumeric word segments into one piece per character."""
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
    chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    tokens.extend(chars)
    tokens.extend("##" + c for c in chars)
    tokens.extend(t for t in extra if t not in tokens)
    return WordPieceVocab({tok: i for i, tok in enumerate(tokens)})


def build_store(words=WORD_POOL, dim: int = 3, seed: int = 42) -> VectorStore:
    rng = np.random.default_rng(seed)
    vectors = {}
    for word in words:
        vec = rng.normal(size=dim)
        while np.linalg.norm(vec) < 1e-3:
            vec = rng.normal(size=dim)
        vectors[word] = vec
    return VectorStore(vectors)


@pytest.fixture(scope="session")
def char_vocab() -> WordPieceVocab:
    return build_vocab()


@pytest.fixture(scope="session")
def toy_store() -> VectorStore:
    return build_store()


def write_vocab_file(path: Path, extra: tuple[str, ...] = ()) -> Path:
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
    chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    tokens.extend(chars)
    tokens.extend("##" + c for c in chars)
    tokens.extend(t for t in extra if t not in tokens)
    path.write_text("\n".join(tokens) + "\n", encoding="utf-8")
    return path


def write_vectors_file(path: Path, words=WORD_POOL, dim: int = 3, seed: int = 42) -> Path:
    rng = np.random.default_rng(seed)
    lines = [f"{len(words)} {dim}"]
    for word in words:
        vec = rng.normal(size=dim)
        while np.linalg.norm(vec) < 1e-3:
            vec = rng.normal(size=dim)
        lines.append(word + " " + " ".join(repr(float(x)) for x in vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_toy_corpus(root: Path, n_queries: int = 10, n_tables: int = 12, seed: int = 7) -> dict:
    """Write a small but non-degenerate corpus; returns the file paths."""
    rng = np.random.default_rng(seed)
    pool = WORD_POOL

    tables = []
    for t in range(n_tables):
        headers = [str(rng.choice(pool)), str(rng.choice(pool))]
        rows = [
            [
                " ".join(rng.choice(pool, size=2)),
                " ".join(rng.choice(pool, size=2)),
            ]
            for _ in range(3)
        ]
        tables.append(
            {
                "id": f"table-{t:04d}",
                "caption": " ".join(rng.choice(pool, size=3)),
                "page_title": " ".join(rng.choice(pool, size=2)),
                "section_title": str(rng.choice(pool)),
                "headers": headers,
                "rows": rows,
            }
        )
    tables_path = root / "tables.jsonl"
    tables_path.write_text(
        "\n".join(json.dumps(t, ensure_ascii=False) for t in tables) + "\n", encoding="utf-8"
    )

    queries_path = root / "queries.tsv"
    query_lines = []
    for q in range(n_queries):
        words = rng.choice(pool, size=2, replace=False)
        query_lines.append(f"q{q:02d}\t{' '.join(words)}")
    queries_path.write_text("\n".join(query_lines) + "\n", encoding="utf-8")

    qrels_path = root / "qrels.txt"
    qrel_lines = []
    for q in range(n_queries):
        judged = rng.choice(n_tables, size=4, replace=False)
        grades = [2, 1, 0, int(rng.integers(0, 3))]
        for table_idx, grade in zip(judged, grades):
            qrel_lines.append(f"q{q:02d} 0 table-{table_idx:04d} {grade}")
    qrels_path.write_text("\n".join(qrel_lines) + "\n", encoding="utf-8")

    vocab_path = write_vocab_file(root / "vocab.txt")
    vectors_path = write_vectors_file(root / "vectors.txt")

    features_path = root / "features.csv"
    feature_lines = ["qid,table_id,f1,f2"]
    for line in qrel_lines:
        qid, _, tid, _ = line.split()
        feature_lines.append(f"{qid},{tid},{rng.normal():.6f},{rng.normal():.6f}")
    features_path.write_text("\n".join(feature_lines) + "\n", encoding="utf-8")

    return {
        "tables": tables_path,
        "queries": queries_path,
        "qrels": qrels_path,
        "vocab": vocab_path,
        "vectors": vectors_path,
        "features": features_path,
    }


@pytest.fixture()
def toy_corpus(tmp_path) -> dict:
    return make_toy_corpus(tmp_path)
