"""Pretrained word vectors and the similarity primitives built on them."""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class VectorLoadError(ValueError):
    """Raised when a vector file yields no usable vectors."""


class VectorStore:
    """Immutable word -> vector map with a single shared dimension."""

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise VectorLoadError("vector store must contain at least one vector")
        dims = {v.shape for v in vectors.values()}
        if len(dims) != 1 or len(next(iter(dims))) != 1:
            raise VectorLoadError(f"inconsistent vector shapes: {sorted(dims)}")
        for word, vec in vectors.items():
            if not np.all(np.isfinite(vec)):
                raise VectorLoadError(f"non-finite components in vector for {word!r}")
        self._vectors = {w: np.asarray(v, dtype=float) for w, v in vectors.items()}
        self._dimension = next(iter(dims))[0]
        self.skipped_lines = 0

    @property
    def dimension(self) -> int:
        return self._dimension

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, word: str) -> bool:
        return word in self._vectors

    def get(self, word: str) -> np.ndarray | None:
        return self._vectors.get(word)

    def scaled(self, factor: float) -> "VectorStore":
        """Copy of the store with every vector multiplied by ``factor``."""
        return VectorStore({w: v * factor for w, v in self._vectors.items()})


def load_vectors(path: str | Path) -> VectorStore:
    """Load fastText-style text vectors.

    The file may start with a ``count dim`` header line. Lines whose width
    disagrees with the established dimension, or that contain non-finite
    values, are skipped and counted on the returned store.
    """
    vectors: dict[str, np.ndarray] = {}
    dimension: int | None = None
    skipped = 0
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    _, dim = int(parts[0]), int(parts[1])
                except ValueError:
                    pass
                else:
                    dimension = dim
                    continue
            word, raw = parts[0], parts[1:]
            try:
                values = np.array([float(x) for x in raw], dtype=float)
            except ValueError:
                skipped += 1
                logger.warning("%s:%d: unparseable vector line, skipped", path, lineno)
                continue
            if dimension is None:
                dimension = len(values)
            if len(values) != dimension or not np.all(np.isfinite(values)):
                skipped += 1
                logger.warning("%s:%d: bad width or non-finite values, skipped", path, lineno)
                continue
            vectors[word] = values
    if not vectors:
        raise VectorLoadError(f"{path}: no usable vectors")
    store = VectorStore(vectors)
    store.skipped_lines = skipped
    if skipped:
        logger.warning("%s: skipped %d malformed vector lines", path, skipped)
    return store


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Standard cosine similarity; zero-norm inputs score a neutral 0.

    Dot products use elementwise multiply-and-sum rather than BLAS so the
    result is reproducible across platforms and bit-comparable with a plain
    transliteration of the formula.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = math.sqrt(float((u * u).sum()))
    nv = math.sqrt(float((v * v).sum()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float((u * v).sum()) / (nu * nv)


def mean_vector(words: list[str], store: VectorStore) -> np.ndarray:
    """Arithmetic mean over the in-vocabulary words.

    Out-of-vocabulary words are dropped; when nothing is in vocabulary the
    zero vector comes back, which cosine() maps to a neutral score.
    """
    acc = np.zeros(store.dimension, dtype=float)
    count = 0
    for word in words:
        vec = store.get(word)
        if vec is not None:
            acc += vec
            count += 1
    if count == 0:
        return acc
    return acc / count
