"""Content selection: slice tables into items and order them by query salience.

Items are rows, columns, or single cells. Three salience functions score an
item against the query through word-vector cosines (mean of means, sum over
all term pairs, max over all term pairs); a seeded random ordering backs the
random-selection baselines.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Query, Table
from .embed import VectorStore, cosine, mean_vector
from .textproc import simple_tokenize

ITEM_KINDS = ("row", "column", "cell")
SALIENCE_MODES = ("mean", "sum", "max")
MODES = SALIENCE_MODES + ("random",)


@dataclass(frozen=True)
class TableItem:
    """One coherent slice of a table with provenance.

    ``origin`` is (row index, column index); -1 marks the unbound axis, so a
    row item is (i, -1), a column item (-1, j), and a cell (i, j). A header
    row emitted as an item (optional) carries row index -1.
    """

    kind: str
    tokens: tuple[str, ...]
    origin: tuple[int, int]
    raw_text: str


def slice_table(table: Table, kind: str, include_header_row: bool = False) -> list[TableItem]:
    """Slice a table into row, column, or cell items in row-major order.

    Row items exclude the header row by default (it is already packed as a
    context field); column items prepend their header cell so each column
    stays self-describing. Items whose token list comes out empty are
    dropped before ranking.
    """
    if kind not in ITEM_KINDS:
        raise ValueError(f"unknown item kind {kind!r}; expected one of {ITEM_KINDS}")
    candidates: list[tuple[tuple[int, int], str]] = []
    if kind == "row":
        if include_header_row and table.headers:
            candidates.append(((-1, -1), " ".join(table.headers)))
        for i, row in enumerate(table.rows):
            candidates.append(((i, -1), " ".join(row)))
    elif kind == "column":
        for j, header in enumerate(table.headers):
            cells = [header] + [row[j] for row in table.rows]
            candidates.append(((-1, j), " ".join(cells)))
    else:
        for i, row in enumerate(table.rows):
            for j, cell in enumerate(row):
                if cell.strip():
                    candidates.append(((i, j), cell))
    items = []
    for origin, text in candidates:
        tokens = tuple(simple_tokenize(text))
        if tokens:
            items.append(TableItem(kind=kind, tokens=tokens, origin=origin, raw_text=text))
    return items


def _pair_cosines(item_tokens, query_tokens, store: VectorStore) -> list[float]:
    values = []
    for k in query_tokens:
        vk = store.get(k)
        if vk is None:
            continue
        for w in item_tokens:
            vw = store.get(w)
            if vw is not None:
                values.append(cosine(vk, vw))
    return values


def salience_from_tokens(
    item_tokens, query_tokens, mode: str, store: VectorStore
) -> float:
    """Salience of a tokenized item against a tokenized query."""
    if mode == "mean":
        return cosine(mean_vector(list(item_tokens), store), mean_vector(list(query_tokens), store))
    if mode == "sum":
        return sum(_pair_cosines(item_tokens, query_tokens, store))
    if mode == "max":
        values = _pair_cosines(item_tokens, query_tokens, store)
        return max(values) if values else 0.0
    raise ValueError(f"salience is undefined for mode {mode!r}")


def salience(item: TableItem, query: Query, mode: str, store: VectorStore) -> float:
    return salience_from_tokens(item.tokens, simple_tokenize(query.text), mode, store)


def _pair_seed(seed: int, query_id: str, table_id: str) -> int:
    # Hash-derived so per-pair shuffles are independent yet reproducible.
    digest = hashlib.sha256(f"{seed}|{query_id}|{table_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def select(
    table: Table,
    query: Query,
    mode: str,
    kind: str,
    store: VectorStore | None,
    seed: int = 0,
    include_header_row: bool = False,
) -> list[TableItem]:
    """Order a table's items for packing.

    Salience modes sort by score descending with ties broken by original
    row-major position; random mode applies a seeded permutation (numpy
    PCG64, one stream per (query, table) pair).
    """
    items = slice_table(table, kind, include_header_row=include_header_row)
    if mode == "random":
        rng = np.random.default_rng(_pair_seed(seed, query.id, table.id))
        return [items[i] for i in rng.permutation(len(items))]
    if mode not in SALIENCE_MODES:
        raise ValueError(f"unknown selection mode {mode!r}; expected one of {MODES}")
    if store is None:
        raise ValueError("salience modes require a vector store")
    query_tokens = simple_tokenize(query.text)
    scores = [salience_from_tokens(it.tokens, query_tokens, mode, store) for it in items]
    order = sorted(range(len(items)), key=lambda i: (-scores[i], i))
    return [items[i] for i in order]


class SalienceSelector(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: transforms (query, table) pairs to ordered items."""

    def __init__(self, store=None, kind="row", mode="max", seed=0, include_header_row=False):
        self.store = store
        self.kind = kind
        self.mode = mode
        self.seed = seed
        self.include_header_row = include_header_row

    def fit(self, X=None, y=None):
        if self.kind not in ITEM_KINDS:
            raise ValueError(f"kind must be one of {ITEM_KINDS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        return self

    def transform(self, X) -> list[list[TableItem]]:
        """X is a sequence of (Query, Table) pairs."""
        self.fit()
        return [
            select(
                table,
                query,
                self.mode,
                self.kind,
                self.store,
                seed=self.seed,
                include_header_row=self.include_header_row,
            )
            for query, table in X
        ]
