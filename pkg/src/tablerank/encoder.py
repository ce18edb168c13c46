"""Packing: build the scorer-ready token sequence under per-field budgets.

The packed layout is
``[CLS] query [SEP] caption [SEP] section [SEP] page [SEP] headers [SEP] item [SEP] ...``
capped at ``max_len`` tokens. Context fields are truncated to their budgets
(prefix kept); items are appended in the given salience order and the final
item may be cut to fill remaining capacity, so the least salient content is
what falls off the end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Query, Table
from .selector import TableItem
from .textproc import CLS_TOKEN, SEP_TOKEN, TokenSeq, WordPieceVocab, wordpiece_tokenize

SEGMENT_A = "A"
SEGMENT_B = "B"

# [CLS] + one query token + first [SEP] + one [SEP] per context field.
_MIN_FRAME = 3 + 4


class PackError(ValueError):
    """Raised when an input cannot be packed under the configured budgets."""


@dataclass(frozen=True)
class Budgets:
    """Per-field token budgets and the overall cap."""

    caption: int = 20
    section_title: int = 10
    page_title: int = 10
    headers: int = 20
    max_len: int = 128

    def __post_init__(self):
        for name in ("caption", "section_title", "page_title", "headers", "max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"budget {name} must be positive")
        if self.max_len < _MIN_FRAME:
            raise ValueError(f"max_len must be at least {_MIN_FRAME}")

    @property
    def context_total(self) -> int:
        return self.caption + self.section_title + self.page_title + self.headers


@dataclass(frozen=True)
class PackedInput:
    """Token sequence plus parallel segment labels, ready for the scorer."""

    tokens: TokenSeq
    segments: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.segments):
            raise ValueError("tokens and segments must have equal length")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def attention_len(self) -> int:
        return len(self.tokens)


def pack(
    query: Query,
    table: Table,
    items: list[TableItem],
    budgets: Budgets,
    vocab: WordPieceVocab,
    first_sep_in_a: bool = True,
) -> PackedInput:
    """Pack one (query, table) pair; ``items`` must already be salience-ordered.

    The query is kept whole; a query so long that fully-budgeted context
    fields could no longer fit is rejected as bad input (real queries are a
    handful of tokens).
    """
    q = wordpiece_tokenize(query.text, vocab)
    room_for_query = budgets.max_len - 2 - 4 - budgets.context_total
    if len(q) > room_for_query:
        raise PackError(
            f"query {query.id!r} has {len(q)} tokens but only {room_for_query} fit "
            f"under max_len={budgets.max_len}"
        )

    tokens: list[str] = [CLS_TOKEN, *q.tokens, SEP_TOKEN]
    segments: list[str] = [SEGMENT_A] * (len(q) + 1)
    segments.append(SEGMENT_A if first_sep_in_a else SEGMENT_B)

    fields = (
        (table.caption, budgets.caption),
        (table.section_title, budgets.section_title),
        (table.page_title, budgets.page_title),
        (" ".join(table.headers), budgets.headers),
    )
    for text, budget in fields:
        # An empty field still emits its [SEP] so field positions stay stable.
        field_tokens = wordpiece_tokenize(text, vocab).tokens[:budget]
        tokens.extend(field_tokens)
        tokens.append(SEP_TOKEN)
        segments.extend([SEGMENT_B] * (len(field_tokens) + 1))

    for item in items:
        item_tokens = wordpiece_tokenize(item.raw_text, vocab).tokens
        if not item_tokens:
            continue
        available = budgets.max_len - len(tokens) - 1  # reserve the item's [SEP]
        if available <= 0:
            break
        taken = item_tokens[:available]
        tokens.extend(taken)
        tokens.append(SEP_TOKEN)
        segments.extend([SEGMENT_B] * (len(taken) + 1))
        if len(taken) < len(item_tokens):
            break

    ids = tuple(vocab.id_of(t) for t in tokens)
    return PackedInput(tokens=TokenSeq(tuple(tokens), ids), segments=tuple(segments))


def render(packed: PackedInput) -> dict:
    """Serialize to the wire-record layout shared with the scorer service."""
    return {
        "tokens": list(packed.tokens.tokens),
        "ids": list(packed.tokens.ids),
        "segments": [0 if s == SEGMENT_A else 1 for s in packed.segments],
    }


def parse_wire(record: dict) -> PackedInput:
    """Inverse of :func:`render`."""
    tokens = TokenSeq(tuple(record["tokens"]), tuple(record["ids"]))
    segments = tuple(SEGMENT_A if s == 0 else SEGMENT_B for s in record["segments"])
    return PackedInput(tokens=tokens, segments=segments)


def write_batch(records: list[dict], path: str | Path) -> None:
    """Write wire records as line-delimited JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_batch(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


class InputPacker(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: transforms (query, table, items) triples."""

    def __init__(self, vocab=None, budgets=None, first_sep_in_a=True):
        self.vocab = vocab
        self.budgets = budgets
        self.first_sep_in_a = first_sep_in_a

    def fit(self, X=None, y=None):
        if self.vocab is None:
            raise ValueError("InputPacker requires a vocab")
        return self

    def transform(self, X) -> list[PackedInput]:
        """X is a sequence of (Query, Table, ordered items) triples."""
        self.fit()
        budgets = self.budgets or Budgets()
        return [
            pack(query, table, items, budgets, self.vocab, first_sep_in_a=self.first_sep_in_a)
            for query, table, items in X
        ]
