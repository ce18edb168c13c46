"""Corpus ingestion: tables, queries, relevance judgments, precomputed features.

One internal table model, several on-disk shapes. The canonical format is
line-delimited JSON with the field names used by :class:`Table`; adapters
translate the Wikipedia table dump layout (``pgTitle``/``secondTitle``/
``caption``/``title``/``data``) and the web-query-table layout (caption +
sub-caption, no page title).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .textproc import WordPieceVocab, wordpiece_tokenize

logger = logging.getLogger(__name__)

TABLE_FORMATS = ("canonical", "wikitables", "webquerytable")


class CorpusError(ValueError):
    """Raised for unusable corpus files (empty, duplicated ids, bad layout)."""


@dataclass
class Table:
    id: str
    caption: str = ""
    page_title: str = ""
    section_title: str = ""
    headers: list[str] = field(default_factory=list)
    rows: list[list[str]] = field(default_factory=list)

    @property
    def n_columns(self) -> int:
        return len(self.headers)


@dataclass(frozen=True)
class Query:
    id: str
    text: str


@dataclass(frozen=True)
class Judgment:
    query_id: str
    table_id: str
    grade: int


@dataclass
class LoadReport:
    """Counters for the lossy parts of table loading."""

    padded_rows: int = 0
    truncated_rows: int = 0
    skipped_records: int = 0
    messages: list[str] = field(default_factory=list)

    def note(self, msg: str) -> None:
        self.skipped_records += 1
        self.messages.append(msg)
        logger.warning(msg)


class TableCorpus:
    """Loaded tables plus the loader's diagnostics, addressable by id."""

    def __init__(self, tables: list[Table], report: LoadReport):
        self.tables = tables
        self.report = report
        self._by_id = {t.id: t for t in tables}

    def __iter__(self):
        return iter(self.tables)

    def __len__(self) -> int:
        return len(self.tables)

    def get(self, table_id: str) -> Table | None:
        return self._by_id.get(table_id)

    def __contains__(self, table_id: str) -> bool:
        return table_id in self._by_id


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return str(value)


def _string_list(value) -> list[str]:
    # Wikipedia dumps occasionally store a lone string where a list belongs.
    if isinstance(value, str):
        return [value]
    return [_cell(v) for v in (value or [])]


def _conform_rows(table: Table, report: LoadReport) -> None:
    """Pad short rows with empty cells and truncate long ones.

    Web tables are ragged in practice; rejecting them would throw away most
    of a real corpus.
    """
    width = len(table.headers)
    fixed = []
    for row in table.rows:
        if len(row) < width:
            row = row + [""] * (width - len(row))
            report.padded_rows += 1
        elif len(row) > width:
            row = row[:width]
            report.truncated_rows += 1
        fixed.append(row)
    table.rows = fixed


def _table_from_canonical(record: dict) -> Table:
    return Table(
        id=str(record["id"]),
        caption=_cell(record.get("caption", "")),
        page_title=_cell(record.get("page_title", "")),
        section_title=_cell(record.get("section_title", "")),
        headers=_string_list(record.get("headers")),
        rows=[_string_list(r) for r in record.get("rows") or []],
    )


def _table_from_wikitables(table_id: str, record: dict) -> Table:
    return Table(
        id=str(table_id),
        caption=_cell(record.get("caption", "")),
        page_title=_cell(record.get("pgTitle", "")),
        section_title=_cell(record.get("secondTitle", "")),
        headers=_string_list(record.get("title")),
        rows=[_string_list(r) for r in record.get("data") or []],
    )


def _table_from_webquerytable(record: dict) -> Table:
    sub = record.get("sub_caption", record.get("subcaption", ""))
    headers = record.get("headers", record.get("header"))
    rows = record.get("rows", record.get("data"))
    return Table(
        id=str(record.get("id", record.get("table_id"))),
        caption=_cell(record.get("caption", "")),
        page_title="",
        section_title=_cell(sub),
        headers=_string_list(headers),
        rows=[_string_list(r) for r in rows or []],
    )


def _iter_records(path: Path, fmt: str, report: LoadReport):
    """Yield (id hint, record) pairs in file order.

    The wikitables dump is a single JSON object keyed by table id; the other
    formats are line-delimited records.
    """
    text = path.read_text(encoding="utf-8")
    if fmt == "wikitables":
        # The dump ships as one JSON object keyed by table id; accept JSONL too.
        try:
            blob = json.loads(text)
        except json.JSONDecodeError:
            blob = None
        if isinstance(blob, dict) and blob and all(isinstance(v, dict) for v in blob.values()):
            for table_id, record in blob.items():
                yield table_id, record
            return
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            report.note(f"{path}:{lineno}: unparseable record ({exc.msg})")
            continue
        if not isinstance(record, dict):
            report.note(f"{path}:{lineno}: record is not an object")
            continue
        yield record.get("id"), record


def load_tables(path: str | Path, format: str = "canonical") -> TableCorpus:
    """Load tables in the declared format.

    Malformed records are skipped with a per-record diagnostic; duplicate
    ids and files with zero valid tables are errors.
    """
    if format not in TABLE_FORMATS:
        raise ValueError(f"unknown table format {format!r}; expected one of {TABLE_FORMATS}")
    path = Path(path)
    report = LoadReport()
    tables: list[Table] = []
    seen: set[str] = set()
    for id_hint, record in _iter_records(path, format, report):
        try:
            if format == "canonical":
                table = _table_from_canonical(record)
            elif format == "wikitables":
                if id_hint is None:
                    raise KeyError("id")
                table = _table_from_wikitables(id_hint, record)
            else:
                table = _table_from_webquerytable(record)
        except (KeyError, TypeError) as exc:
            report.note(f"{path}: record {id_hint!r} missing required field ({exc})")
            continue
        if not table.id or table.id == "None":
            report.note(f"{path}: record with empty id skipped")
            continue
        if table.id in seen:
            raise CorpusError(f"{path}: duplicate table id {table.id!r}")
        seen.add(table.id)
        _conform_rows(table, report)
        tables.append(table)
    if not tables:
        raise CorpusError(f"{path}: no valid tables")
    return TableCorpus(tables, report)


def load_queries(path: str | Path) -> list[Query]:
    """Load tab-separated ``id<TAB>text`` queries, one per nonempty line."""
    path = Path(path)
    queries: list[Query] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            if "\t" not in line:
                raise CorpusError(f"{path}:{lineno}: expected 'id<TAB>text'")
            qid, text = line.split("\t", 1)
            text = " ".join(text.split())
            if not qid:
                raise CorpusError(f"{path}:{lineno}: empty query id")
            if not text:
                raise CorpusError(f"{path}:{lineno}: empty query text")
            if qid in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate query id {qid!r}")
            seen.add(qid)
            queries.append(Query(id=qid, text=text))
    if not queries:
        raise CorpusError(f"{path}: no queries")
    return queries


def load_qrels(path: str | Path) -> list[Judgment]:
    """Load ``qid 0 table_id grade`` judgments."""
    path = Path(path)
    judgments: list[Judgment] = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise CorpusError(f"{path}:{lineno}: expected 'qid 0 table_id grade'")
            qid, _, table_id, raw_grade = parts
            try:
                grade = int(raw_grade)
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: grade {raw_grade!r} is not an integer") from None
            if grade < 0:
                raise CorpusError(f"{path}:{lineno}: negative grade {grade}")
            key = (qid, table_id)
            if key in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate judgment for {key}")
            seen.add(key)
            judgments.append(Judgment(query_id=qid, table_id=table_id, grade=grade))
    if not judgments:
        raise CorpusError(f"{path}: no judgments")
    grades = sorted({j.grade for j in judgments})
    logger.info("%s: %d judgments, grade alphabet %s", path, len(judgments), grades)
    return judgments


class FeatureStore:
    """Per-pair feature vectors keyed by (query_id, table_id)."""

    def __init__(self, vectors: dict[tuple[str, str], np.ndarray], dimension: int):
        self._vectors = vectors
        self.dimension = dimension

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, query_id: str, table_id: str) -> np.ndarray | None:
        """Return the pair's vector, or None to signal feature-less scoring."""
        return self._vectors.get((query_id, table_id))

    def missing(self, pairs: list[tuple[str, str]]) -> list[tuple[str, str]]:
        return [p for p in pairs if p not in self._vectors]


def load_features(path: str | Path) -> FeatureStore:
    """Load comma-delimited per-pair features with a ``qid,table_id,f1..fd`` header."""
    path = Path(path)
    vectors: dict[tuple[str, str], np.ndarray] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty feature file") from None
        if len(header) < 3 or header[0] != "qid" or header[1] != "table_id":
            raise CorpusError(f"{path}: header must be 'qid,table_id,f1,...,fd'")
        dim = len(header) - 2
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise CorpusError(f"{path}:{lineno}: expected {dim + 2} columns, got {len(row)}")
            try:
                values = np.array([float(x) for x in row[2:]], dtype=float)
            except ValueError:
                raise CorpusError(f"{path}:{lineno}: non-numeric feature value") from None
            if not np.all(np.isfinite(values)):
                raise CorpusError(f"{path}:{lineno}: non-finite feature value")
            key = (row[0], row[1])
            if key in vectors:
                raise CorpusError(f"{path}:{lineno}: duplicate feature row for {key}")
            vectors[key] = values
    if not vectors:
        raise CorpusError(f"{path}: no feature rows")
    return FeatureStore(vectors, dim)


@dataclass(frozen=True)
class FieldStat:
    mean: float
    max: int
    frac_over_512: float
    frac_over_128: float


STAT_FIELDS = ("query", "caption", "page title", "section title", "header", "table", "all")


def _stat(lengths: list[int]) -> FieldStat:
    n = len(lengths)
    return FieldStat(
        mean=sum(lengths) / n,
        max=max(lengths),
        frac_over_512=sum(1 for x in lengths if x > 512) / n,
        frac_over_128=sum(1 for x in lengths if x > 128) / n,
    )


def corpus_stats(
    tables, queries: list[Query], vocab: WordPieceVocab
) -> dict[str, FieldStat]:
    """Per-field WordPiece token-length statistics.

    ``table`` covers the data cells only (headers are their own field) and
    ``all`` is the per-table sum over caption, page title, section title,
    header, and body.
    """
    tables = list(tables)
    if not tables or not queries:
        raise CorpusError("corpus_stats requires at least one table and one query")

    def count(text: str) -> int:
        return len(wordpiece_tokenize(text, vocab))

    lengths: dict[str, list[int]] = {name: [] for name in STAT_FIELDS}
    for q in queries:
        lengths["query"].append(count(q.text))
    for t in tables:
        caption = count(t.caption)
        page = count(t.page_title)
        section = count(t.section_title)
        header = count(" ".join(t.headers))
        body = count(" ".join(cell for row in t.rows for cell in row))
        lengths["caption"].append(caption)
        lengths["page title"].append(page)
        lengths["section title"].append(section)
        lengths["header"].append(header)
        lengths["table"].append(body)
        lengths["all"].append(caption + page + section + header + body)
    stats = {name: _stat(values) for name, values in lengths.items()}
    for stat in stats.values():
        assert stat.mean <= stat.max + 1e-9 and math.isfinite(stat.mean)
    return stats
