"""Command-line interface.

Subcommands mirror the pipeline stages: ``stats``, ``select``, ``encode``,
``score``, ``train-head``, ``cv``, and ``compare``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import corpus as corpus_mod
from .corpus import corpus_stats
from .embed import load_vectors
from .encoder import Budgets, pack, render, write_batch
from .evaluation import MetricReport, RankedRun, write_run
from .fusion import TrainConfig, save_head, train_head
from .pipeline import (
    ITEM_CHOICES,
    MODE_CHOICES,
    CorpusBundle,
    RunConfig,
    compare as compare_reports,
    gather_features,
    judged_pairs,
    load_inputs,
    pack_pair,
    run_cv,
)
from .scorer import RemoteScorer, load_cached_features, score_native
from .selector import salience_from_tokens, select as select_items
from .textproc import load_vocab, simple_tokenize


def _parse_budgets(budgets: str | None, max_len: int | None) -> Budgets:
    values = json.loads(budgets) if budgets else {}
    if max_len is not None:
        values["max_len"] = max_len
    return Budgets(**values)


corpus_options = [
    click.option("--tables", required=True, type=click.Path(exists=True)),
    click.option("--format", "tables_format", default="canonical",
                 type=click.Choice(corpus_mod.TABLE_FORMATS), show_default=True),
    click.option("--queries", required=True, type=click.Path(exists=True)),
]


def _apply(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
def main():
    """Table search with salience-selected content under a token budget."""


@main.command()
@_apply(corpus_options)
@click.option("--vocab", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="Also write stats as JSON.")
def stats(tables, tables_format, queries, vocab, out):
    """Per-field token-length statistics after WordPiece tokenization."""
    table_corpus = corpus_mod.load_tables(tables, format=tables_format)
    query_list = corpus_mod.load_queries(queries)
    vocabulary = load_vocab(vocab)
    result = corpus_stats(table_corpus, query_list, vocabulary)
    header = f"{'field':<15}{'mean':>10}{'max':>10}{'>512':>10}{'>128':>10}"
    click.echo(header)
    for name, stat in result.items():
        click.echo(
            f"{name:<15}{stat.mean:>10.1f}{stat.max:>10}"
            f"{stat.frac_over_512:>10.3%}{stat.frac_over_128:>10.3%}"
        )
    if out:
        record = {
            name: {
                "mean": stat.mean,
                "max": stat.max,
                "frac_over_512": stat.frac_over_512,
                "frac_over_128": stat.frac_over_128,
            }
            for name, stat in result.items()
        }
        Path(out).write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")


pair_options = corpus_options + [
    click.option("--qrels", required=True, type=click.Path(exists=True)),
    click.option("--vocab", required=True, type=click.Path(exists=True)),
    click.option("--vectors", type=click.Path(exists=True), default=None),
    click.option("--items", default="row", type=click.Choice(ITEM_CHOICES), show_default=True),
    click.option("--mode", default="max", type=click.Choice(MODE_CHOICES), show_default=True),
    click.option("--max-len", type=int, default=None),
    click.option("--budgets", default=None, help='JSON object, e.g. \'{"caption": 20}\'.'),
    click.option("--seed", type=int, default=0, show_default=True),
]


def _bundle_from_flags(
    tables, tables_format, queries, qrels, vocab, vectors, items, mode,
    max_len, budgets, seed, scorer="native", endpoint=None, features=None, out="out",
) -> tuple[RunConfig, CorpusBundle]:
    config = RunConfig(
        tables=tables,
        tables_format=tables_format,
        queries=queries,
        qrels=qrels,
        vocab=vocab,
        vectors=vectors,
        features=features,
        items=items,
        mode=mode,
        budgets=_parse_budgets(budgets, max_len),
        scorer=scorer,
        endpoint=endpoint,
        seed=seed,
        out=out,
    )
    return config, load_inputs(config)


@main.command(name="select")
@_apply(pair_options)
@click.option("--out", required=True, type=click.Path())
def select_cmd(tables, tables_format, queries, qrels, vocab, vectors, items, mode,
               max_len, budgets, seed, out):
    """Dump salience-ordered items for every judged pair (JSONL)."""
    if items == "none":
        raise click.UsageError("select needs a real item kind (row, col, or cell)")
    config, bundle = _bundle_from_flags(
        tables, tables_format, queries, qrels, vocab, vectors, items, mode,
        max_len, budgets, seed,
    )
    kind = "column" if items == "col" else items
    with open(out, "w", encoding="utf-8") as fh:
        for pair in judged_pairs(bundle):
            ordered = select_items(
                pair.table, pair.query, mode, kind, bundle.store, seed=seed
            )
            query_tokens = simple_tokenize(pair.query.text)
            for rank, item in enumerate(ordered):
                value = (
                    None
                    if mode == "random"
                    else salience_from_tokens(item.tokens, query_tokens, mode, bundle.store)
                )
                fh.write(
                    json.dumps(
                        {
                            "query_id": pair.query.id,
                            "table_id": pair.table.id,
                            "rank": rank,
                            "kind": item.kind,
                            "origin": list(item.origin),
                            "score": value,
                            "raw_text": item.raw_text,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    click.echo(f"wrote item dump to {out}")


@main.command()
@_apply(pair_options)
@click.option("--out", required=True, type=click.Path())
def encode(tables, tables_format, queries, qrels, vocab, vectors, items, mode,
           max_len, budgets, seed, out):
    """Pack every judged pair and write wire records (JSONL)."""
    config, bundle = _bundle_from_flags(
        tables, tables_format, queries, qrels, vocab, vectors, items, mode,
        max_len, budgets, seed,
    )
    records = []
    for pair in judged_pairs(bundle):
        record = render(pack_pair(config, bundle, pair))
        record["key"] = pair.key
        record["grade"] = pair.grade
        records.append(record)
    write_batch(records, out)
    click.echo(f"wrote {len(records)} wire records to {out}")


@main.command()
@_apply(pair_options)
@click.option("--scorer", default="native", type=click.Choice(["native", "remote"]), show_default=True)
@click.option("--endpoint", default=None, help="Scorer service URL for --scorer remote.")
@click.option("--out", required=True, type=click.Path())
@click.option("--tag", default="tablerank", show_default=True)
def score(tables, tables_format, queries, qrels, vocab, vectors, items, mode,
          max_len, budgets, seed, scorer, endpoint, out, tag):
    """Score judged pairs with the raw scorer and write a run file."""
    config, bundle = _bundle_from_flags(
        tables, tables_format, queries, qrels, vocab, vectors, items, mode,
        max_len, budgets, seed, scorer=scorer, endpoint=endpoint,
    )
    pairs = judged_pairs(bundle)
    packed = [pack_pair(config, bundle, p) for p in pairs]
    if scorer == "native":
        values = [score_native(pk, p.query, bundle.store) for pk, p in zip(packed, pairs)]
    else:
        client = RemoteScorer(endpoint)
        by_key = client.score([(p.key, render(pk)) for p, pk in zip(pairs, packed)])
        values = [by_key[p.key] for p in pairs]
    run = RankedRun()
    scored: dict[str, list[tuple[str, float]]] = {}
    for pair, value in zip(pairs, values):
        scored.setdefault(pair.query.id, []).append((pair.table.id, value))
    for qid, entries in scored.items():
        run.add(qid, entries)
    write_run(run, out, tag=tag)
    click.echo(f"wrote run file to {out}")


@main.command(name="train-head")
@click.option("--cache", required=True, type=click.Path(exists=True),
              help="Cached scorer feature vectors (npz).")
@click.option("--qrels", required=True, type=click.Path(exists=True))
@click.option("--features", type=click.Path(exists=True), default=None)
@click.option("--epochs", type=int, default=5, show_default=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--lr", type=float, default=1e-5, show_default=True)
@click.option("--warmup", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train_head_cmd(cache, qrels, features, epochs, batch_size, lr, warmup, seed, out):
    """Train a fusion head on cached scorer features (scorer weights frozen)."""
    feature_cache = load_cached_features(cache)
    judgments = corpus_mod.load_qrels(qrels)
    extra_store = corpus_mod.load_features(features) if features else None
    samples = []
    skipped = 0
    for j in judgments:
        f_bert = feature_cache.get(j.query_id, j.table_id)
        if f_bert is None:
            skipped += 1
            continue
        v_a = extra_store.get(j.query_id, j.table_id) if extra_store else None
        if extra_store is not None and v_a is None:
            skipped += 1
            continue
        samples.append((f_bert, v_a, j.grade))
    if skipped:
        click.echo(f"skipped {skipped} judgments missing cached or additional features", err=True)
    config = TrainConfig(
        epochs=epochs, batch_size=batch_size, learning_rate=lr, warmup=warmup, seed=seed
    )
    head = train_head(samples, config)
    save_head(head, out)
    click.echo(f"trained head (d={head.d}, h={head.h}) on {len(samples)} samples -> {out}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--items", default=None, type=click.Choice(ITEM_CHOICES))
@click.option("--mode", default=None, type=click.Choice(MODE_CHOICES))
@click.option("--max-len", type=int, default=None)
@click.option("--budgets", default=None)
@click.option("--scorer", default=None, type=click.Choice(["native", "remote"]))
@click.option("--endpoint", default=None)
@click.option("--folds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default=None, type=click.Path())
def cv(config_path, items, mode, max_len, budgets, scorer, endpoint, folds, seed, out):
    """Cross-validated evaluation from a JSON config plus flag overrides."""
    overrides = {
        "items": items,
        "mode": mode,
        "scorer": scorer,
        "endpoint": endpoint,
        "folds": folds,
        "seed": seed,
        "out": out,
    }
    config = RunConfig.from_file(config_path, **overrides)
    if budgets or max_len is not None:
        base = json.loads(budgets) if budgets else {
            "caption": config.budgets.caption,
            "section_title": config.budgets.section_title,
            "page_title": config.budgets.page_title,
            "headers": config.budgets.headers,
            "max_len": config.budgets.max_len,
        }
        if max_len is not None:
            base["max_len"] = max_len
        config = replace(config, budgets=Budgets(**base))
    report = run_cv(config)
    agg = report.aggregates
    for metric in report.metrics:
        click.echo(f"{metric:<10}{agg[metric]:.4f}")
    click.echo(f"outputs in {config.out}/")


@main.command(name="compare")
@click.argument("report_a", type=click.Path(exists=True))
@click.argument("report_b", type=click.Path(exists=True))
def compare_cmd(report_a, report_b):
    """Significance table for two metric reports (JSON)."""
    a = MetricReport.from_json(report_a)
    b = MetricReport.from_json(report_b)
    rows = compare_reports(a, b)
    click.echo(f"{'metric':<10}{'mean A':>10}{'mean B':>10}{'t':>10}{'p':>12}  sig")
    for row in rows:
        click.echo(
            f"{row.metric:<10}{row.mean_a:>10.4f}{row.mean_b:>10.4f}"
            f"{row.t:>10.4f}{row.p:>12.6f}  {row.marker}"
        )


if __name__ == "__main__":
    sys.exit(main())
