import math

import numpy as np
import pytest

from tablerank.corpus import Query, Table
from tablerank.embed import VectorStore
from tablerank.selector import (
    SalienceSelector,
    salience,
    salience_from_tokens,
    select,
    slice_table,
)
from tablerank.textproc import simple_tokenize


def sample_table():
    return Table(
        id="t1",
        caption="caption",
        headers=["h1", "h2"],
        rows=[["a1", "a2"], ["b1", "b2"]],
    )


def brute_cosine(u, v):
    dot = sum(x * y for x, y in zip(u, v))
    nu = math.sqrt(sum(x * x for x in u))
    nv = math.sqrt(sum(x * x for x in v))
    if nu == 0 or nv == 0:
        return 0.0
    return dot / (nu * nv)


class TestSlice:
    def test_rows_exclude_header(self):
        items = slice_table(sample_table(), "row")
        assert len(items) == 2
        for item in items:
            assert "h1" not in item.raw_text and "h2" not in item.raw_text
            assert item.origin[1] == -1

    def test_columns_prepend_header(self):
        items = slice_table(sample_table(), "column")
        assert len(items) == 2
        for j, item in enumerate(items):
            assert item.raw_text.split()[0] == f"h{j + 1}"
            assert item.origin == (-1, j)

    def test_cells_have_distinct_origins(self):
        items = slice_table(sample_table(), "cell")
        assert len(items) == 4
        assert len({item.origin for item in items}) == 4
        assert all(o[0] >= 0 and o[1] >= 0 for o in (i.origin for i in items))

    def test_empty_cells_dropped(self):
        table = Table(id="t", headers=["h"], rows=[[""], ["x"], ["!!"]])
        items = slice_table(table, "cell")
        assert [i.raw_text for i in items] == ["x"]

    def test_empty_table_yields_empty_list(self):
        table = Table(id="t", headers=[], rows=[])
        for kind in ("row", "column", "cell"):
            assert slice_table(table, kind) == []

    def test_header_row_opt_in(self):
        items = slice_table(sample_table(), "row", include_header_row=True)
        assert len(items) == 3
        assert items[0].raw_text == "h1 h2"
        assert items[0].origin == (-1, -1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown item kind"):
            slice_table(sample_table(), "diagonal")


class TestSalience:
    def test_max_identical_word_is_one(self, toy_store):
        item = slice_table(Table(id="t", headers=["h"], rows=[["dog"]]), "cell")[0]
        value = salience(item, Query("q", "dog"), "max", toy_store)
        assert value == pytest.approx(1.0)

    def test_mean_orthogonal_is_zero(self):
        store = VectorStore({"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])})
        value = salience_from_tokens(("a",), ("b",), "mean", store)
        assert value == pytest.approx(0.0)

    def test_sum_matches_brute_force_double_loop(self, toy_store):
        query_tokens = ["dog", "paris"]
        item_tokens = ["cat", "tokyo", "tennis"]
        value = salience_from_tokens(item_tokens, query_tokens, "sum", toy_store)
        expected = 0.0
        for k in query_tokens:
            for w in item_tokens:
                expected += brute_cosine(toy_store.get(k), toy_store.get(w))
        assert value == pytest.approx(expected, abs=1e-12)

    def test_empty_pair_set_scores_zero(self, toy_store):
        assert salience_from_tokens(("zzz",), ("qqq",), "max", toy_store) == 0.0
        assert salience_from_tokens(("zzz",), ("qqq",), "sum", toy_store) == 0.0

    def test_random_mode_rejected(self, toy_store):
        with pytest.raises(ValueError, match="undefined"):
            salience_from_tokens(("dog",), ("dog",), "random", toy_store)

    def test_max_ignores_duplicates(self, toy_store):
        base = salience_from_tokens(("cat", "fish"), ("dog",), "max", toy_store)
        doubled = salience_from_tokens(("cat", "cat", "fish"), ("dog", "dog"), "max", toy_store)
        assert doubled == base

    def test_sum_and_mean_permutation_invariant(self, toy_store):
        item = ["cat", "fish", "bird"]
        query = ["dog", "paris"]
        for mode in ("mean", "sum"):
            a = salience_from_tokens(item, query, mode, toy_store)
            b = salience_from_tokens(item[::-1], query[::-1], mode, toy_store)
            assert a == pytest.approx(b, abs=1e-12)

    def test_rescaling_store_preserves_salience(self, toy_store):
        scaled = toy_store.scaled(3.7)
        item = ["cat", "fish"]
        query = ["dog"]
        for mode in ("mean", "sum", "max"):
            a = salience_from_tokens(item, query, mode, toy_store)
            b = salience_from_tokens(item, query, mode, scaled)
            assert a == pytest.approx(b, abs=1e-9)

    def test_max_at_least_average(self, toy_store):
        item = ["cat", "fish", "bird"]
        query = ["dog", "paris"]
        s_max = salience_from_tokens(item, query, "max", toy_store)
        s_sum = salience_from_tokens(item, query, "sum", toy_store)
        assert s_max >= s_sum / (len(query) * len(item)) - 1e-12


class TestSelect:
    def test_identical_items_keep_original_order(self, toy_store):
        table = Table(id="t", headers=["h"], rows=[["dog"], ["dog"], ["dog"]])
        query = Query("q", "dog")
        for mode in ("mean", "sum", "max"):
            ordered = select(table, query, mode, "row", toy_store)
            assert [i.origin for i in ordered] == [(0, -1), (1, -1), (2, -1)]

    def test_query_term_item_ranks_first(self, toy_store):
        # Brute-force score check: the row containing the query word must
        # outscore unrelated rows under max salience.
        table = Table(id="t", headers=["h"], rows=[["tokyo"], ["dog"], ["tennis"]])
        query = Query("q", "dog")
        scores = []
        for row in table.rows:
            best = -2.0
            for w in simple_tokenize(" ".join(row)):
                if toy_store.get(w) is not None:
                    best = max(best, brute_cosine(toy_store.get("dog"), toy_store.get(w)))
            scores.append(best)
        assert max(scores) == scores[1]
        ordered = select(table, query, "max", "row", toy_store)
        assert ordered[0].raw_text == "dog"

    def test_random_is_deterministic_per_seed(self, toy_store):
        table = sample_table()
        query = Query("q7", "dog cat")
        first = select(table, query, "random", "cell", None, seed=13)
        second = select(table, query, "random", "cell", None, seed=13)
        assert [i.origin for i in first] == [i.origin for i in second]

    def test_random_differs_across_pairs(self):
        # Same seed, different pair ids: permutations should differ for a
        # table with enough items.
        rows = [[f"w{i}", f"v{i}"] for i in range(6)]
        table_a = Table(id="ta", headers=["h1", "h2"], rows=rows)
        table_b = Table(id="tb", headers=["h1", "h2"], rows=rows)
        query = Query("q", "dog")
        a = [i.origin for i in select(table_a, query, "random", "cell", None, seed=5)]
        b = [i.origin for i in select(table_b, query, "random", "cell", None, seed=5)]
        assert a != b

    def test_select_is_permutation_of_slice(self, toy_store):
        table = sample_table()
        query = Query("q", "dog cat")
        for mode in ("mean", "sum", "max", "random"):
            for kind in ("row", "column", "cell"):
                sliced = slice_table(table, kind)
                ordered = select(table, query, mode, kind, toy_store, seed=3)
                assert sorted(i.origin for i in ordered) == sorted(i.origin for i in sliced)

    def test_all_oov_query_degrades_to_original_order(self, toy_store):
        table = sample_table()
        ordered = select(table, Query("q", "zzzz"), "max", "row", toy_store)
        assert [i.origin for i in ordered] == [(0, -1), (1, -1)]


class TestSalienceSelector:
    def test_transform_matches_select(self, toy_store):
        table = sample_table()
        query = Query("q", "dog")
        est = SalienceSelector(store=toy_store, kind="row", mode="max")
        out = est.transform([(query, table)])
        assert out[0] == select(table, query, "max", "row", toy_store)

    def test_get_params_round_trip(self, toy_store):
        est = SalienceSelector(store=toy_store, kind="cell", mode="sum", seed=9)
        params = est.get_params()
        assert params["kind"] == "cell"
        clone = SalienceSelector(**params)
        assert clone.mode == "sum" and clone.seed == 9

    def test_invalid_mode_rejected_at_fit(self):
        with pytest.raises(ValueError, match="mode"):
            SalienceSelector(mode="best").fit()
