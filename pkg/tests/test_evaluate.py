from __future__ import annotations

import json
import shutil

import pytest
from hypothesis import given
from hypothesis import strategies as st

from etsx.evaluate import (
    CorpusError, EvalConfig, bundled_corpus, candi_avg, load_corpus, mrr, rank_of, rank_sum, recall_at,
    run_corpus, with_ablation,
)


def test_mrr_oracle():
    # [DERIVED] (1 + 1/2 + 1/4 + 0) / 4
    assert mrr([1, 2, 4, None]) == pytest.approx(0.4375, abs=1e-12)


def test_mrr_empty_is_an_error():
    with pytest.raises(ValueError):
        mrr([])


@pytest.mark.parametrize("n, expected", [(19, 20), (20, 21), (21, 22)])
def test_rank_sum_miss_substitution(n, expected):
    assert rank_sum([(None, n)]) == expected


def test_rank_sum_adds_hits():
    assert rank_sum([(1, 5), (3, 5), (None, 2)]) == 1 + 3 + 20


def test_rank_of_and_candi_avg():
    assert rank_of(["a", "b", "c"], "b") == 2
    assert rank_of(["a"], "z") is None
    assert candi_avg([3, 4, 5]) == 4
    assert candi_avg([]) == 0.0


@given(st.lists(st.one_of(st.none(), st.integers(min_value=1, max_value=40)), min_size=1, max_size=30))
def test_recall_is_monotone_and_bounded(ranks):
    r = [recall_at(ranks, n) for n in (1, 5, 10, 50)]
    assert r == sorted(r) and r[-1] <= len(ranks)
    assert 0.0 <= mrr(ranks) <= 1.0


def test_bundled_corpus_loads():
    cases = load_corpus(bundled_corpus())
    assert [c.name for c in cases] == ["inherit", "keyvar_keyapi", "motivating", "native", "value"]
    assert {c.category for c in cases} <= {"A", "B"}


def test_corpus_errors(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "nope")
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)
    (tmp_path / "c1").mkdir()
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)


def test_default_metrics():
    res = run_corpus(bundled_corpus())
    s = res.summary
    assert [c.rank for c in res.cases] == [1, 3, 1, 2, 2]
    # [DERIVED] (1 + 1/3 + 1 + 1/2 + 1/2) / 5
    assert s.mrr == pytest.approx((1 + 1 / 3 + 1 + 0.5 + 0.5) / 5)
    assert s.rank_sum == 9 and s.r1 == 2 and s.r5 == 5
    assert set(s.per_category) == {"A", "B"}


def test_ablation_directions():
    base = run_corpus(bundled_corpus())
    b1 = run_corpus(bundled_corpus(), with_ablation(base.config, "b1"))
    b3 = run_corpus(bundled_corpus(), with_ablation(base.config, "b3"))
    b5 = run_corpus(bundled_corpus(), with_ablation(base.config, "b5"))
    assert b1.summary.candi_avg > base.summary.candi_avg
    assert b3.summary.mrr < base.summary.mrr
    assert {c.name: c.rank for c in b5.cases}["motivating"] is None


def test_unknown_ablation_rejected():
    with pytest.raises(ValueError):
        EvalConfig(ablate=frozenset({"b9"}))


def test_broken_case_is_recorded_not_fatal(tmp_path):
    shutil.copytree(bundled_corpus() / "value", tmp_path / "ok")
    bad = tmp_path / "bad"
    shutil.copytree(bundled_corpus() / "value", bad)
    (bad / "program.mir").write_text("mir/1\nclass broken\n")
    res = run_corpus(tmp_path)
    assert res.to_json()["failures"] == ["bad"]
    assert {c.name: c.rank for c in res.cases}["ok"] == 2


def test_explained_run_is_deterministic_across_workers():
    one = run_corpus(bundled_corpus(), EvalConfig(explain=True, workers=1)).dumps()
    four = run_corpus(bundled_corpus(), EvalConfig(explain=True, workers=4)).dumps()
    assert one == four
    motivating = [c for c in json.loads(one)["cases"] if c["name"] == "motivating"][0]
    assert motivating["explanation"]["candidates"][0]["origin"] == "backend"


def test_table_lists_every_case():
    res = run_corpus(bundled_corpus())
    table = res.table()
    for c in res.cases:
        assert c.name in table
    assert "MRR 0.6667" in table
