"""
Tests for corpus loading and acceptance-rate tables.
"""

import pytest

from stochlang.bench import FAR_SUFFIX, bench_rows, far_target, load_corpus, plant_far
from stochlang.sre import eval_sre
from stochlang.stochlang_constants import BENCH_COLUMNS


def test_load_corpus_is_sorted(corpus_dir):
    cases = load_corpus(corpus_dir)
    assert [case.name for case in cases] == ["biased_pair", "coin_star", "geometric_a", "nested_star", "prefix_star"]
    assert cases[2].alphabet.text == "a"


def test_load_corpus_needs_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_corpus(tmp_path)


def test_far_targets():
    assert far_target("l1", 0.3) == pytest.approx(0.5)
    assert far_target("linf", 0.3) == pytest.approx(0.6)


def test_l1_rows_include_planted_far(corpus_dir):
    cases = [case for case in load_corpus(corpus_dir) if case.name == "geometric_a"]
    rows = bench_rows(cases, trials=2, modes=("l1",))
    assert [row["case"] for row in rows] == ["geometric_a", "geometric_a" + FAR_SUFFIX]
    for row in rows:
        assert list(row) == BENCH_COLUMNS
        assert row["mode"] == "l1"
        assert row["epsilon"] == 0.3
        assert row["mean_N"] == 155
        assert 0.0 <= row["accept_rate"] <= 1.0
    assert rows[1]["accept_rate"] == 0.0


def test_unreachable_far_rows_are_skipped(corpus_dir):
    cases = [case for case in load_corpus(corpus_dir) if case.name == "geometric_a"]
    rows = bench_rows(cases, trials=1, modes=("linf",))
    assert [row["case"] for row in rows] == ["geometric_a"]


def test_rows_without_far(corpus_dir):
    cases = load_corpus(corpus_dir)[:2]
    rows = bench_rows(cases, trials=1, modes=("l1", "linf"), include_far=False)
    assert [(row["case"], row["mode"]) for row in rows] == [
        ("biased_pair", "l1"),
        ("biased_pair", "linf"),
        ("coin_star", "l1"),
        ("coin_star", "linf"),
    ]


def test_linf_far_gap_sits_on_a_heavy_word(corpus_dir):
    case = next(case for case in load_corpus(corpus_dir) if case.name == "geometric_a")
    far = plant_far(case.expr, "linf", 0.2, 10, case.alphabet)
    assert eval_sre(far, "a") >= 0.2
    assert abs(eval_sre(far, "a") - eval_sre(case.expr, "a")) >= 0.4


def test_linf_far_rows_are_rejected(corpus_dir):
    rows = bench_rows(load_corpus(corpus_dir), trials=50, epsilon=0.2, modes=("linf",))
    far_rows = [row for row in rows if row["case"].endswith(FAR_SUFFIX)]
    self_rows = [row for row in rows if not row["case"].endswith(FAR_SUFFIX)]
    assert far_rows
    assert len(self_rows) == 5
    for row in far_rows:
        assert row["accept_rate"] <= 0.2, row
    for row in self_rows:
        assert row["accept_rate"] >= 0.8, row


@pytest.mark.slow
def test_l1_completeness_and_soundness_over_corpus(corpus_dir):
    rows = bench_rows(load_corpus(corpus_dir), trials=50, epsilon=0.3, modes=("l1",))
    far_rows = [row for row in rows if row["case"].endswith(FAR_SUFFIX)]
    self_rows = [row for row in rows if not row["case"].endswith(FAR_SUFFIX)]
    assert len(far_rows) == 5
    for row in self_rows:
        assert row["accept_rate"] >= 0.8, row
    for row in far_rows:
        assert row["accept_rate"] <= 0.2, row
