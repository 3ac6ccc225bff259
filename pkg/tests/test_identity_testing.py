"""
Tests for sample sources, sample-complexity formulas, the ℓ1 and ℓ∞ identity testers and the trial harness.
"""

import math

import pytest
from pydantic import ValidationError

from stochlang.bench import load_corpus, plant_far
from stochlang.distribution import Alphabet, EmpiricalDistribution, l1_distance_truncated
from stochlang.errors import AlphabetError, BudgetExceeded, EmptySampleError, ExhaustedSourceError, WeightError
from stochlang.identity_testing import (
    ReplaySampleSource,
    SreSampleSource,
    TesterConfig,
    TruncatedSampleSource,
    collect_samples,
    conservative_sample_count,
    domain_size,
    finite_tolerant_test,
    heavy_hitter_sample_count,
    hoeffding_sample_count,
    identity_test,
    l1_identity_test,
    l1_sample_budget,
    linf_identity_test,
    plant_alternative,
    run_trials,
    sample_count,
    shared_alphabet,
)
from stochlang.sre import Atom, SreMassFunction, Star, parse_sre, truncation_threshold

AB = Alphabet(("a", "b"))
UNARY = Alphabet(("a",))


# ============================================================================
# Configuration
# ============================================================================

def test_config_defaults():
    cfg = TesterConfig(epsilon=0.3)
    assert cfg.delta == 0.2
    assert cfg.inner_thresholds == pytest.approx((0.1, 0.3))
    assert cfg.normalize_by == "retained"
    assert TesterConfig(epsilon=0.3, normalize_by_total=True).normalize_by == "drawn"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"epsilon": 1.0},
        {"epsilon": 0.0},
        {"epsilon": 0.3, "delta": 1.0},
        {"epsilon": 0.3, "inner_thresholds": (0.3, 0.1)},
        {"epsilon": 0.3, "sample_budget_override": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        TesterConfig(**kwargs)


# ============================================================================
# Sample complexity
# ============================================================================

@pytest.mark.parametrize("size, theta, exact, bound", [(2, 3, 14, 16), (1, 5, 5, 1), (3, 2, 12, 27)])
def test_domain_size(size, theta, exact, bound):
    alphabet = Alphabet(tuple("abc"[:size]))
    assert domain_size(alphabet, theta) == (exact, bound)


def test_domain_size_overflow():
    with pytest.raises(BudgetExceeded):
        domain_size(AB, 63)


def test_domain_bound_overflow_is_infinite():
    size = domain_size(AB, 62)
    assert size.exact == 2**63 - 2
    assert size.bound == math.inf


def test_sample_count():
    assert sample_count(16, 0.25) == 749
    with pytest.raises(ValueError):
        sample_count(1, 0.25)


def test_sample_count_grows_with_domain_and_precision():
    assert sample_count(64, 0.25) > sample_count(16, 0.25)
    assert sample_count(16, 0.1) > sample_count(16, 0.25)


def test_conservative_sample_count():
    assert conservative_sample_count(10, 0.1, 0.3) == 2000
    with pytest.raises(ValueError):
        conservative_sample_count(10, 0.3, 0.1)


@pytest.mark.parametrize("epsilon, delta, expected", [(0.1, 0.1, 47), (0.5, 0.5, 3)])
def test_heavy_hitter_sample_count(epsilon, delta, expected):
    assert heavy_hitter_sample_count(epsilon, delta) == expected


@pytest.mark.parametrize("k, epsilon, delta, expected", [(10, 0.1, 0.05, 300), (1, 0.5, 1.0, 2)])
def test_hoeffding_sample_count(k, epsilon, delta, expected):
    assert hoeffding_sample_count(k, epsilon, delta) == expected


# ============================================================================
# Sample sources
# ============================================================================

def test_sre_source_is_reproducible(coin_star):
    assert SreSampleSource(coin_star, 5).draw(20) == SreSampleSource(coin_star, 5).draw(20)
    assert SreSampleSource(coin_star, 5).draw(20) != SreSampleSource(coin_star, 6).draw(20)


def test_spawned_streams_are_reproducible_and_distinct(coin_star):
    parent = SreSampleSource(coin_star, 11)
    assert parent.spawn(2).draw(10) == parent.spawn(2).draw(10)
    assert parent.spawn(1).draw(10) == SreSampleSource(coin_star, 11).spawn(1).draw(10)
    assert parent.spawn(0).draw(30) != parent.spawn(1).draw(30)


def test_sre_source_checks_alphabet(coin_star):
    with pytest.raises(AlphabetError):
        SreSampleSource(coin_star, 0, UNARY)


def test_replay_source_serves_in_order():
    source = ReplaySampleSource(["a", "ab", "b"], AB)
    assert source.draw(2) == ["a", "ab"]
    assert source.remaining == 1
    with pytest.raises(ExhaustedSourceError):
        source.draw(2)


def test_truncated_source(geometric_half):
    source = TruncatedSampleSource(SreSampleSource(geometric_half, 3), max_len=2)
    words = source.draw(100)
    assert len(words) == 100
    assert all(len(w) <= 2 for w in words)


# ============================================================================
# Finite tolerant test
# ============================================================================

def test_finite_test_accepts_exact_frequencies():
    samples = EmpiricalDistribution.from_words(["a"] * 5 + ["b"] * 5, AB, threshold=1)
    outcome = finite_tolerant_test({"a": 0.5, "b": 0.5}, samples, 0.1, 0.3)
    assert outcome.accepted
    assert outcome.statistic == pytest.approx(0.0)
    assert outcome.threshold_used == pytest.approx(0.2)


def test_finite_test_counts_unexpected_words():
    samples = EmpiricalDistribution.from_words(["ab"] * 10, AB, threshold=2)
    outcome = finite_tolerant_test({"a": 0.5, "b": 0.5}, samples, 0.1, 0.3)
    assert outcome.verdict == "Reject"
    assert outcome.statistic == pytest.approx(2.0)


def test_finite_test_needs_retained_samples():
    samples = EmpiricalDistribution.from_words(["ab"], AB, threshold=1)
    with pytest.raises(EmptySampleError):
        finite_tolerant_test({"a": 1.0}, samples, 0.1, 0.3)
    with pytest.raises(ValueError):
        finite_tolerant_test({"a": 1.0}, EmpiricalDistribution.from_words(["a"], AB), 0.3, 0.1)


# ============================================================================
# ℓ1 tester
# ============================================================================

def test_l1_uses_truncated_domain_and_sample_count(geometric_half):
    outcome = l1_identity_test(geometric_half, SreSampleSource(geometric_half, 0), TesterConfig(epsilon=0.3))
    assert outcome.theta == 4
    assert outcome.domain_size_k == 4
    assert outcome.samples_drawn == sample_count(4, 0.3) == 155
    assert outcome.mode == "l1"
    assert outcome.threshold_used == pytest.approx(0.2)


def test_l1_accepts_identical_distribution(coin_star):
    cfg = TesterConfig(epsilon=0.3, seed=1, sample_budget_override=5000)
    outcome = l1_identity_test(coin_star, SreSampleSource(coin_star, 1), cfg)
    assert outcome.accepted
    assert outcome.samples_drawn == 5000
    assert outcome.samples_discarded > 0


def test_l1_rejects_distant_distribution(coin_star):
    cfg = TesterConfig(epsilon=0.3, sample_budget_override=2000)
    source = SreSampleSource(Star(Atom("a"), 0.5), 0, AB)
    outcome = l1_identity_test(coin_star, source, cfg)
    assert outcome.verdict == "Reject"
    assert outcome.statistic > 0.3


def test_l1_normalizing_by_all_draws(geometric_half):
    cfg = TesterConfig(epsilon=0.3, sample_budget_override=3000, normalize_by_total=True)
    assert l1_identity_test(geometric_half, SreSampleSource(geometric_half, 2), cfg).accepted


def test_l1_replay_source_too_short(geometric_half):
    source = ReplaySampleSource(["a", "aa"], UNARY)
    with pytest.raises(ExhaustedSourceError):
        l1_identity_test(geometric_half, source, TesterConfig(epsilon=0.3))


def test_l1_domain_over_budget():
    reference = Star(Atom("a"), 0.01)
    with pytest.raises(BudgetExceeded):
        l1_identity_test(reference, SreSampleSource(reference, 0, AB), TesterConfig(epsilon=0.1))


def test_reference_symbols_must_be_in_source_alphabet(coin_star, geometric_half):
    with pytest.raises(AlphabetError):
        l1_identity_test(coin_star, SreSampleSource(geometric_half, 0), TesterConfig(epsilon=0.3))


# ============================================================================
# ℓ∞ tester
# ============================================================================

def test_linf_accepts_identical_distribution(geometric_half):
    cfg = TesterConfig(epsilon=0.2, delta=0.2, seed=0)
    outcome = linf_identity_test(geometric_half, SreSampleSource(geometric_half, 0), cfg)
    assert outcome.accepted
    assert outcome.mode == "linf"
    assert outcome.samples_drawn > heavy_hitter_sample_count(0.2, 0.1) == 20
    assert outcome.theta >= 1
    assert outcome.domain_size_k >= 1


def test_linf_rejects_large_pointwise_gap(geometric_half):
    cfg = TesterConfig(epsilon=0.2, delta=0.2, seed=0)
    outcome = linf_identity_test(geometric_half, SreSampleSource(Star(Atom("a"), 0.9), 0), cfg)
    assert outcome.verdict == "Reject"
    assert outcome.statistic == pytest.approx(0.4, abs=0.1)


def test_identity_test_dispatches_on_mode(geometric_half):
    cfg = TesterConfig(epsilon=0.3)
    assert identity_test(geometric_half, SreSampleSource(geometric_half, 0), cfg, "linf").mode == "linf"
    assert identity_test(geometric_half, SreSampleSource(geometric_half, 0), cfg).mode == "l1"


# ============================================================================
# Harnesses
# ============================================================================

def test_shared_alphabet():
    assert shared_alphabet(parse_sre("'b'", AB), parse_sre("'a' . 'b'", AB)) == Alphabet(("b", "a"))


def test_plant_alternative_reaches_target(coin_star):
    far = plant_alternative(coin_star, 0.5, 4, AB)
    distance = l1_distance_truncated(SreMassFunction(far, AB), SreMassFunction(coin_star, AB), 4)
    assert 0.5 <= distance <= 0.5 + 1e-3
    assert far.alpha == coin_star.alpha
    assert far.inner.alpha != coin_star.inner.alpha


def test_plant_alternative_without_weights():
    with pytest.raises(WeightError):
        plant_alternative(Atom("a"), 0.5, 1)


def test_run_trials_is_seeded(geometric_half):
    cfg = TesterConfig(epsilon=0.3, seed=0, sample_budget_override=2000)
    serial = run_trials(geometric_half, geometric_half, cfg, 3)
    parallel = run_trials(geometric_half, geometric_half, cfg, 3, workers=2)
    assert serial.accept_rate == 1.0
    assert serial.mean_samples == 2000
    assert [o.seed for o in serial.outcomes] == [0, 0, 0]
    assert len({o.statistic for o in serial.outcomes}) > 1
    assert [o.statistic for o in serial.outcomes] == [o.statistic for o in parallel.outcomes]


def test_run_trials_needs_a_trial(geometric_half):
    with pytest.raises(ValueError):
        run_trials(geometric_half, geometric_half, TesterConfig(epsilon=0.3), 0)


def test_completeness_and_soundness_harness(coin_star):
    cfg = TesterConfig(epsilon=0.3, seed=100)
    theta = 4
    identical = run_trials(coin_star, coin_star, cfg, 10)
    far = run_trials(coin_star, plant_alternative(coin_star, 0.5, theta, AB), cfg, 10, alphabet=AB)
    assert identical.mean_samples == sample_count(30, 0.3)
    assert identical.accept_rate >= 0.8
    assert far.accept_rate <= 0.2


def test_linf_acceptance_rates(geometric_half):
    cfg = TesterConfig(epsilon=0.2, delta=0.2, seed=5)
    identical = run_trials(geometric_half, geometric_half, cfg, 50, "linf")
    far = run_trials(geometric_half, Star(Atom("a"), 0.9), cfg, 50, "linf", alphabet=UNARY)
    assert identical.accept_rate >= 0.8
    assert far.accept_rate <= 0.2


# ============================================================================
# Sample budgets and parallel collection
# ============================================================================

def test_conservative_budget(geometric_half):
    cfg = TesterConfig(epsilon=0.3, conservative=True)
    assert l1_sample_budget(4, cfg) == conservative_sample_count(4, 0.1, 0.3) == 800
    assert l1_sample_budget(4, TesterConfig(epsilon=0.3)) == 155
    assert l1_sample_budget(4, cfg.model_copy(update={"sample_budget_override": 10})) == 10
    outcome = l1_identity_test(geometric_half, SreSampleSource(geometric_half, 3), cfg)
    assert outcome.samples_drawn == 800
    assert outcome.accepted


def test_collect_samples_merges_spawned_streams(coin_star):
    source = SreSampleSource(coin_star, 4, AB)
    merged = collect_samples(source, 101, threshold=4, workers=3)
    assert merged.total_drawn == 101
    assert merged.retained + merged.discarded == 101
    parts = [
        EmpiricalDistribution.from_words(source.spawn(i).draw(n), AB, threshold=4)
        for i, n in enumerate((34, 34, 33))
    ]
    expected = parts[0].merge(parts[1]).merge(parts[2])
    assert dict(merged.counts) == dict(expected.counts)
    assert dict(collect_samples(source, 101, threshold=4, workers=3).counts) == dict(merged.counts)


def test_collect_samples_single_worker_draws_directly(coin_star):
    single = collect_samples(SreSampleSource(coin_star, 4, AB), 50, threshold=4)
    direct = EmpiricalDistribution.from_words(SreSampleSource(coin_star, 4, AB).draw(50), AB, threshold=4)
    assert dict(single.counts) == dict(direct.counts)


def test_collect_samples_replay_ignores_workers():
    source = ReplaySampleSource(["a", "b", "ab", "a"], AB)
    table = collect_samples(source, 4, workers=2)
    assert table.counts["a"] == 2
    assert source.remaining == 0


def test_l1_with_workers_is_reproducible(coin_star):
    cfg = TesterConfig(epsilon=0.3, seed=2, workers=4, sample_budget_override=4000)
    first = l1_identity_test(coin_star, SreSampleSource(coin_star, 2, AB), cfg)
    second = l1_identity_test(coin_star, SreSampleSource(coin_star, 2, AB), cfg)
    assert first.samples_drawn == 4000
    assert first.statistic == second.statistic
    assert first.accepted


@pytest.mark.slow
def test_errors_do_not_grow_with_budget(corpus_dir):
    def errors(case, generator, budget):
        cfg = TesterConfig(epsilon=0.3, seed=21, sample_budget_override=budget)
        summary = run_trials(case.expr, generator, cfg, 40, alphabet=case.alphabet)
        return 1 - summary.accept_rate if generator is case.expr else summary.accept_rate

    for case in load_corpus(corpus_dir):
        theta = truncation_threshold(case.expr, 0.3).theta
        far = plant_far(case.expr, "l1", 0.3, theta, case.alphabet)
        for generator in (case.expr, far):
            assert errors(case, generator, 800) <= errors(case, generator, 200) + 0.1, case.name
