"""
Identity testing against a known SRE reference from sample access to an unknown distribution.

The ℓ1 tester truncates the infinite domain to words of length at most θ and runs a tolerant plug-in
test on the finite remainder. The ℓ∞ tester first collects the heavy words of the unknown distribution
and then compares empirical frequencies on those words only.
"""

import functools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Mapping, NamedTuple, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from fastmcp.utilities.logging import get_logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from stochlang.distribution import (
    Alphabet,
    EmpiricalDistribution,
    NormalizeBy,
    Word,
    check_budget,
    l1_distance_truncated,
    make_word,
)
from stochlang.errors import AlphabetError, BudgetExceeded, EmptySampleError, ExhaustedSourceError, WeightError
from stochlang.settings import get_settings
from stochlang.sre import (
    Choice,
    SreExpr,
    SreMassFunction,
    Star,
    domain_words,
    eval_sre,
    sample_sre,
    sre_symbols,
    truncation_threshold,
    weight_sites,
    with_weight,
)
from stochlang.stochlang_utils import is_open_unit, words_up_to

logger = get_logger(__name__)

Verdict = Literal["Accept", "Reject"]
TestMode = Literal["l1", "linf"]

INT64_MAX = 2**63 - 1


class TesterConfig(BaseModel):
    """
    Parameters of one identity test.

    ``inner_thresholds`` defaults to (ε/3, ε). ``delta`` is the target failure probability; the ℓ1
    tester's fixed confidence of 0.8 corresponds to the default 0.2. ``conservative`` replaces the
    default ℓ1 sample count with ⌈8k/(ε₂−ε₁)²⌉ unless an explicit override is given. With
    ``workers`` > 1 an SRE source is split into that many spawned streams whose tables are merged.
    """

    __test__ = False
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(gt=0, lt=1)
    delta: float = Field(default=0.2, gt=0, lt=1)
    seed: int = Field(default_factory=lambda: get_settings().default_seed)
    sample_budget_override: Optional[int] = Field(default=None, ge=1)
    inner_thresholds: Optional[Tuple[float, float]] = None
    normalize_by_total: bool = False
    conservative: bool = False
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="before")
    @classmethod
    def default_thresholds(cls, data):
        if isinstance(data, dict) and data.get("inner_thresholds") is None and "epsilon" in data:
            data = {**data, "inner_thresholds": (data["epsilon"] / 3, data["epsilon"])}
        return data

    @model_validator(mode="after")
    def check_thresholds(self):
        low, high = self.inner_thresholds
        if not 0 < low < high:
            raise ValueError(f"inner thresholds must satisfy 0 < ε₁ < ε₂, got ({low}, {high})")
        return self

    @property
    def normalize_by(self) -> NormalizeBy:
        return "drawn" if self.normalize_by_total else "retained"


class TestOutcome(BaseModel):
    """Verdict of a single test with the diagnostics needed to reproduce it."""

    __test__ = False
    model_config = ConfigDict(frozen=True)

    verdict: Verdict
    statistic: float
    threshold_used: float
    samples_drawn: int
    samples_discarded: int
    theta: int
    domain_size_k: int
    mode: TestMode = "l1"
    seed: int = 0

    @property
    def accepted(self) -> bool:
        return self.verdict == "Accept"


# ============================================================================
# Sample sources
# ============================================================================

class SampleSource(Protocol):
    """Independent word draws from the unknown distribution."""

    alphabet: Alphabet

    def draw(self, n: int) -> List[Word]:
        ...


class SreSampleSource:
    """Draws from an SRE with a private seeded generator."""

    def __init__(
        self,
        expr: SreExpr,
        seed: Union[int, np.random.SeedSequence] = 0,
        alphabet: Optional[Alphabet] = None,
    ):
        self.expr = expr
        self.alphabet = alphabet if alphabet is not None else Alphabet(sre_symbols(expr))
        missing = set(sre_symbols(expr)) - set(self.alphabet.symbols)
        if missing:
            raise AlphabetError(f"expression uses symbols {sorted(missing)} outside {self.alphabet.text!r}")
        self.seed_sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.rng = np.random.default_rng(self.seed_sequence)

    def draw(self, n: int) -> List[Word]:
        return [sample_sre(self.expr, self.rng) for _ in range(n)]

    def spawn(self, worker: int) -> "SreSampleSource":
        """An independent stream for the given worker index, reproducible from the parent seed."""
        parent = self.seed_sequence
        child = np.random.SeedSequence(parent.entropy, spawn_key=(*parent.spawn_key, worker))
        return SreSampleSource(self.expr, child, self.alphabet)


class ReplaySampleSource:
    """Serves recorded words in order and refuses to read past the end."""

    def __init__(self, words: Sequence[Word], alphabet: Alphabet):
        self.alphabet = alphabet
        self.words = [make_word(word, alphabet) for word in words]
        self.position = 0

    @property
    def remaining(self) -> int:
        return len(self.words) - self.position

    def draw(self, n: int) -> List[Word]:
        if n > self.remaining:
            raise ExhaustedSourceError(
                f"replay source holds {self.remaining} more words but {n} were requested"
            )
        batch = self.words[self.position:self.position + n]
        self.position += n
        return batch


class TruncatedSampleSource:
    """Rejection sampler keeping only words of length at most ``max_len`` from another source."""

    def __init__(self, inner: SampleSource, max_len: int, max_attempts: int = 1000):
        self.inner = inner
        self.alphabet = inner.alphabet
        self.max_len = max_len
        self.max_attempts = max_attempts

    def draw(self, n: int) -> List[Word]:
        kept: List[Word] = []
        for _ in range(self.max_attempts):
            if len(kept) >= n:
                break
            kept.extend(w for w in self.inner.draw(n - len(kept)) if len(w) <= self.max_len)
        if len(kept) < n:
            raise ExhaustedSourceError(f"only {len(kept)} of {n} draws had length <= {self.max_len}")
        return kept


def collect_samples(
    source: SampleSource, n: int, threshold: Optional[int] = None, workers: int = 1
) -> EmpiricalDistribution:
    """
    Tally n draws from the source, truncated at the threshold.

    An SRE source with several workers draws its share on each spawned stream and the per-stream
    tables are merged; the result depends on the worker count but not on thread scheduling.
    """
    if workers <= 1 or not isinstance(source, SreSampleSource) or n < workers:
        return EmpiricalDistribution.from_words(source.draw(n), source.alphabet, threshold=threshold)
    shares = [n // workers + (1 if i < n % workers else 0) for i in range(workers)]

    def tally(worker: int) -> EmpiricalDistribution:
        stream = source.spawn(worker)
        return EmpiricalDistribution.from_words(stream.draw(shares[worker]), source.alphabet, threshold=threshold)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        tables = list(pool.map(tally, range(workers)))
    return functools.reduce(EmpiricalDistribution.merge, tables)


# ============================================================================
# Sample complexity
# ============================================================================

class DomainSize(NamedTuple):
    exact: int
    bound: float


def _ceil(value: float) -> int:
    # Rounding noise such as 2000.0000000000002 must not push the count up by one.
    return math.ceil(round(value, 9))


def domain_size(alphabet: Alphabet, theta: int) -> DomainSize:
    """
    Exact truncated-domain size Σ_{i=1}^{θ}|Σ|^i together with the coarser bound |Σ|^(θ+1).

    The bound is degenerate for a single-symbol alphabet, so callers use ``exact``; a bound that
    does not fit in 64 bits is reported as infinity.

    Raises:
        BudgetExceeded: If the exact count does not fit in a signed 64-bit integer.
    """
    if theta < 1:
        raise ValueError(f"θ must be at least 1, got {theta}")
    exact = words_up_to(len(alphabet), theta)
    if exact > INT64_MAX:
        raise BudgetExceeded(f"domain size for |Σ|={len(alphabet)}, θ={theta} overflows 64 bits")
    bound = len(alphabet) ** (theta + 1)
    return DomainSize(exact=exact, bound=bound if bound <= INT64_MAX else math.inf)


def sample_count(k: int, epsilon: float, c1: Optional[float] = None, c2: Optional[float] = None) -> int:
    """N = ⌈C₁·√k·log(k+1)/ε² + C₂·k/log k⌉, constants from settings unless given."""
    if k < 2:
        raise ValueError(f"sample count needs a domain of at least 2 words, got {k}")
    settings = get_settings()
    c1 = settings.sample_c1 if c1 is None else c1
    c2 = settings.sample_c2 if c2 is None else c2
    return _ceil(c1 * math.sqrt(k) * math.log(k + 1) / epsilon**2 + c2 * k / math.log(k))


def conservative_sample_count(k: int, epsilon1: float, epsilon2: float) -> int:
    """⌈8k/(ε₂−ε₁)²⌉, enough for the plug-in statistic on its own."""
    if not 0 < epsilon1 < epsilon2:
        raise ValueError(f"thresholds must satisfy 0 < ε₁ < ε₂, got ({epsilon1}, {epsilon2})")
    return _ceil(8 * k / (epsilon2 - epsilon1) ** 2)


def heavy_hitter_sample_count(epsilon: float, delta: float) -> int:
    """Draws needed to see every ε-heavy word at least once with probability 1 − δ."""
    if not (is_open_unit(epsilon) and is_open_unit(delta)):
        raise ValueError(f"ε and δ must lie in (0,1), got ({epsilon}, {delta})")
    return _ceil(math.log(1 / (epsilon * delta)) / epsilon)


def hoeffding_sample_count(k: int, epsilon: float, delta: float) -> int:
    """⌈log(2k/δ)/(2ε²)⌉: all k frequencies within ε with probability 1 − δ."""
    if k < 1 or epsilon <= 0 or not 0 < delta <= 1:
        raise ValueError(f"need k >= 1, ε > 0 and δ in (0,1], got ({k}, {epsilon}, {delta})")
    return _ceil(math.log(2 * k / delta) / (2 * epsilon**2))


def l1_sample_budget(k: int, cfg: TesterConfig) -> int:
    """The number of draws the ℓ1 tester makes for a truncated domain of k words."""
    if cfg.sample_budget_override is not None:
        return cfg.sample_budget_override
    if cfg.conservative:
        low, high = cfg.inner_thresholds
        return conservative_sample_count(k, low, high)
    return sample_count(max(k, 2), cfg.epsilon)


# ============================================================================
# Testers
# ============================================================================

def finite_tolerant_test(
    q: Mapping[Word, float],
    samples: EmpiricalDistribution,
    epsilon1: float,
    epsilon2: float,
    normalize_by: NormalizeBy = "retained",
    seed: int = 0,
) -> TestOutcome:
    """
    Plug-in tolerant test on a finite domain.

    The statistic is Σ_w |ê(w) − q(w)| over the domain of q and the observed words; the test accepts
    iff it is at most the midpoint (ε₁+ε₂)/2.

    Raises:
        EmptySampleError: If no samples were retained.
    """
    if not 0 < epsilon1 < epsilon2:
        raise ValueError(f"thresholds must satisfy 0 < ε₁ < ε₂, got ({epsilon1}, {epsilon2})")
    if samples.retained == 0:
        raise EmptySampleError("no samples survived truncation")
    domain = dict.fromkeys(q)
    domain.update(dict.fromkeys(samples.counts))
    statistic = math.fsum(abs(samples.frequency(w, normalize_by) - q.get(w, 0.0)) for w in domain)
    threshold = (epsilon1 + epsilon2) / 2
    return TestOutcome(
        verdict="Accept" if statistic <= threshold else "Reject",
        statistic=statistic,
        threshold_used=threshold,
        samples_drawn=samples.total_drawn,
        samples_discarded=samples.discarded,
        theta=samples.threshold or max((len(w) for w in domain), default=0),
        domain_size_k=len(q),
        mode="l1",
        seed=seed,
    )


def _check_reference(expr: SreExpr, alphabet: Alphabet) -> None:
    missing = set(sre_symbols(expr)) - set(alphabet.symbols)
    if missing:
        raise AlphabetError(f"reference uses symbols {sorted(missing)} outside {alphabet.text!r}")


def l1_identity_test(reference: SreExpr, source: SampleSource, cfg: TesterConfig) -> TestOutcome:
    """
    Test ‖P − Q‖₁ small against large, Q given by ``reference`` and P by ``source``.

    Truncates at θ = truncation_threshold(Q, ε), draws N words (discarded long words still count
    toward N) and runs the plug-in test against the unnormalized restriction of Q to length ≤ θ.

    Raises:
        BudgetExceeded: If the truncated domain is larger than the enumeration budget.
    """
    alphabet = source.alphabet
    _check_reference(reference, alphabet)
    theta = truncation_threshold(reference, cfg.epsilon).theta
    size = domain_size(alphabet, theta)
    logger.info(f"Truncated domain at θ={theta}: {size.exact} words (|Σ|^(θ+1) bound {size.bound})")
    check_budget(len(alphabet), theta)

    n = l1_sample_budget(size.exact, cfg)
    samples = collect_samples(source, n, threshold=theta, workers=cfg.workers)
    logger.debug(f"Drew {n} samples, discarded {samples.discarded} longer than θ={theta}")

    q = dict(domain_words(reference, theta, alphabet))
    low, high = cfg.inner_thresholds
    outcome = finite_tolerant_test(q, samples, low, high, normalize_by=cfg.normalize_by, seed=cfg.seed)
    return outcome.model_copy(update={"theta": theta, "domain_size_k": size.exact})


def linf_identity_test(reference: SreExpr, source: SampleSource, cfg: TesterConfig) -> TestOutcome:
    """
    Test max_x |P(x) − Q(x)| ≤ ε from samples of P.

    Stage one draws enough words to observe every ε-heavy word of P; stage two estimates P on those
    words from fresh draws and compares with the exact Q. ``theta`` in the outcome is the longest
    heavy word and ``domain_size_k`` the number of heavy words.
    """
    alphabet = source.alphabet
    _check_reference(reference, alphabet)
    first = heavy_hitter_sample_count(cfg.epsilon, cfg.delta / 2)
    heavy = list(dict.fromkeys(make_word(w, alphabet) for w in source.draw(first)))
    if not heavy:
        logger.warning("No heavy words observed; accepting without a second stage")
        return TestOutcome(
            verdict="Accept",
            statistic=0.0,
            threshold_used=cfg.epsilon,
            samples_drawn=first,
            samples_discarded=0,
            theta=0,
            domain_size_k=0,
            mode="linf",
            seed=cfg.seed,
        )

    second = hoeffding_sample_count(len(heavy), cfg.epsilon / 2, cfg.delta / 2)
    logger.debug(f"Stage one: {first} draws, {len(heavy)} heavy words; stage two: {second} draws")
    counts = EmpiricalDistribution.from_words(source.draw(second), alphabet)
    statistic = max(abs(counts.frequency(w) - eval_sre(reference, w)) for w in heavy)
    return TestOutcome(
        verdict="Accept" if statistic <= cfg.epsilon else "Reject",
        statistic=statistic,
        threshold_used=cfg.epsilon,
        samples_drawn=first + second,
        samples_discarded=0,
        theta=max(len(w) for w in heavy),
        domain_size_k=len(heavy),
        mode="linf",
        seed=cfg.seed,
    )


def identity_test(reference: SreExpr, source: SampleSource, cfg: TesterConfig, mode: TestMode = "l1") -> TestOutcome:
    if mode == "l1":
        return l1_identity_test(reference, source, cfg)
    return linf_identity_test(reference, source, cfg)


# ============================================================================
# Harnesses
# ============================================================================

def shared_alphabet(*exprs: SreExpr) -> Alphabet:
    """Symbols of all expressions, in order of first appearance."""
    symbols = dict.fromkeys(symbol for expr in exprs for symbol in sre_symbols(expr))
    return Alphabet(tuple(symbols))


def plant_alternative(
    reference: SreExpr,
    target: float,
    theta: int,
    alphabet: Optional[Alphabet] = None,
    tolerance: float = 1e-6,
    metric: TestMode = "l1",
    heavy_floor: float = 0.0,
) -> SreExpr:
    """
    Perturb one weight of ``reference`` until its truncated distance to the original reaches ``target``.

    The distance is ℓ1 or, with ``metric="linf"``, the largest pointwise gap over words up to θ whose
    mass under the perturbed expression is at least ``heavy_floor``. The ℓ∞ tester only compares
    words it observes as heavy, so a gap on a light word would not make the alternative detectable.

    Choice weights are tried first in pre-order, then Star weights. Along each weight the distance is
    bisected between the current value and whichever end of (0,1) reaches the target; the returned
    expression is at distance at least ``target`` and within ``tolerance`` of it.

    Raises:
        WeightError: If no single weight can reach the target distance.
    """
    if alphabet is None:
        alphabet = shared_alphabet(reference)
    base = SreMassFunction(reference, alphabet)
    base_table = dict(domain_words(reference, theta, alphabet)) if metric == "linf" else {}

    def distance(expr: SreExpr) -> float:
        if metric == "l1":
            return l1_distance_truncated(SreMassFunction(expr, alphabet), base, theta)
        gaps = [abs(p - base_table[w]) for w, p in domain_words(expr, theta, alphabet) if p >= heavy_floor]
        return max(gaps, default=0.0)

    sites = weight_sites(reference)
    ordered = [s for s in sites if isinstance(s[1], Choice)] + [s for s in sites if isinstance(s[1], Star)]
    for path, node in ordered:
        for end in (1 - 1e-9, 1e-9):
            if distance(with_weight(reference, path, end)) < target:
                continue
            near, far = node.alpha, end
            for _ in range(200):
                middle = (near + far) / 2
                reached = distance(with_weight(reference, path, middle))
                if reached < target:
                    near = middle
                    continue
                far = middle
                if reached - target <= tolerance:
                    break
            logger.debug(f"Planted weight {far!r} at {path} for truncated {metric} target {target}")
            return with_weight(reference, path, far)
    raise WeightError(f"no single weight of the reference reaches truncated {metric} distance {target}")


class TrialSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    accept_rate: float
    mean_samples: float
    mean_ms: float
    outcomes: List[TestOutcome]


def run_trials(
    reference: SreExpr,
    generator: SreExpr,
    cfg: TesterConfig,
    trials: int,
    mode: TestMode = "l1",
    workers: int = 1,
    alphabet: Optional[Alphabet] = None,
) -> TrialSummary:
    """
    Repeat a test ``trials`` times; trial i samples ``generator`` on stream i spawned from cfg.seed.

    Trials are independent, so they may run on several workers; outcomes come back in trial order and
    do not depend on the worker count.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    if alphabet is None:
        alphabet = shared_alphabet(reference, generator)
    parent = SreSampleSource(generator, seed=cfg.seed, alphabet=alphabet)

    def trial(index: int) -> Tuple[TestOutcome, float]:
        source = parent.spawn(index)
        started = time.perf_counter()
        outcome = identity_test(reference, source, cfg, mode)
        return outcome, (time.perf_counter() - started) * 1000

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(trial, range(trials)))
    outcomes = [outcome for outcome, _ in results]
    return TrialSummary(
        accept_rate=sum(o.accepted for o in outcomes) / trials,
        mean_samples=sum(o.samples_drawn for o in outcomes) / trials,
        mean_ms=sum(ms for _, ms in results) / trials,
        outcomes=outcomes,
    )
