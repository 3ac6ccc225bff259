"""
Geometric string distributions P_w^α, Dirac approximation and approximation by convex mixtures.
"""

import itertools
import math
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from fastmcp.utilities.logging import get_logger
from pydantic import BaseModel, ConfigDict, Field, field_validator

from stochlang.distribution import Alphabet, MassFunction, Word
from stochlang.errors import BudgetExceeded, WeightError
from stochlang.settings import get_settings
from stochlang.sre import Atom, Choice, Concat, SreExpr, Star
from stochlang.stochlang_constants import DIRAC_SAFETY_MARGIN, MIXTURE_WEIGHT_TOLERANCE
from stochlang.stochlang_utils import is_open_unit, power_exponent

logger = get_logger(__name__)

# Largest double below one
ALPHA_CEILING = math.nextafter(1.0, 0.0)


class GeometricDistribution(BaseModel):
    """Mass α(1−α)^(k−1) on base^k for k ≥ 1, zero elsewhere."""

    model_config = ConfigDict(frozen=True)

    base: str = Field(min_length=1)
    alpha: float = Field(gt=0, lt=1)


class GeometricMixture(BaseModel):
    """Convex combination Σ λ_i P_i of geometric distributions."""

    model_config = ConfigDict(frozen=True)

    components: List[Tuple[float, GeometricDistribution]] = Field(min_length=1)
    heuristic: bool = False

    @field_validator("components")
    @classmethod
    def check_weights(cls, components):
        for weight, _ in components:
            if not 0.0 <= weight <= 1.0:
                raise ValueError(f"mixture weight {weight} outside [0,1]")
        total = math.fsum(weight for weight, _ in components)
        if abs(total - 1.0) > MIXTURE_WEIGHT_TOLERANCE:
            raise ValueError(f"mixture weights sum to {total!r}, not 1")
        return components

    @classmethod
    def from_pairs(cls, pairs: List[Tuple[float, str, float]], heuristic: bool = False) -> "GeometricMixture":
        """Build from (λ, word, α) triples."""
        return cls(
            components=[(weight, GeometricDistribution(base=word, alpha=alpha)) for weight, word, alpha in pairs],
            heuristic=heuristic,
        )


def geometric_pmf(g: GeometricDistribution, u: Word) -> float:
    """α(1−α)^(k−1) if u = w^k, else 0."""
    k = power_exponent(u, g.base)
    if k == 0:
        return 0.0
    return g.alpha * (1 - g.alpha) ** (k - 1)


def mixture_pmf(m: GeometricMixture, u: Word) -> float:
    return math.fsum(weight * geometric_pmf(g, u) for weight, g in m.components)


def dirac_distance(alpha: float) -> float:
    """Exact ℓ1 distance between δ_w and P_w^α: (1−α) on w plus α·Σ_{k≥2}(1−α)^(k−1) elsewhere."""
    return 2 * (1 - alpha)


def naive_dirac_distance(alpha: float) -> float:
    """
    Closed form α/(1−α) sometimes quoted for the same distance.

    It grows with α instead of shrinking, so it is never used to choose α.
    """
    return alpha / (1 - alpha)


def dirac_approx(w: Word, epsilon: float) -> GeometricDistribution:
    """
    P_w^α with 2(1−α) ≤ ε, i.e. α = 1 − ε/2 plus a safety margin.
    """
    if not is_open_unit(epsilon):
        raise ValueError(f"epsilon must lie in (0,1), got {epsilon}")
    alpha = min(1 - epsilon / 2 + DIRAC_SAFETY_MARGIN, ALPHA_CEILING)
    return GeometricDistribution(base=w, alpha=alpha)


def _positive_table(p: Mapping[Word, float]) -> Dict[Word, float]:
    table = {word: float(value) for word, value in p.items() if value > 0}
    if not table:
        raise ValueError("distribution has empty support")
    total = math.fsum(table.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"masses sum to {total!r}, not 1")
    return {word: value / total for word, value in table.items()}


def approximate_finite_support(p: Mapping[Word, float], epsilon: float) -> GeometricMixture:
    """
    Mixture Σ_w p(w)·P_w^α with ℓ1 error at most ε, by convexity of the ℓ1 norm.
    """
    table = _positive_table(p)
    return GeometricMixture(components=[(weight, dirac_approx(word, epsilon)) for word, weight in table.items()])


def _words_of_length(alphabet: Alphabet, length: int) -> Iterator[Word]:
    for letters in itertools.product(alphabet.symbols, repeat=length):
        yield "".join(letters)


def universal_approx(r: MassFunction, epsilon: float, budget: Optional[int] = None) -> GeometricMixture:
    """
    Approximate a stochastic language within ℓ1 distance ε.

    Words are visited by increasing length until the collected set S carries mass above 1 − ε/4;
    r restricted to S and renormalized is ε/2-close to r, and its finite-support approximation at ε/2
    closes the gap.

    Raises:
        BudgetExceeded: If 1 − ε/4 is not reached within the enumeration budget.
    """
    if not is_open_unit(epsilon):
        raise ValueError(f"epsilon must lie in (0,1), got {epsilon}")
    if budget is None:
        budget = get_settings().enumeration_budget
    target = 1 - epsilon / 4
    support: Dict[Word, float] = {}
    visited = 0
    for length in itertools.count(1):
        for w in _words_of_length(r.alphabet, length):
            visited += 1
            if visited > budget:
                raise BudgetExceeded(
                    f"mass {math.fsum(support.values()):.6g} after {budget} words is still below 1 - ε/4 = {target}"
                )
            value = r.mass(w)
            if value <= 0:
                continue
            support[w] = value
            total = math.fsum(support.values())
            if total > target:
                logger.debug(f"Collected {len(support)} words of mass {total:.6g} up to length {length}")
                return approximate_finite_support({word: v / total for word, v in support.items()}, epsilon / 2)


def _word_sre(w: Word) -> SreExpr:
    expr: SreExpr = Atom(w[0])
    for symbol in w[1:]:
        expr = Concat(expr, Atom(symbol))
    return expr


def mixture_to_sre(m: GeometricMixture) -> SreExpr:
    """
    Right-nested Choice chain over starred words realizing the mixture weights exactly.

    The i-th choice weight is λ_i / (1 − Σ_{j<i} λ_j); zero-weight components are dropped.

    Raises:
        WeightError: If a conditioned weight leaves (0,1).
    """
    components = [(weight, g) for weight, g in m.components if weight > 0]
    starred = [Star(_word_sre(g.base), g.alpha) for _, g in components]
    conditioned = []
    remaining = 1.0
    for weight, _ in components[:-1]:
        ratio = weight / remaining
        if not is_open_unit(ratio):
            raise WeightError(f"conditioned mixture weight {ratio!r} outside (0,1)")
        conditioned.append(ratio)
        remaining -= weight
    expr = starred[-1]
    for ratio, part in zip(reversed(conditioned), reversed(starred[:-1])):
        expr = Choice(ratio, part, expr)
    return expr


def kl_heuristic_mixture(p: Mapping[Word, float]) -> GeometricMixture:
    """
    Experimental mixture Σ_w p(w)·P_w^(α_w) with α_w = 1 − exp(−p(w)/|w|).

    No error bound is claimed; compare against p with truncated_kl only.
    """
    table = _positive_table(p)
    components = []
    for word, weight in table.items():
        alpha = min(max(-math.expm1(-weight / len(word)), 1e-12), ALPHA_CEILING)
        components.append((weight, GeometricDistribution(base=word, alpha=alpha)))
    return GeometricMixture(components=components, heuristic=True)


class MixtureMassFunction(MassFunction):
    """A mixture seen as a mass function with total 1."""

    def __init__(self, mixture: GeometricMixture, alphabet: Alphabet):
        self.mixture = mixture
        self.alphabet = alphabet
        self.declared_total = 1.0

    def mass(self, word: Word) -> float:
        return mixture_pmf(self.mixture, word)
