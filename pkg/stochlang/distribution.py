"""
Distribution core: alphabets, words, mass functions over non-empty strings, normalization,
truncated distances and empirical frequency tables.
"""

import itertools
import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Dict, Iterable, Iterator, Literal, Mapping, Optional, Tuple

from stochlang.errors import AlphabetError, BudgetExceeded, EmptySampleError, NormalizationError, WordError
from stochlang.settings import get_settings
from stochlang.stochlang_utils import split_symbols, words_up_to

Word = str
NormalizeBy = Literal["retained", "drawn"]


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of distinct single-character symbols."""

    symbols: Tuple[str, ...]

    def __post_init__(self):
        if not self.symbols:
            raise AlphabetError("alphabet must contain at least one symbol")
        for symbol in self.symbols:
            if len(symbol) != 1 or symbol.isspace() or symbol in "'()#":
                raise AlphabetError(f"invalid alphabet symbol {symbol!r}")
        if len(set(self.symbols)) != len(self.symbols):
            raise AlphabetError(f"duplicate symbols in alphabet {''.join(self.symbols)!r}")

    @classmethod
    def parse(cls, text: str) -> "Alphabet":
        return cls(tuple(split_symbols(text)))

    def __iter__(self) -> Iterator[str]:
        return iter(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: object) -> bool:
        return symbol in self.symbols

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise AlphabetError(f"symbol {symbol!r} is not in alphabet {self.text!r}") from None

    @property
    def text(self) -> str:
        return "".join(self.symbols)


def make_word(text: str, alphabet: Alphabet) -> Word:
    """
    Validate a raw symbol string as a member of Σ⁺.

    Args:
        text (str): Concatenated symbols.
        alphabet (Alphabet): The alphabet the word must be drawn from.

    Returns:
        Word: The validated word.

    Raises:
        WordError: If the word is empty or uses a symbol outside the alphabet.
    """
    if not text:
        raise WordError("the empty word carries no mass over non-empty strings")
    for position, symbol in enumerate(text):
        if symbol not in alphabet:
            raise WordError(f"symbol {symbol!r} at position {position} is not in alphabet {alphabet.text!r}")
    return text


def enumerate_words(alphabet: Alphabet, max_len: int, budget: Optional[int] = None) -> Iterator[Word]:
    """
    Yield every word of length 1..max_len in length-lexicographic order.

    Raises:
        BudgetExceeded: Before yielding anything, if the number of words exceeds the budget.
    """
    if max_len < 1:
        raise ValueError(f"length bound must be at least 1, got {max_len}")
    check_budget(len(alphabet), max_len, budget)
    for length in range(1, max_len + 1):
        for letters in itertools.product(alphabet.symbols, repeat=length):
            yield "".join(letters)


def check_budget(alphabet_size: int, max_len: int, budget: Optional[int] = None) -> int:
    """Return the number of words up to max_len, raising BudgetExceeded when it is over budget."""
    if budget is None:
        budget = get_settings().enumeration_budget
    count = words_up_to(alphabet_size, max_len)
    if count > budget:
        raise BudgetExceeded(
            f"enumerating {count} words (|Σ|={alphabet_size}, length <= {max_len}) exceeds the budget of {budget}"
        )
    return count


class MassFunction(ABC):
    """Evaluation contract Word -> non-negative real, with an optional analytically known total."""

    alphabet: Alphabet
    declared_total: Optional[float] = None

    @abstractmethod
    def mass(self, word: Word) -> float:
        """Mass of a single non-empty word."""

    def __call__(self, word: Word) -> float:
        return self.mass(word)


class FiniteMassFunction(MassFunction):
    """Explicit table of masses; words not in the table have mass 0."""

    def __init__(self, table: Mapping[Word, float], alphabet: Alphabet, declared_total: Optional[float] = None):
        for word, value in table.items():
            make_word(word, alphabet)
            if value < 0 or not math.isfinite(value):
                raise ValueError(f"mass of {word!r} must be finite and non-negative, got {value}")
        self.table: Dict[Word, float] = dict(table)
        self.alphabet = alphabet
        self.declared_total = math.fsum(self.table.values()) if declared_total is None else declared_total

    @classmethod
    def dirac(cls, word: Word, alphabet: Alphabet) -> "FiniteMassFunction":
        return cls({word: 1.0}, alphabet)

    def mass(self, word: Word) -> float:
        make_word(word, self.alphabet)
        return self.table.get(word, 0.0)

    @property
    def support(self) -> Tuple[Word, ...]:
        return tuple(word for word, value in self.table.items() if value > 0)


class SeriesMassFunction(MassFunction):
    """Mass function given by a callable, e.g. an analytic power series."""

    def __init__(self, fn: Callable[[Word], float], alphabet: Alphabet, declared_total: Optional[float] = None):
        self.fn = fn
        self.alphabet = alphabet
        self.declared_total = declared_total

    def mass(self, word: Word) -> float:
        make_word(word, self.alphabet)
        return self.fn(word)


class ScaledMassFunction(MassFunction):
    """A mass function multiplied by a positive constant."""

    def __init__(self, inner: MassFunction, factor: float, declared_total: Optional[float]):
        self.inner = inner
        self.factor = factor
        self.alphabet = inner.alphabet
        self.declared_total = declared_total

    def mass(self, word: Word) -> float:
        return self.inner.mass(word) * self.factor


def poisson_series(lam: float, alphabet: Alphabet) -> SeriesMassFunction:
    """
    The series w ↦ λ^|w| / (|w|! · |Σ|^|w|), whose total is e^λ − 1.
    """
    size = len(alphabet)
    return SeriesMassFunction(
        lambda w: lam ** len(w) / (math.factorial(len(w)) * size ** len(w)),
        alphabet,
        declared_total=math.expm1(lam),
    )


def zeta_series(alphabet: Alphabet) -> SeriesMassFunction:
    """
    The unary series aⁿ ↦ 1/n², total π²/6. Its normalization has no finite first moment.
    """
    if len(alphabet) != 1:
        raise AlphabetError("the zeta series is defined over a single-symbol alphabet")
    return SeriesMassFunction(lambda w: 1.0 / len(w) ** 2, alphabet, declared_total=math.pi ** 2 / 6)


def normalize(m: MassFunction) -> MassFunction:
    """
    Scale a mass function by the inverse of its declared total.

    Raises:
        NormalizationError: If the total is missing, zero, negative or not finite.
    """
    total = m.declared_total
    if total is None or not math.isfinite(total) or total <= 0:
        raise NormalizationError(f"cannot normalize a mass function with total {total}")
    if total == 1.0:
        return m
    return ScaledMassFunction(m, 1.0 / total, declared_total=1.0)


def truncated_mass(m: MassFunction, theta: int, budget: Optional[int] = None) -> float:
    """Σ_{|w|≤θ} m(w) by exhaustive enumeration."""
    return math.fsum(m.mass(w) for w in enumerate_words(m.alphabet, theta, budget))


def _shared_alphabet(p: MassFunction, q: MassFunction) -> Alphabet:
    if p.alphabet != q.alphabet:
        raise AlphabetError(f"alphabets differ: {p.alphabet.text!r} vs {q.alphabet.text!r}")
    return p.alphabet


def l1_distance_truncated(p: MassFunction, q: MassFunction, theta: int, budget: Optional[int] = None) -> float:
    """
    Σ_{|w|≤θ} |p(w) − q(w)| by exhaustive enumeration, O(|Σ|^θ) evaluations.

    Raises:
        BudgetExceeded: If the truncated domain is larger than the enumeration budget.
    """
    alphabet = _shared_alphabet(p, q)
    return math.fsum(abs(p.mass(w) - q.mass(w)) for w in enumerate_words(alphabet, theta, budget))


def linf_distance_truncated(p: MassFunction, q: MassFunction, theta: int, budget: Optional[int] = None) -> float:
    """max_{|w|≤θ} |p(w) − q(w)|."""
    alphabet = _shared_alphabet(p, q)
    return max(abs(p.mass(w) - q.mass(w)) for w in enumerate_words(alphabet, theta, budget))


def truncated_kl(p: MassFunction, q: MassFunction, theta: int, budget: Optional[int] = None) -> float:
    """
    Σ_{|w|≤θ} p(w)·log(p(w)/q(w)), with 0·log(0/q) = 0 and p·log(p/0) = +∞.

    Diagnostic only: the truncated sum is not itself a divergence and may be negative.
    """
    alphabet = _shared_alphabet(p, q)
    terms = []
    for w in enumerate_words(alphabet, theta, budget):
        pw = p.mass(w)
        if pw == 0:
            continue
        qw = q.mass(w)
        if qw == 0:
            return math.inf
        terms.append(pw * math.log(pw / qw))
    return math.fsum(terms)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Frequency table over observed words, with the number of samples dropped by truncation."""

    alphabet: Alphabet
    counts: Mapping[Word, int] = field(default_factory=dict)
    total_drawn: int = 0
    discarded: int = 0
    threshold: Optional[int] = None

    def __post_init__(self):
        counts = dict(self.counts)
        for word, count in counts.items():
            make_word(word, self.alphabet)
            if count < 0:
                raise ValueError(f"count of {word!r} is negative")
            if self.threshold is not None and len(word) > self.threshold:
                raise ValueError(f"word {word!r} is longer than the truncation threshold {self.threshold}")
        if sum(counts.values()) + self.discarded != self.total_drawn:
            raise ValueError("counts plus discarded samples must equal the number of samples drawn")
        object.__setattr__(self, "counts", MappingProxyType(counts))

    @classmethod
    def from_words(cls, words: Iterable[Word], alphabet: Alphabet, threshold: Optional[int] = None) -> "EmpiricalDistribution":
        """Tally words, discarding those longer than the threshold."""
        counts: Counter = Counter()
        drawn = discarded = 0
        for word in words:
            drawn += 1
            if threshold is not None and len(word) > threshold:
                discarded += 1
            else:
                counts[word] += 1
        return cls(alphabet, dict(counts), drawn, discarded, threshold)

    @property
    def retained(self) -> int:
        return self.total_drawn - self.discarded

    def frequency(self, word: Word, normalize_by: NormalizeBy = "retained") -> float:
        divisor = self.retained if normalize_by == "retained" else self.total_drawn
        return self.counts.get(word, 0) / max(1, divisor)

    def merge(self, other: "EmpiricalDistribution") -> "EmpiricalDistribution":
        """Pointwise sum of two tables collected under the same alphabet and threshold."""
        if self.alphabet != other.alphabet:
            raise AlphabetError("cannot merge tables over different alphabets")
        if self.threshold != other.threshold:
            raise ValueError(f"cannot merge tables truncated at {self.threshold} and {other.threshold}")
        counts = Counter(self.counts)
        counts.update(other.counts)
        return EmpiricalDistribution(
            self.alphabet,
            dict(counts),
            self.total_drawn + other.total_drawn,
            self.discarded + other.discarded,
            self.threshold,
        )


def l1_distance_empirical(
    e: EmpiricalDistribution,
    q: MassFunction,
    theta: int,
    normalize_by: NormalizeBy = "retained",
    budget: Optional[int] = None,
) -> float:
    """
    Σ_{|w|≤θ} |ê(w) − q(w)|, where ê divides counts by the retained sample count (or by all draws).

    Words never observed contribute q(w).

    Raises:
        EmptySampleError: If no samples were retained.
        BudgetExceeded: If the truncated domain is larger than the enumeration budget.
    """
    if e.alphabet != q.alphabet:
        raise AlphabetError(f"alphabets differ: {e.alphabet.text!r} vs {q.alphabet.text!r}")
    if e.retained == 0:
        raise EmptySampleError("the empirical distribution holds no retained samples")
    if any(len(word) > theta for word in e.counts):
        raise ValueError(f"empirical distribution has words longer than θ={theta}")
    return math.fsum(
        abs(e.frequency(w, normalize_by) - q.mass(w)) for w in enumerate_words(q.alphabet, theta, budget)
    )
