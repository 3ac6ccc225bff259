"""
Stochastic regular expressions: syntax tree, concrete grammar, semantics, sampling and truncation.

Concrete grammar (precedence star > concat > choice, infix operators left-associative)::

    expr    := concat ( "+[" weight "]" concat )*
    concat  := postfix ( "." postfix )*
    postfix := primary ( "*[" weight "]" )*
    primary := "'" symbol "'" | "(" expr ")"

``r1 +[α] r2`` denotes α·r1 + (1−α)·r2 and ``r *[α]`` the discounted Kleene star.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from stochlang.distribution import Alphabet, MassFunction, Word, enumerate_words
from stochlang.errors import ParseError, WeightError, WordError
from stochlang.stochlang_utils import FLOAT_PATTERN, format_float, is_open_unit


@dataclass(frozen=True)
class Atom:
    symbol: str

    def __post_init__(self):
        if len(self.symbol) != 1:
            raise ValueError(f"atoms hold exactly one symbol, got {self.symbol!r}")


@dataclass(frozen=True)
class Choice:
    """α·left + (1−α)·right."""

    alpha: float
    left: "SreExpr"
    right: "SreExpr"

    def __post_init__(self):
        if not is_open_unit(self.alpha):
            raise WeightError(f"choice weight must lie in (0,1), got {self.alpha}")


@dataclass(frozen=True)
class Concat:
    """Cauchy product of two expressions."""

    left: "SreExpr"
    right: "SreExpr"


@dataclass(frozen=True)
class Star:
    """Discounted Kleene star: k ≥ 1 independent parts, k shifted-geometric(α)."""

    inner: "SreExpr"
    alpha: float

    def __post_init__(self):
        if not is_open_unit(self.alpha):
            raise WeightError(f"star weight must lie in (0,1), got {self.alpha}")


SreExpr = Union[Atom, Choice, Concat, Star]
Path = Tuple[int, ...]


class TruncationThreshold(BaseModel):
    """Length θ beyond which the expression keeps less than ε/3 of its mass."""

    model_config = ConfigDict(frozen=True)

    theta: int = Field(ge=1)
    epsilon_used: float = Field(gt=0, lt=1)


# ============================================================================
# Parsing and printing
# ============================================================================

class _Parser:
    """Recursive-descent parser over the concrete grammar."""

    def __init__(self, text: str, alphabet: Alphabet):
        self.text = text
        self.alphabet = alphabet
        self.pos = 0

    def fail(self, message: str, pos: Optional[int] = None) -> ParseError:
        pos = self.pos if pos is None else pos
        return ParseError(message, len(self.text[:pos].encode("utf-8")))

    def skip_space(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, token: str) -> bool:
        self.skip_space()
        return self.text.startswith(token, self.pos)

    def expect(self, token: str):
        if not self.peek(token):
            found = self.text[self.pos:self.pos + 1] or "end of input"
            raise self.fail(f"expected {token!r}, found {found!r}")
        self.pos += len(token)

    def parse(self) -> SreExpr:
        expr = self.expr()
        self.skip_space()
        if self.pos != len(self.text):
            raise self.fail(f"unexpected {self.text[self.pos]!r}")
        return expr

    def expr(self) -> SreExpr:
        left = self.concat()
        while self.peek("+["):
            self.pos += 2
            alpha = self.weight()
            left = Choice(alpha, left, self.concat())
        return left

    def concat(self) -> SreExpr:
        left = self.postfix()
        while self.peek("."):
            self.pos += 1
            left = Concat(left, self.postfix())
        return left

    def postfix(self) -> SreExpr:
        inner = self.primary()
        while self.peek("*["):
            self.pos += 2
            inner = Star(inner, self.weight())
        return inner

    def primary(self) -> SreExpr:
        self.skip_space()
        if self.peek("("):
            self.pos += 1
            inner = self.expr()
            self.expect(")")
            return inner
        if self.peek("'"):
            start = self.pos
            if self.pos + 2 >= len(self.text) or self.text[self.pos + 2] != "'":
                raise self.fail("atoms are written as a single quoted symbol, e.g. 'a'")
            symbol = self.text[self.pos + 1]
            if symbol not in self.alphabet:
                raise self.fail(f"unknown symbol {symbol!r} (alphabet {self.alphabet.text!r})", start + 1)
            self.pos += 3
            return Atom(symbol)
        found = self.text[self.pos:self.pos + 1] or "end of input"
        raise self.fail(f"expected an atom or '(', found {found!r}")

    def weight(self) -> float:
        self.skip_space()
        start = self.pos
        match = FLOAT_PATTERN.match(self.text, self.pos)
        if not match:
            raise self.fail("expected a decimal weight")
        value = float(match.group(0))
        if not is_open_unit(value):
            raise self.fail(f"weight {match.group(0)} must lie in (0,1)", start)
        self.pos = match.end()
        self.expect("]")
        return value


def parse_sre(text: str, alphabet: Alphabet) -> SreExpr:
    """
    Parse the concrete SRE grammar.

    Args:
        text (str): Expression text, e.g. ``('a' . 'b') *[0.5]``.
        alphabet (Alphabet): Declared alphabet; atoms must use its symbols.

    Returns:
        SreExpr: The syntax tree.

    Raises:
        ParseError: On unknown symbols, weights outside (0,1) or malformed syntax; carries the byte offset.
    """
    return _Parser(text, alphabet).parse()


def print_sre(r: SreExpr) -> str:
    """Canonical text with minimal parentheses; parse_sre(print_sre(r)) == r."""
    if isinstance(r, Atom):
        return f"'{r.symbol}'"
    if isinstance(r, Star):
        inner = print_sre(r.inner)
        if isinstance(r.inner, (Choice, Concat)):
            inner = f"({inner})"
        return f"{inner} *[{format_float(r.alpha)}]"
    if isinstance(r, Concat):
        left, right = print_sre(r.left), print_sre(r.right)
        if isinstance(r.left, Choice):
            left = f"({left})"
        if isinstance(r.right, (Choice, Concat)):
            right = f"({right})"
        return f"{left} . {right}"
    right = print_sre(r.right)
    if isinstance(r.right, Choice):
        right = f"({right})"
    return f"{print_sre(r.left)} +[{format_float(r.alpha)}] {right}"


# ============================================================================
# Structure helpers
# ============================================================================

def children(r: SreExpr) -> Tuple[SreExpr, ...]:
    if isinstance(r, Atom):
        return ()
    if isinstance(r, Star):
        return (r.inner,)
    return (r.left, r.right)


def sre_size(r: SreExpr) -> int:
    """Number of nodes."""
    return 1 + sum(sre_size(c) for c in children(r))


def sre_depth(r: SreExpr) -> int:
    return 1 + max((sre_depth(c) for c in children(r)), default=0)


def sre_symbols(r: SreExpr) -> Tuple[str, ...]:
    """Symbols used by the expression, in order of first appearance."""
    seen: List[str] = []
    stack = [r]
    while stack:
        node = stack.pop()
        if isinstance(node, Atom):
            if node.symbol not in seen:
                seen.append(node.symbol)
        else:
            stack.extend(reversed(children(node)))
    return tuple(seen)


def weight_sites(r: SreExpr, path: Path = ()) -> List[Tuple[Path, SreExpr]]:
    """Paths to every Choice and Star node in pre-order."""
    sites = [(path, r)] if isinstance(r, (Choice, Star)) else []
    for index, child in enumerate(children(r)):
        sites.extend(weight_sites(child, path + (index,)))
    return sites


def with_weight(r: SreExpr, path: Path, alpha: float) -> SreExpr:
    """Copy of r with the weight of the Choice or Star node at path replaced."""
    if not path:
        if isinstance(r, Choice):
            return Choice(alpha, r.left, r.right)
        if isinstance(r, Star):
            return Star(r.inner, alpha)
        raise ValueError("path does not lead to a weighted node")
    head, rest = path[0], path[1:]
    if isinstance(r, Star):
        return Star(with_weight(r.inner, rest, alpha), r.alpha)
    if isinstance(r, Choice):
        if head == 0:
            return Choice(r.alpha, with_weight(r.left, rest, alpha), r.right)
        return Choice(r.alpha, r.left, with_weight(r.right, rest, alpha))
    if isinstance(r, Concat):
        if head == 0:
            return Concat(with_weight(r.left, rest, alpha), r.right)
        return Concat(r.left, with_weight(r.right, rest, alpha))
    raise ValueError("path does not lead to a weighted node")


def random_sre(rng: np.random.Generator, alphabet: Alphabet, depth: int) -> SreExpr:
    """
    Draw a random expression of depth at most ``depth``.

    Weights are rounded to two decimals; star weights stay in [0.3, 0.9] so tails stay short.
    """
    if depth <= 1:
        return Atom(alphabet.symbols[int(rng.integers(len(alphabet)))])
    kind = int(rng.integers(4))
    if kind == 0:
        return Atom(alphabet.symbols[int(rng.integers(len(alphabet)))])
    if kind == 1:
        alpha = round(float(rng.uniform(0.1, 0.9)), 2)
        return Choice(alpha, random_sre(rng, alphabet, depth - 1), random_sre(rng, alphabet, depth - 1))
    if kind == 2:
        return Concat(random_sre(rng, alphabet, depth - 1), random_sre(rng, alphabet, depth - 1))
    return Star(random_sre(rng, alphabet, depth - 1), round(float(rng.uniform(0.3, 0.9)), 2))


# ============================================================================
# Semantics
# ============================================================================

def _substring_table(r: SreExpr, w: Word) -> np.ndarray:
    """
    T[i, j] = ⟦r⟧(w[i:j]) for i < j; zero on and below the diagonal (no empty parts).
    """
    n = len(w)
    if isinstance(r, Atom):
        table = np.zeros((n + 1, n + 1))
        for i, symbol in enumerate(w):
            if symbol == r.symbol:
                table[i, i + 1] = 1.0
        return table
    if isinstance(r, Choice):
        return r.alpha * _substring_table(r.left, w) + (1 - r.alpha) * _substring_table(r.right, w)
    if isinstance(r, Concat):
        return _substring_table(r.left, w) @ _substring_table(r.right, w)
    # S = α·R + (1−α)·R·S, solved row by row from the last position; R is strictly upper triangular.
    inner = _substring_table(r.inner, w)
    table = np.zeros_like(inner)
    for i in range(n - 1, -1, -1):
        table[i] = r.alpha * inner[i] + (1 - r.alpha) * (inner[i] @ table)
    return table


def eval_sre(r: SreExpr, w: Word) -> float:
    """
    Probability ⟦r⟧(w) under the recursive semantics.

    Every subexpression is evaluated once on all sub-words of w, so the cost is polynomial in |w|
    at every star nesting level.

    Raises:
        WordError: If w is empty.
    """
    if not w:
        raise WordError("the empty word carries no mass over non-empty strings")
    return float(_substring_table(r, w)[0, len(w)])


def sample_sre(r: SreExpr, rng: np.random.Generator) -> Word:
    """
    Draw one word distributed exactly as ⟦r⟧; deterministic given the generator state.
    """
    if isinstance(r, Atom):
        return r.symbol
    if isinstance(r, Choice):
        return sample_sre(r.left if rng.random() < r.alpha else r.right, rng)
    if isinstance(r, Concat):
        return sample_sre(r.left, rng) + sample_sre(r.right, rng)
    parts = int(rng.geometric(r.alpha))
    return "".join(sample_sre(r.inner, rng) for _ in range(parts))


def length_profile(r: SreExpr, max_len: int) -> np.ndarray:
    """
    Exact mass per length: entry n is Σ_{|w|=n} ⟦r⟧(w) for n = 1..max_len (entry 0 is always 0).
    """
    if isinstance(r, Atom):
        profile = np.zeros(max_len + 1)
        if max_len >= 1:
            profile[1] = 1.0
        return profile
    if isinstance(r, Choice):
        return r.alpha * length_profile(r.left, max_len) + (1 - r.alpha) * length_profile(r.right, max_len)
    if isinstance(r, Concat):
        return np.convolve(length_profile(r.left, max_len), length_profile(r.right, max_len))[: max_len + 1]
    inner = length_profile(r.inner, max_len)
    profile = np.zeros(max_len + 1)
    for n in range(1, max_len + 1):
        profile[n] = r.alpha * inner[n] + (1 - r.alpha) * float(inner[1:n] @ profile[n - 1:0:-1])
    return profile


def mass_up_to(r: SreExpr, theta: int, alphabet: Optional[Alphabet] = None, budget: Optional[int] = None) -> float:
    """
    Σ_{|w|≤θ} ⟦r⟧(w) by exhaustive enumeration over the expression's symbols (or the given alphabet).

    Raises:
        BudgetExceeded: If the enumeration is larger than the budget.
    """
    if alphabet is None:
        alphabet = Alphabet(sre_symbols(r))
    return math.fsum(eval_sre(r, w) for w in enumerate_words(alphabet, theta, budget))


def _star_repetitions(alpha: float, epsilon: float) -> int:
    repetitions = max(1, math.ceil(math.log(epsilon / 3) / math.log(1 - alpha)))
    # Rounding can land the quotient on an exact integer, where the tail equals ε/3.
    while (1 - alpha) ** repetitions >= epsilon / 3:
        repetitions += 1
    return repetitions


def _theta(r: SreExpr, epsilon: float) -> int:
    if isinstance(r, Atom):
        return 1
    if isinstance(r, Choice):
        return max(_theta(r.left, epsilon), _theta(r.right, epsilon))
    if isinstance(r, Concat):
        return _theta(r.left, epsilon) + _theta(r.right, epsilon)
    return _theta(r.inner, epsilon) * _star_repetitions(r.alpha, epsilon)


def truncation_threshold(r: SreExpr, epsilon: float) -> TruncationThreshold:
    """
    Structural length bound keeping all but ε/3 of the mass.

    θ(σ) = 1, θ(r1 + r2) = max, θ(r1 · r2) = sum, θ(r*_α) = θ(r)·⌈log(ε/3)/log(1−α)⌉.
    """
    if not is_open_unit(epsilon):
        raise ValueError(f"epsilon must lie in (0,1), got {epsilon}")
    return TruncationThreshold(theta=_theta(r, epsilon), epsilon_used=epsilon)


class SreMassFunction(MassFunction):
    """An expression seen as a mass function with total 1."""

    def __init__(self, expr: SreExpr, alphabet: Optional[Alphabet] = None):
        self.expr = expr
        self.alphabet = alphabet if alphabet is not None else Alphabet(sre_symbols(expr))
        self.declared_total = 1.0

    def mass(self, word: Word) -> float:
        return eval_sre(self.expr, word)


def domain_words(r: SreExpr, theta: int, alphabet: Optional[Alphabet] = None, budget: Optional[int] = None):
    """(word, ⟦r⟧(word)) for every word of length at most θ."""
    if alphabet is None:
        alphabet = Alphabet(sre_symbols(r))
    for w in enumerate_words(alphabet, theta, budget):
        yield w, eval_sre(r, w)
