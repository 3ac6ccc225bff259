"""
Cost register automata with linear updates, their weighted-automaton form, the total-weight
linear system and restriction to regular languages.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from fastmcp.utilities.logging import get_logger
from pydantic import BaseModel, ConfigDict

from stochlang.distribution import Alphabet, Word
from stochlang.errors import AlphabetError, SingularSystemError, WeightError, WordError
from stochlang.settings import get_settings
from stochlang.sre import Atom, Choice, Concat, SreExpr, sre_symbols

logger = get_logger(__name__)


def _frozen(array, dtype=float) -> np.ndarray:
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


def _flag_nonnegative(automaton: "LinearCra") -> "LinearCra":
    return dataclasses.replace(automaton, nonnegative=automaton.has_nonnegative_weights())


def _symbol_indices(alphabet: Alphabet, w: Word) -> List[int]:
    if not w:
        raise WordError("the empty word carries no mass over non-empty strings")
    return [alphabet.index(symbol) for symbol in w]


@dataclass(frozen=True, eq=False)
class LinearCra:
    """
    Deterministic automaton over states 0..n-1 with d real registers.

    Reading σ in state q moves to ``targets[q, σ]`` and applies ``x := updates[q, σ] @ x``;
    the value of a run ending in q is ``final[q] @ x``.
    """

    alphabet: Alphabet
    x_init: np.ndarray
    targets: np.ndarray
    updates: np.ndarray
    final: np.ndarray
    initial: int = 0
    nonnegative: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x_init", _frozen(self.x_init))
        object.__setattr__(self, "targets", _frozen(self.targets, dtype=int))
        object.__setattr__(self, "updates", _frozen(self.updates))
        object.__setattr__(self, "final", _frozen(self.final))
        states, symbols, d = self.num_states, len(self.alphabet), self.register_count
        if d < 1 or self.x_init.ndim != 1:
            raise ValueError("x_init must be a non-empty vector")
        if self.targets.shape != (states, symbols):
            raise ValueError(f"targets must have shape {(states, symbols)}, got {self.targets.shape}")
        if self.updates.shape != (states, symbols, d, d):
            raise ValueError(f"updates must have shape {(states, symbols, d, d)}, got {self.updates.shape}")
        if self.final.shape != (states, d):
            raise ValueError(f"final must have shape {(states, d)}, got {self.final.shape}")
        if self.targets.size and (self.targets.min() < 0 or self.targets.max() >= states):
            raise ValueError("transition target outside the state set")
        if not 0 <= self.initial < states:
            raise ValueError(f"initial state {self.initial} outside the state set")
        if self.nonnegative and not self.has_nonnegative_weights():
            raise WeightError("automaton is flagged non-negative but has a negative weight")

    @property
    def num_states(self) -> int:
        return self.final.shape[0]

    @property
    def register_count(self) -> int:
        return self.x_init.shape[0]

    def has_nonnegative_weights(self) -> bool:
        return bool((self.x_init >= 0).all() and (self.updates >= 0).all() and (self.final >= 0).all())


@dataclass(frozen=True, eq=False)
class AffineCra:
    """As LinearCra, with updates x := A x + b and finalization μ·x + c."""

    alphabet: Alphabet
    x_init: np.ndarray
    targets: np.ndarray
    updates: np.ndarray
    offsets: np.ndarray
    final: np.ndarray
    constants: np.ndarray
    initial: int = 0

    def __post_init__(self):
        for name in ("x_init", "updates", "offsets", "final", "constants"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "targets", _frozen(self.targets, dtype=int))
        linear = self.linear_part()
        if self.offsets.shape != linear.updates.shape[:3]:
            raise ValueError(f"offsets must have shape {linear.updates.shape[:3]}, got {self.offsets.shape}")
        if self.constants.shape != (linear.num_states,):
            raise ValueError(f"constants must have shape {(linear.num_states,)}, got {self.constants.shape}")

    def linear_part(self) -> LinearCra:
        return LinearCra(self.alphabet, self.x_init, self.targets, self.updates, self.final, self.initial)


@dataclass(frozen=True)
class Dfa:
    """Complete deterministic finite automaton over states 0..n-1."""

    alphabet: Alphabet
    transitions: Tuple[Tuple[int, ...], ...]
    accepting: FrozenSet[int]
    initial: int = 0

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(tuple(int(t) for t in row) for row in self.transitions))
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        states = len(self.transitions)
        if states < 1:
            raise ValueError("a DFA needs at least one state")
        for row in self.transitions:
            if len(row) != len(self.alphabet):
                raise ValueError("transition function must be total")
            if any(not 0 <= t < states for t in row):
                raise ValueError("transition target outside the state set")
        if not self.accepting <= set(range(states)):
            raise ValueError("accepting states must be states")
        if not 0 <= self.initial < states:
            raise ValueError(f"initial state {self.initial} outside the state set")

    @property
    def num_states(self) -> int:
        return len(self.transitions)

    def accepts(self, w: Word) -> bool:
        state = self.initial
        for index in _symbol_indices(self.alphabet, w):
            state = self.transitions[state][index]
        return state in self.accepting

    @classmethod
    def universal(cls, alphabet: Alphabet) -> "Dfa":
        return cls(alphabet, ((0,) * len(alphabet),), frozenset({0}))

    @classmethod
    def empty(cls, alphabet: Alphabet) -> "Dfa":
        return cls(alphabet, ((0,) * len(alphabet),), frozenset())

    @classmethod
    def length_modulo(cls, alphabet: Alphabet, modulus: int, remainder: int) -> "Dfa":
        """Words whose length is congruent to remainder modulo modulus."""
        rows = tuple(((state + 1) % modulus,) * len(alphabet) for state in range(modulus))
        return cls(alphabet, rows, frozenset({remainder % modulus}))

    @classmethod
    def single_word(cls, alphabet: Alphabet, w: Word) -> "Dfa":
        """Accepts exactly w; state len(w)+1 is the sink."""
        indices = _symbol_indices(alphabet, w)
        sink = len(w) + 1
        rows = []
        for position in range(len(w) + 2):
            row = [sink] * len(alphabet)
            if position < len(w):
                row[indices[position]] = position + 1
            rows.append(tuple(row))
        return cls(alphabet, tuple(rows), frozenset({len(w)}))


class TotalWeightSolution(BaseModel):
    """Solution of the total-weight system with its diagnostics."""

    model_config = ConfigDict(frozen=True)

    per_state: List[List[float]]
    total: float
    residual: float
    nonnegative: bool
    truncated_sum: float
    cross_check_length: int
    validated: bool

    @property
    def status(self) -> str:
        return "validated" if self.validated else "unvalidated"


class StochasticityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    stochastic: bool
    total: float
    finite: bool
    nonnegative: bool
    validated: bool


# ============================================================================
# Semantics
# ============================================================================

def eval_cra(automaton: LinearCra, w: Word) -> float:
    """
    Run the automaton on w and return μ_{q_n}ᵀ x_n.

    Raises:
        AlphabetError: If w uses a symbol outside the automaton's alphabet.
    """
    state, x = automaton.initial, automaton.x_init
    for index in _symbol_indices(automaton.alphabet, w):
        x = automaton.updates[state, index] @ x
        state = automaton.targets[state, index]
    return float(automaton.final[state] @ x)


def eval_affine(automaton: AffineCra, w: Word) -> float:
    """Direct interpreter for affine updates x := A x + b, value μ·x + c."""
    state, x = automaton.initial, automaton.x_init
    for index in _symbol_indices(automaton.alphabet, w):
        x = automaton.updates[state, index] @ x + automaton.offsets[state, index]
        state = automaton.targets[state, index]
    return float(automaton.final[state] @ x + automaton.constants[state])


def affine_to_linear(automaton: AffineCra) -> LinearCra:
    """
    Equivalent linear automaton with 2d registers.

    Updates become [[A, diag(b)], [0, I]], the initial valuation (x₀; 1…1) and the finalization
    (μ_q; c_q; 0…0); the lower half of the registers stays constantly 1.
    """
    linear = automaton.linear_part()
    states, symbols, d = linear.num_states, len(linear.alphabet), linear.register_count
    updates = np.zeros((states, symbols, 2 * d, 2 * d))
    for q in range(states):
        for s in range(symbols):
            updates[q, s, :d, :d] = linear.updates[q, s]
            updates[q, s, :d, d:] = np.diag(automaton.offsets[q, s])
            updates[q, s, d:, d:] = np.eye(d)
    final = np.zeros((states, 2 * d))
    final[:, :d] = linear.final
    final[:, d] = automaton.constants
    x_init = np.concatenate([linear.x_init, np.ones(d)])
    return _flag_nonnegative(LinearCra(linear.alphabet, x_init, linear.targets, updates, final, linear.initial))


def from_weighted_automaton(
    alphabet: Alphabet, initial: Sequence[float], transitions: np.ndarray, final: Sequence[float]
) -> LinearCra:
    """
    Flatten a weighted automaton (λ, M_σ, ρ) with n states into a one-state CRA with n registers.

    The value of w = σ1…σm is λᵀ M_σ1 … M_σm ρ; the registers carry the row vector λᵀ M_σ1 … as a column.
    """
    transitions = np.asarray(transitions, dtype=float)
    n = len(initial)
    if transitions.shape != (len(alphabet), n, n):
        raise ValueError(f"transitions must have shape {(len(alphabet), n, n)}, got {transitions.shape}")
    updates = np.transpose(transitions, (0, 2, 1))[np.newaxis]
    return _flag_nonnegative(LinearCra(
        alphabet,
        np.asarray(initial, dtype=float),
        np.zeros((1, len(alphabet)), dtype=int),
        updates,
        np.asarray(final, dtype=float)[np.newaxis],
    ))


def count_as_cra(k: float) -> LinearCra:
    """
    Two-register automaton over {a, b} with value m/kⁿ on words of length n holding m symbols a.

    The sum of its values is k/(k−2)² for k > 2 and diverges otherwise.
    """
    alphabet = Alphabet(("a", "b"))
    a = np.array([[1.0, 1.0], [0.0, 1.0]]) / k
    b = np.eye(2) / k
    return LinearCra(
        alphabet,
        x_init=np.array([0.0, 1.0]),
        targets=np.zeros((1, 2), dtype=int),
        updates=np.stack([a, b])[np.newaxis],
        final=np.array([[1.0, 0.0]]),
        nonnegative=True,
    )


# ============================================================================
# SRE compilation
# ============================================================================

def _weighted_parts(r: SreExpr, alphabet: Alphabet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Weighted automaton (λ, M, ρ) for r with λᵀρ = 0; each atom contributes two states.
    """
    if isinstance(r, Atom):
        transitions = np.zeros((len(alphabet), 2, 2))
        transitions[alphabet.index(r.symbol), 0, 1] = 1.0
        return np.array([1.0, 0.0]), transitions, np.array([0.0, 1.0])
    if isinstance(r, Choice):
        lam1, m1, rho1 = _weighted_parts(r.left, alphabet)
        lam2, m2, rho2 = _weighted_parts(r.right, alphabet)
        n1, n2 = len(lam1), len(lam2)
        transitions = np.zeros((len(alphabet), n1 + n2, n1 + n2))
        transitions[:, :n1, :n1] = m1
        transitions[:, n1:, n1:] = m2
        return np.concatenate([r.alpha * lam1, (1 - r.alpha) * lam2]), transitions, np.concatenate([rho1, rho2])
    if isinstance(r, Concat):
        lam1, m1, rho1 = _weighted_parts(r.left, alphabet)
        lam2, m2, rho2 = _weighted_parts(r.right, alphabet)
        n1, n2 = len(lam1), len(lam2)
        transitions = np.zeros((len(alphabet), n1 + n2, n1 + n2))
        transitions[:, :n1, :n1] = m1
        # finishing the left part on σ enters the right part's initial distribution
        transitions[:, :n1, n1:] = np.einsum("sij,j,k->sik", m1, rho1, lam2)
        transitions[:, n1:, n1:] = m2
        return np.concatenate([lam1, np.zeros(n2)]), transitions, np.concatenate([np.zeros(n1), rho2])
    lam, m, rho = _weighted_parts(r.inner, alphabet)
    restart = np.einsum("sij,j,k->sik", m, rho, lam)
    return lam, m + (1 - r.alpha) * restart, r.alpha * rho


def compile_sre(r: SreExpr, alphabet: Optional[Alphabet] = None) -> LinearCra:
    """
    Non-negative one-state CRA with the same semantics as r.

    The register count is twice the number of atoms, so at most 2·|r|.
    """
    if alphabet is None:
        alphabet = Alphabet(sre_symbols(r))
    lam, transitions, rho = _weighted_parts(r, alphabet)
    return from_weighted_automaton(alphabet, lam, transitions, rho)


# ============================================================================
# Total weight
# ============================================================================

def solve_linear_system(matrix: np.ndarray, rhs: np.ndarray, pivot_threshold: Optional[float] = None) -> np.ndarray:
    """
    Solve matrix @ x = rhs by dense Gaussian elimination with partial row pivoting.

    Raises:
        SingularSystemError: If a pivot falls below the threshold.
    """
    if pivot_threshold is None:
        pivot_threshold = get_settings().pivot_threshold
    a = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    n = len(b)
    for k in range(n):
        # Move up the row with the largest pivot
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) < pivot_threshold:
            raise SingularSystemError(f"pivot {abs(a[p, k]):.3e} in column {k} is below {pivot_threshold:.0e}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        b[k + 1:] -= factors * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def length_masses(automaton: LinearCra, max_len: int) -> np.ndarray:
    """
    Entry n is Σ_{|w|=n} A(w) for n = 1..max_len.

    Register vectors of all runs ending in the same state are summed, which by linearity
    gives the brute-force sum without enumerating words.
    """
    masses = np.zeros(max_len + 1)
    valuations = np.zeros((automaton.num_states, automaton.register_count))
    valuations[automaton.initial] = automaton.x_init
    for n in range(1, max_len + 1):
        following = np.zeros_like(valuations)
        for q in range(automaton.num_states):
            if not valuations[q].any():
                continue
            for s in range(len(automaton.alphabet)):
                following[automaton.targets[q, s]] += automaton.updates[q, s] @ valuations[q]
        valuations = following
        masses[n] = float(np.einsum("qd,qd->", automaton.final, valuations))
    return masses


def _cross_check_agrees(partial: np.ndarray, total: float, divergence: float) -> bool:
    """Truncated sum within the divergence ratio of the total, or still closing in on it."""
    if abs(partial[-1] - total) <= divergence * max(abs(total), 1e-12):
        return True
    increments = np.diff(partial)
    return bool(
        partial[-1] <= total
        and increments[-1] >= 0
        and increments[-1] < increments[-2]
        and abs(total - partial[-1]) < abs(total - partial[-2])
    )


def total_weight(
    automaton: LinearCra, cross_check_length: Optional[int] = None, tolerance: Optional[float] = None
) -> TotalWeightSolution:
    """
    Solve s_q = μ_q + Σ_σ A_{q,σ}ᵀ s_{δ(q,σ)} and report s_{q0}ᵀ x_init with diagnostics.

    The algebraic solution can exist while the series diverges, so the result is validated only when
    every s_q entry is ≥ −tol and the truncated sum up to the cross-check length agrees with it.

    Raises:
        SingularSystemError: If the system has no unique solution.
    """
    settings = get_settings()
    length = max(2, cross_check_length or settings.cross_check_length)
    tol = tolerance if tolerance is not None else settings.tolerance
    states, d = automaton.num_states, automaton.register_count
    size = states * d
    matrix = np.eye(size)
    for q in range(states):
        for s in range(len(automaton.alphabet)):
            target = automaton.targets[q, s]
            matrix[q * d:(q + 1) * d, target * d:(target + 1) * d] -= automaton.updates[q, s].T
    rhs = automaton.final.reshape(size)
    solution = solve_linear_system(matrix, rhs, settings.pivot_threshold)
    residual = float(np.max(np.abs(matrix @ solution - rhs)))
    if residual > settings.residual_factor * (1 + float(np.max(np.abs(rhs)))):
        raise SingularSystemError(f"linear system is too ill-conditioned (residual {residual:.3e})")

    per_state = solution.reshape(states, d)
    total = float(per_state[automaton.initial] @ automaton.x_init)
    nonnegative = bool(np.all(np.isfinite(solution)) and (solution >= -tol).all())
    partial = np.cumsum(length_masses(automaton, length))
    validated = nonnegative and _cross_check_agrees(partial, total, settings.cross_check_divergence)
    if not validated:
        logger.warning(
            f"Total weight {total:.6g} is unvalidated (non-negative solution: {nonnegative}, "
            f"truncated sum at length {length}: {partial[-1]:.6g})"
        )
    return TotalWeightSolution(
        per_state=per_state.tolist(),
        total=total,
        residual=residual,
        nonnegative=nonnegative,
        truncated_sum=float(partial[-1]),
        cross_check_length=length,
        validated=validated,
    )


def is_stochastic(automaton: LinearCra, tol: float = 1e-6) -> StochasticityReport:
    """
    Decide whether a non-negative automaton's values sum to one.

    True iff the total lies in [1−tol, 1+tol] and every s_q entry is finite and ≥ −tol.

    Raises:
        WeightError: If the automaton has negative weights.
        SingularSystemError: Propagated from the solver.
    """
    if not automaton.has_nonnegative_weights():
        raise WeightError("the stochasticity check applies to automata with non-negative weights")
    solution = total_weight(automaton, tolerance=tol)
    per_state = np.array(solution.per_state)
    finite = bool(np.all(np.isfinite(per_state)) and math.isfinite(solution.total))
    nonnegative = bool((per_state >= -tol).all())
    stochastic = finite and nonnegative and abs(solution.total - 1.0) <= tol
    return StochasticityReport(
        stochastic=stochastic,
        total=solution.total,
        finite=finite,
        nonnegative=nonnegative,
        validated=solution.validated,
    )


# ============================================================================
# Regular languages
# ============================================================================

def product_with_dfa(automaton: LinearCra, dfa: Dfa) -> LinearCra:
    """
    Synchronized product: same register semantics as the automaton on words the DFA accepts, 0 elsewhere.

    Product state (q, p) is numbered q·|Q_R| + p.

    Raises:
        AlphabetError: If the alphabets differ.
    """
    if automaton.alphabet != dfa.alphabet:
        raise AlphabetError(f"alphabets differ: {automaton.alphabet.text!r} vs {dfa.alphabet.text!r}")
    states, symbols, d = automaton.num_states, len(automaton.alphabet), automaton.register_count
    width = dfa.num_states
    targets = np.zeros((states * width, symbols), dtype=int)
    updates = np.zeros((states * width, symbols, d, d))
    final = np.zeros((states * width, d))
    for q in range(states):
        for p in range(width):
            index = q * width + p
            for s in range(symbols):
                targets[index, s] = automaton.targets[q, s] * width + dfa.transitions[p][s]
                updates[index, s] = automaton.updates[q, s]
            if p in dfa.accepting:
                final[index] = automaton.final[q]
    return LinearCra(
        automaton.alphabet, automaton.x_init, targets, updates, final,
        initial=automaton.initial * width + dfa.initial,
        nonnegative=automaton.nonnegative,
    )


def mass_over_regular(automaton: LinearCra, dfa: Dfa) -> float:
    """Σ_{w ∈ L(D)} A(w), via the total weight of the product automaton."""
    return total_weight(product_with_dfa(automaton, dfa)).total
