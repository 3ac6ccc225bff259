"""
Shared fixtures and hypothesis strategies for the stochlang test suite.
"""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from stochlang.cra import Dfa
from stochlang.distribution import Alphabet
from stochlang.sre import Atom, Choice, Concat, Star, parse_sre

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = REPO_ROOT / "corpus"


@pytest.fixture
def ab() -> Alphabet:
    return Alphabet(("a", "b"))


@pytest.fixture
def unary() -> Alphabet:
    return Alphabet(("a",))


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture
def geometric_half(unary):
    """'a' *[0.5]: mass 0.5^k on a^k."""
    return parse_sre("'a' *[0.5]", unary)


@pytest.fixture
def coin_star(ab):
    return parse_sre("('a' +[0.5] 'b') *[0.5]", ab)


@pytest.fixture
def anyio_backend():
    return "asyncio"


# ============================================================================
# Strategies
# ============================================================================

weights = st.floats(min_value=0.1, max_value=0.9).map(lambda x: round(x, 2))
star_weights = st.floats(min_value=0.3, max_value=0.9).map(lambda x: round(x, 2))


@st.composite
def sre_exprs(draw, symbols=("a", "b"), max_depth=3):
    """Random expressions over the given symbols with short tails."""
    if max_depth <= 1:
        return Atom(draw(st.sampled_from(symbols)))
    kind = draw(st.sampled_from(["atom", "choice", "concat", "star"]))
    if kind == "atom":
        return Atom(draw(st.sampled_from(symbols)))
    sub = sre_exprs(symbols=symbols, max_depth=max_depth - 1)
    if kind == "choice":
        return Choice(draw(weights), draw(sub), draw(sub))
    if kind == "concat":
        return Concat(draw(sub), draw(sub))
    return Star(draw(sub), draw(star_weights))


@st.composite
def finite_distributions(draw, symbols=("a", "b"), max_len=3, max_size=5):
    """Word -> probability tables with positive masses summing to one."""
    words = draw(
        st.lists(
            st.text(alphabet=symbols, min_size=1, max_size=max_len),
            min_size=1,
            max_size=max_size,
            unique=True,
        )
    )
    raw = draw(st.lists(st.integers(min_value=1, max_value=20), min_size=len(words), max_size=len(words)))
    total = sum(raw)
    return {word: count / total for word, count in zip(words, raw)}


@st.composite
def affine_parts(draw, states=2, registers=2, symbols=2):
    """Random small affine CRA parameters with entries in [-1, 1]."""
    entries = st.floats(min_value=-1, max_value=1, allow_nan=False).map(lambda x: round(x, 3))

    def array(*shape):
        flat = draw(st.lists(entries, min_size=int(np.prod(shape)), max_size=int(np.prod(shape))))
        return np.array(flat).reshape(shape)

    targets = np.array(
        draw(st.lists(st.integers(0, states - 1), min_size=states * symbols, max_size=states * symbols))
    ).reshape(states, symbols)
    return {
        "x_init": array(registers),
        "targets": targets,
        "updates": array(states, symbols, registers, registers),
        "offsets": array(states, symbols, registers),
        "final": array(states, registers),
        "constants": array(states),
    }


@st.composite
def dfas(draw, alphabet=Alphabet(("a", "b")), max_states=3):
    """Complete DFAs with a random transition table and accepting set."""
    states = draw(st.integers(min_value=1, max_value=max_states))
    rows = tuple(
        tuple(draw(st.integers(0, states - 1)) for _ in alphabet.symbols) for _ in range(states)
    )
    accepting = draw(st.frozensets(st.integers(0, states - 1)))
    return Dfa(alphabet, rows, accepting)
