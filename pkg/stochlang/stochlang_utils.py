"""
Utility functions for stochlang.
This file contains small shared helpers for number formatting, token parsing and word arithmetic.
"""

import math
import re
from typing import Iterator, List, Optional, Tuple

# Decimal literal accepted for weights and matrix entries
FLOAT_PATTERN = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def format_float(value: float) -> str:
    """
    Render a float with the fewest digits (at most 17 significant) that read back to the same value.

    Args:
        value (float): The number to render.

    Returns:
        str: Decimal text; negative zero is rendered as ``0.0``.
    """
    value = float(value)
    if value == 0.0:
        return "0.0"
    return repr(value)


def parse_float(text: str) -> Optional[float]:
    """
    Parse a decimal literal.

    Args:
        text (str): Candidate literal, e.g. ``0.25`` or ``1e-3``.

    Returns:
        Optional[float]: The value, or None when the text is not a single decimal literal.
    """
    text = text.strip()
    if not FLOAT_PATTERN.fullmatch(text):
        return None
    return float(text)


def is_open_unit(value: float) -> bool:
    """Check that a weight lies strictly inside (0, 1)."""
    return math.isfinite(value) and 0.0 < value < 1.0


def split_symbols(text: str) -> List[str]:
    """
    Split an alphabet declaration such as ``ab`` into its single-character symbols.

    Args:
        text (str): Concatenated symbols, surrounding whitespace ignored.

    Returns:
        List[str]: The symbols in declaration order.
    """
    return list(text.strip())


def power_exponent(word: str, base: str) -> int:
    """
    Find k such that ``word == base * k``.

    Args:
        word (str): The candidate power.
        base (str): The non-empty repeated block.

    Returns:
        int: k >= 1, or 0 when the word is not a power of the base.
    """
    if not base or len(word) % len(base) != 0:
        return 0
    k = len(word) // len(base)
    if k == 0:
        return 0
    for start in range(0, len(word), len(base)):
        if word[start:start + len(base)] != base:
            return 0
    return k


def words_up_to(alphabet_size: int, max_len: int) -> int:
    """Number of non-empty words of length at most max_len: sum of |Σ|^i for i = 1..max_len."""
    if alphabet_size == 1:
        return max_len
    return (alphabet_size ** (max_len + 1) - alphabet_size) // (alphabet_size - 1)


def content_lines(text: str) -> Iterator[Tuple[int, str]]:
    """
    Yield (line number, stripped line) for every line that is neither blank nor a ``#`` comment.

    Args:
        text (str): File contents.

    Returns:
        Iterator[Tuple[int, str]]: 1-based line numbers with their stripped text.
    """
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield number, stripped
