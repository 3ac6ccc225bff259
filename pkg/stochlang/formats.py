"""
Text formats read and written by the command line and the tool server.

All formats are line oriented. Blank lines and lines starting with ``#`` are ignored, and floats
are written with up to 17 significant digits so that every file round-trips bit-exactly.
"""

import csv
import io
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from stochlang.cra import Dfa, LinearCra
from stochlang.distribution import Alphabet, FiniteMassFunction, Word, make_word
from stochlang.errors import AlphabetError, FormatError, WordError
from stochlang.geometric import GeometricMixture
from stochlang.identity_testing import TestOutcome
from stochlang.sre import SreExpr, parse_sre, print_sre
from stochlang.stochlang_constants import BENCH_COLUMNS, FORMAT_KEYWORDS
from stochlang.stochlang_utils import content_lines, format_float, parse_float


def _float(token: str, line: int) -> float:
    value = parse_float(token)
    if value is None:
        raise FormatError(f"expected a number, got {token!r}", line)
    return value


def _int(token: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"expected an integer, got {token!r}", line) from None


def _header_fields(tokens: Sequence[str], line: int) -> Dict[str, str]:
    fields = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep:
            raise FormatError(f"expected key=value in header, got {token!r}", line)
        fields[key] = value
    return fields


def _alphabet(text: str, line: Optional[int]) -> Alphabet:
    try:
        return Alphabet.parse(text)
    except AlphabetError as e:
        raise FormatError(str(e), line) from None


def _split_alphabet_header(text: str) -> Tuple[Optional[Alphabet], List[Tuple[int, str]]]:
    lines = list(content_lines(text))
    header = FORMAT_KEYWORDS["alphabet_header"]
    if lines and lines[0][1].startswith(header):
        number, first = lines[0]
        return _alphabet(first[len(header):], number), lines[1:]
    return None, lines


# ============================================================================
# SRE files
# ============================================================================

def read_sre(text: str, alphabet: Optional[Alphabet] = None) -> Tuple[SreExpr, Alphabet]:
    """
    Parse an SRE file: an ``alphabet: <syms>`` header followed by one expression.

    An explicit alphabet overrides the header.

    Raises:
        FormatError: If no alphabet is available or the file holds no expression.
        ParseError: If the expression is malformed.
    """
    declared, lines = _split_alphabet_header(text)
    alphabet = alphabet or declared
    if alphabet is None:
        raise FormatError("missing 'alphabet:' header", 1)
    if not lines:
        raise FormatError("file contains no expression")
    return parse_sre(" ".join(line for _, line in lines), alphabet), alphabet


def write_sre(expr: SreExpr, alphabet: Alphabet) -> str:
    return f"{FORMAT_KEYWORDS['alphabet_header']} {alphabet.text}\n{print_sre(expr)}\n"


# ============================================================================
# CRA and DFA files
# ============================================================================

def read_cra(text: str) -> LinearCra:
    """
    Parse a linear CRA::

        cra states=<n> registers=<d> alphabet=<syms> [initial=<q>]
        init <d floats>
        trans <q> <σ> <q'> <d·d floats, row-major>
        final <q> <d floats>

    A missing transition goes to the same state with the zero matrix; a missing final line is zero.
    """
    lines = list(content_lines(text))
    if not lines:
        raise FormatError("empty CRA file")
    number, header = lines[0]
    tokens = header.split()
    if tokens[0] != FORMAT_KEYWORDS["cra_header"]:
        raise FormatError(f"expected '{FORMAT_KEYWORDS['cra_header']}' header", number)
    fields = _header_fields(tokens[1:], number)
    for key in ("states", "registers", "alphabet"):
        if key not in fields:
            raise FormatError(f"header is missing {key}=", number)
    states = _int(fields["states"], number)
    d = _int(fields["registers"], number)
    alphabet = _alphabet(fields["alphabet"], number)
    initial = _int(fields.get("initial", "0"), number)
    if states < 1 or d < 1:
        raise FormatError("a CRA needs at least one state and one register", number)

    x_init = None
    targets = np.tile(np.arange(states)[:, None], (1, len(alphabet)))
    updates = np.zeros((states, len(alphabet), d, d))
    final = np.zeros((states, d))
    for number, line in lines[1:]:
        keyword, *rest = line.split()
        if keyword == FORMAT_KEYWORDS["init"]:
            if len(rest) != d:
                raise FormatError(f"init needs {d} values, got {len(rest)}", number)
            x_init = [_float(token, number) for token in rest]
        elif keyword == FORMAT_KEYWORDS["trans"]:
            if len(rest) != 3 + d * d:
                raise FormatError(f"trans needs <q> <σ> <q'> and {d * d} values", number)
            source, target = _int(rest[0], number), _int(rest[2], number)
            if not (0 <= source < states and 0 <= target < states):
                raise FormatError("transition state outside 0..states-1", number)
            if rest[1] not in alphabet:
                raise FormatError(f"symbol {rest[1]!r} is not in alphabet {alphabet.text!r}", number)
            symbol = alphabet.index(rest[1])
            targets[source, symbol] = target
            updates[source, symbol] = np.array([_float(token, number) for token in rest[3:]]).reshape(d, d)
        elif keyword == FORMAT_KEYWORDS["final"]:
            if len(rest) != 1 + d:
                raise FormatError(f"final needs <q> and {d} values", number)
            state = _int(rest[0], number)
            if not 0 <= state < states:
                raise FormatError("final state outside 0..states-1", number)
            final[state] = [_float(token, number) for token in rest[1:]]
        else:
            raise FormatError(f"unknown line keyword {keyword!r}", number)
    if x_init is None:
        raise FormatError("missing init line")
    try:
        return LinearCra(alphabet, x_init, targets, updates, final, initial)
    except ValueError as e:
        raise FormatError(str(e)) from None


def write_cra(automaton: LinearCra) -> str:
    d = automaton.register_count
    out = [
        f"{FORMAT_KEYWORDS['cra_header']} states={automaton.num_states} registers={d} "
        f"alphabet={automaton.alphabet.text} initial={automaton.initial}",
        " ".join([FORMAT_KEYWORDS["init"], *map(format_float, automaton.x_init)]),
    ]
    for state in range(automaton.num_states):
        for index, symbol in enumerate(automaton.alphabet):
            matrix = automaton.updates[state, index].reshape(-1)
            target = int(automaton.targets[state, index])
            out.append(" ".join([FORMAT_KEYWORDS["trans"], str(state), symbol, str(target), *map(format_float, matrix)]))
    for state in range(automaton.num_states):
        out.append(" ".join([FORMAT_KEYWORDS["final"], str(state), *map(format_float, automaton.final[state])]))
    return "\n".join(out) + "\n"


def read_dfa(text: str, alphabet: Optional[Alphabet] = None) -> Dfa:
    """
    Parse a DFA::

        dfa states=<n> initial=<q> accepting=<q,q,...> [alphabet=<syms>]
        trans <q> <σ> <q'>

    Without an ``alphabet=`` field the given alphabet is used. Every (state, symbol) pair needs a line.
    """
    lines = list(content_lines(text))
    if not lines:
        raise FormatError("empty DFA file")
    number, header = lines[0]
    tokens = header.split()
    if tokens[0] != FORMAT_KEYWORDS["dfa_header"]:
        raise FormatError(f"expected '{FORMAT_KEYWORDS['dfa_header']}' header", number)
    fields = _header_fields(tokens[1:], number)
    if "states" not in fields:
        raise FormatError("header is missing states=", number)
    if "alphabet" in fields:
        alphabet = _alphabet(fields["alphabet"], number)
    if alphabet is None:
        raise FormatError("DFA file declares no alphabet and none was given", number)
    states = _int(fields["states"], number)
    initial = _int(fields.get("initial", "0"), number)
    accepting = frozenset(_int(token, number) for token in fields.get("accepting", "").split(",") if token)

    rows: List[List[Optional[int]]] = [[None] * len(alphabet) for _ in range(max(states, 0))]
    for number, line in lines[1:]:
        keyword, *rest = line.split()
        if keyword != FORMAT_KEYWORDS["trans"] or len(rest) != 3:
            raise FormatError("expected 'trans <q> <σ> <q'>'", number)
        source, target = _int(rest[0], number), _int(rest[2], number)
        if not 0 <= source < states:
            raise FormatError("transition state outside 0..states-1", number)
        if rest[1] not in alphabet:
            raise FormatError(f"symbol {rest[1]!r} is not in alphabet {alphabet.text!r}", number)
        rows[source][alphabet.index(rest[1])] = target
    for state, row in enumerate(rows):
        if None in row:
            missing = alphabet.symbols[row.index(None)]
            raise FormatError(f"state {state} has no transition on {missing!r}")
    try:
        return Dfa(alphabet, tuple(tuple(row) for row in rows), accepting, initial)
    except ValueError as e:
        raise FormatError(str(e)) from None


def write_dfa(dfa: Dfa) -> str:
    accepting = ",".join(str(state) for state in sorted(dfa.accepting))
    out = [
        f"{FORMAT_KEYWORDS['dfa_header']} states={dfa.num_states} initial={dfa.initial} "
        f"accepting={accepting} alphabet={dfa.alphabet.text}"
    ]
    for state, row in enumerate(dfa.transitions):
        for symbol, target in zip(dfa.alphabet, row):
            out.append(f"{FORMAT_KEYWORDS['trans']} {state} {symbol} {target}")
    return "\n".join(out) + "\n"


# ============================================================================
# Distributions, mixtures and replay files
# ============================================================================

def read_distribution(text: str) -> FiniteMassFunction:
    """``alphabet: <syms>`` header, then ``word <w> <p>`` lines."""
    alphabet, lines = _split_alphabet_header(text)
    if alphabet is None:
        raise FormatError("missing 'alphabet:' header", 1)
    table: Dict[Word, float] = {}
    for number, line in lines:
        tokens = line.split()
        if len(tokens) != 3 or tokens[0] != FORMAT_KEYWORDS["word"]:
            raise FormatError("expected 'word <w> <p>'", number)
        try:
            word = make_word(tokens[1], alphabet)
        except WordError as e:
            raise FormatError(str(e), number) from None
        if word in table:
            raise FormatError(f"word {word!r} listed twice", number)
        table[word] = _float(tokens[2], number)
    try:
        return FiniteMassFunction(table, alphabet)
    except ValueError as e:
        raise FormatError(str(e)) from None


def write_distribution(p: FiniteMassFunction) -> str:
    out = [f"{FORMAT_KEYWORDS['alphabet_header']} {p.alphabet.text}"]
    out.extend(f"{FORMAT_KEYWORDS['word']} {w} {format_float(v)}" for w, v in p.table.items())
    return "\n".join(out) + "\n"


def read_mixture(text: str) -> GeometricMixture:
    """``component <λ> <α> <word>`` lines."""
    pairs = []
    for number, line in content_lines(text):
        tokens = line.split()
        if len(tokens) != 4 or tokens[0] != FORMAT_KEYWORDS["component"]:
            raise FormatError("expected 'component <λ> <α> <word>'", number)
        pairs.append((_float(tokens[1], number), tokens[3], _float(tokens[2], number)))
    if not pairs:
        raise FormatError("mixture has no components")
    try:
        return GeometricMixture.from_pairs(pairs)
    except ValueError as e:
        raise FormatError(str(e)) from None


def write_mixture(m: GeometricMixture) -> str:
    return "".join(
        f"{FORMAT_KEYWORDS['component']} {format_float(weight)} {format_float(g.alpha)} {g.base}\n"
        for weight, g in m.components
    )


def read_replay(text: str) -> Tuple[List[Word], Alphabet]:
    """``alphabet: <syms>`` header, then one word per line."""
    alphabet, lines = _split_alphabet_header(text)
    if alphabet is None:
        raise FormatError("missing 'alphabet:' header", 1)
    words = []
    for number, line in lines:
        try:
            words.append(make_word(line, alphabet))
        except WordError as e:
            raise FormatError(str(e), number) from None
    return words, alphabet


def write_replay(words: Sequence[Word], alphabet: Alphabet) -> str:
    return "".join([f"{FORMAT_KEYWORDS['alphabet_header']} {alphabet.text}\n", *(f"{w}\n" for w in words)])


# ============================================================================
# Result records and bench tables
# ============================================================================

def _record_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    text = str(value)
    if not text or any(ch.isspace() for ch in text):
        raise ValueError(f"record value {text!r} must be non-empty and contain no whitespace")
    return text


def format_record(fields: Mapping[str, object]) -> str:
    """One ``key=value`` line per field, in the given order."""
    return "".join(f"{key}={_record_value(value)}\n" for key, value in fields.items())


def parse_record(text: str) -> Dict[str, str]:
    record = {}
    for number, line in content_lines(text):
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"expected key=value, got {line!r}", number)
        record[key] = value
    return record


def outcome_record(outcome: TestOutcome, wall_ms: Optional[float] = None) -> Dict[str, object]:
    fields: Dict[str, object] = {
        "verdict": outcome.verdict,
        "mode": outcome.mode,
        "statistic": outcome.statistic,
        "threshold": outcome.threshold_used,
        "theta": outcome.theta,
        "k": outcome.domain_size_k,
        "N": outcome.samples_drawn,
        "discarded": outcome.samples_discarded,
        "seed": outcome.seed,
    }
    if wall_ms is not None:
        fields["wall_ms"] = wall_ms
    return fields


def write_bench_csv(rows: Sequence[Mapping[str, object]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _record_value(row[key]) for key in BENCH_COLUMNS})
    return buffer.getvalue()


def read_bench_csv(text: str) -> List[Dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))
