"""
Command line interface for stochlang.

Exit codes: 0 on success or Accept, 1 on Reject (or a non-stochastic automaton), 2 on bad input,
3 when the computation itself fails (budget, singular system, exhausted replay source...).
"""

import time
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import typer
from fastmcp.utilities.logging import configure_logging, get_logger
from pydantic import BaseModel, ConfigDict, ValidationError
from rich.console import Console
from rich.table import Table

from stochlang.bench import bench_rows, load_corpus, plant_far
from stochlang.cra import LinearCra, compile_sre, eval_cra, is_stochastic, product_with_dfa, total_weight
from stochlang.distribution import Alphabet, make_word, truncated_kl
from stochlang.errors import INPUT_ERRORS, StochlangError
from stochlang.formats import (
    format_record,
    outcome_record,
    read_cra,
    read_dfa,
    read_distribution,
    read_replay,
    read_sre,
    write_bench_csv,
    write_mixture,
)
from stochlang.geometric import (
    MixtureMassFunction,
    approximate_finite_support,
    kl_heuristic_mixture,
    mixture_to_sre,
    universal_approx,
)
from stochlang.identity_testing import (
    ReplaySampleSource,
    SampleSource,
    SreSampleSource,
    TesterConfig,
    identity_test,
)
from stochlang.settings import get_settings
from stochlang.sre import SreMassFunction, eval_sre, print_sre, sample_sre, truncation_threshold
from stochlang.stochlang_constants import EXIT_CODES, FORMAT_KEYWORDS
from stochlang.stochlang_utils import content_lines, format_float

logger = get_logger(__name__)

app = typer.Typer(
    name="stochlang",
    help="Stochastic regular expressions, cost register automata and identity testing.",
    no_args_is_help=True,
    add_completion=False,
)
console = Console()
err_console = Console(stderr=True)


class OutputFormat(str, Enum):
    human = "human"
    records = "records"


class Mode(str, Enum):
    l1 = "l1"
    linf = "linf"


class CliConfig(BaseModel):
    """Options shared by every command."""

    model_config = ConfigDict(frozen=True)

    output_format: OutputFormat = OutputFormat.human
    verbose: bool = False


@app.callback()
def main(
    ctx: typer.Context,
    output_format: OutputFormat = typer.Option(OutputFormat.human, "--format", help="human or key=value records"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log debug messages to stderr"),
):
    ctx.obj = CliConfig(output_format=output_format, verbose=verbose)
    configure_logging(level="DEBUG" if verbose else get_settings().log_level)


# ============================================================================
# Helpers
# ============================================================================

@contextmanager
def _exit_codes():
    try:
        yield
    except (*INPUT_ERRORS, ValidationError, ValueError, FileNotFoundError) as e:
        err_console.print(f"error: {e}", markup=False)
        raise typer.Exit(EXIT_CODES["input_error"])
    except StochlangError as e:
        err_console.print(f"error: {e}", markup=False)
        raise typer.Exit(EXIT_CODES["runtime_error"])


def _read(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def _emit(ctx: typer.Context, fields: Dict[str, object], title: str) -> None:
    if ctx.obj.output_format == OutputFormat.records:
        typer.echo(format_record(fields), nl=False)
        return
    table = Table(title=title, show_header=False)
    table.add_column("field", style="bold")
    table.add_column("value")
    for key, value in fields.items():
        table.add_row(key, format_float(value) if isinstance(value, float) else str(value))
    console.print(table)


def _load_automaton(text: str, alphabet: Optional[Alphabet] = None) -> LinearCra:
    """A CRA file as is, or an SRE file compiled to a CRA."""
    first = next((line for _, line in content_lines(text)), "")
    if first.split()[:1] == [FORMAT_KEYWORDS["cra_header"]]:
        return read_cra(text)
    expr, alphabet = read_sre(text, alphabet)
    return compile_sre(expr, alphabet)


# ============================================================================
# Commands
# ============================================================================

@app.command("parse")
def cmd_parse(
    file: Path = typer.Argument(..., help="SRE file with an 'alphabet:' header"),
    alphabet: Optional[str] = typer.Option(None, "--alphabet", "-a", help="Override the declared alphabet"),
):
    """Print the canonical form of an SRE."""
    with _exit_codes():
        expr, _ = read_sre(_read(file), Alphabet.parse(alphabet) if alphabet else None)
        typer.echo(print_sre(expr))


@app.command("eval")
def cmd_eval(
    ctx: typer.Context,
    file: Path = typer.Argument(..., help="SRE file"),
    word: str = typer.Argument(..., help="Word as a raw symbol string"),
    via_cra: bool = typer.Option(False, "--via-cra", help="Evaluate the compiled CRA instead"),
):
    """Probability of a word under an SRE."""
    with _exit_codes():
        expr, alphabet = read_sre(_read(file))
        word = make_word(word, alphabet)
        value = eval_cra(compile_sre(expr, alphabet), word) if via_cra else eval_sre(expr, word)
        if ctx.obj.output_format == OutputFormat.records:
            typer.echo(format_record({"word": word, "probability": value}), nl=False)
        else:
            typer.echo(format_float(value))


@app.command("mass")
def cmd_mass(
    ctx: typer.Context,
    file: Path = typer.Argument(..., help="CRA or SRE file"),
    dfa: Optional[Path] = typer.Option(None, "--dfa", help="Restrict the mass to the DFA's language"),
    cross_check_length: Optional[int] = typer.Option(None, "--cross-check-length", min=2),
):
    """Total mass of a CRA (or compiled SRE), optionally over a regular language."""
    with _exit_codes():
        automaton = _load_automaton(_read(file))
        if dfa is not None:
            automaton = product_with_dfa(automaton, read_dfa(_read(dfa), automaton.alphabet))
        solution = total_weight(automaton, cross_check_length=cross_check_length)
        if not solution.nonnegative:
            err_console.print("warning: the per-state solution has a negative entry; the total is not a valid mass")
        _emit(
            ctx,
            {
                "total": solution.total,
                "status": solution.status,
                "validated": solution.validated,
                "nonnegative": solution.nonnegative,
                "residual": solution.residual,
                "truncated_sum": solution.truncated_sum,
                "cross_check_length": solution.cross_check_length,
            },
            "Total mass",
        )


@app.command("check")
def cmd_check(ctx: typer.Context, file: Path = typer.Argument(..., help="CRA or SRE file")):
    """Decide whether an automaton defines a stochastic language; exit 1 when it does not."""
    with _exit_codes():
        report = is_stochastic(_load_automaton(_read(file)))
        _emit(ctx, {"verdict": "stochastic" if report.stochastic else "not-stochastic", **report.model_dump()}, "Stochasticity")
    if not report.stochastic:
        raise typer.Exit(EXIT_CODES["reject"])


@app.command("sample")
def cmd_sample(
    file: Path = typer.Argument(..., help="SRE file"),
    n: int = typer.Option(10, "--n", "-n", min=0, help="Number of words"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed (default from settings)"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write words here instead of stdout"),
):
    """Draw words from an SRE, one per line."""
    with _exit_codes():
        expr, _ = read_sre(_read(file))
        rng = np.random.default_rng(get_settings().default_seed if seed is None else seed)
        text = "".join(f"{sample_sre(expr, rng)}\n" for _ in range(n))
        if output is None:
            typer.echo(text, nl=False)
        else:
            output.write_text(text, encoding="utf-8")


def _sample_source(choice: str, reference, alphabet: Alphabet, cfg: TesterConfig, mode: str) -> SampleSource:
    if choice == "self":
        return SreSampleSource(reference, seed=cfg.seed, alphabet=alphabet)
    if choice == "far":
        theta = truncation_threshold(reference, cfg.epsilon).theta
        far = plant_far(reference, mode, cfg.epsilon, theta, alphabet)
        return SreSampleSource(far, seed=cfg.seed, alphabet=alphabet)
    kind, sep, location = choice.partition(":")
    if sep and kind == "sre":
        generator, _ = read_sre(_read(Path(location)), alphabet)
        return SreSampleSource(generator, seed=cfg.seed, alphabet=alphabet)
    if sep and kind == "replay":
        words, replay_alphabet = read_replay(_read(Path(location)))
        if replay_alphabet != alphabet:
            raise ValueError(f"replay alphabet {replay_alphabet.text!r} differs from {alphabet.text!r}")
        return ReplaySampleSource(words, alphabet)
    raise ValueError(f"unknown sample source {choice!r}; use self, far, sre:PATH or replay:PATH")


@app.command("test")
def cmd_test(
    ctx: typer.Context,
    reference: Path = typer.Argument(..., help="Reference SRE file"),
    source: str = typer.Option("self", "--source", help="self, far, sre:PATH or replay:PATH"),
    epsilon: float = typer.Option(0.3, "--epsilon", "-e"),
    delta: float = typer.Option(0.2, "--delta", "-d"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    mode: Mode = typer.Option(Mode.l1, "--mode"),
    samples: Optional[int] = typer.Option(None, "--samples", help="Override the sample budget N"),
    normalize_by_total: bool = typer.Option(False, "--normalize-by-total", help="Divide counts by N, not by retained"),
    conservative: bool = typer.Option(False, "--conservative", help="Use the 8k/(ε₂−ε₁)² sample budget"),
    workers: int = typer.Option(1, "--workers", min=1, help="Spawned sampling streams for SRE sources"),
    timing: bool = typer.Option(False, "--timing", help="Add wall_ms to the record"),
):
    """Identity test of sampled data against a reference SRE; exit 0 on Accept, 1 on Reject."""
    with _exit_codes():
        expr, alphabet = read_sre(_read(reference))
        cfg = TesterConfig(
            epsilon=epsilon,
            delta=delta,
            seed=get_settings().default_seed if seed is None else seed,
            sample_budget_override=samples,
            normalize_by_total=normalize_by_total,
            conservative=conservative,
            workers=workers,
        )
        started = time.perf_counter()
        outcome = identity_test(expr, _sample_source(source, expr, alphabet, cfg, mode.value), cfg, mode.value)
        wall_ms = (time.perf_counter() - started) * 1000 if timing else None
        _emit(ctx, outcome_record(outcome, wall_ms), "Identity test")
    if not outcome.accepted:
        raise typer.Exit(EXIT_CODES["reject"])


@app.command("bench")
def cmd_bench(
    corpus: Path = typer.Argument(Path("corpus"), help="Directory of .sre reference files"),
    trials: int = typer.Option(50, "--trials", min=1),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="CSV destination (default stdout)"),
    epsilon: float = typer.Option(0.3, "--epsilon", "-e"),
    delta: float = typer.Option(0.2, "--delta", "-d"),
    mode: Optional[Mode] = typer.Option(None, "--mode", help="Only this tester (default both)"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: int = typer.Option(1, "--workers", min=1),
    no_far: bool = typer.Option(False, "--no-far", help="Skip planted-far rows"),
):
    """Acceptance-rate table over a corpus, as CSV."""
    with _exit_codes():
        rows = bench_rows(
            load_corpus(corpus),
            trials,
            epsilon=epsilon,
            delta=delta,
            modes=(mode.value,) if mode else ("l1", "linf"),
            seed=get_settings().default_seed if seed is None else seed,
            workers=workers,
            include_far=not no_far,
        )
        text = write_bench_csv(rows)
        if output is None:
            typer.echo(text, nl=False)
        else:
            output.write_text(text, encoding="utf-8")


@app.command("approx")
def cmd_approx(
    file: Path = typer.Argument(..., help="Distribution file ('word <w> <p>' lines) or SRE file"),
    epsilon: float = typer.Option(0.1, "--epsilon", "-e"),
    as_sre: bool = typer.Option(False, "--as-sre", help="Also print the mixture as an SRE"),
    heuristic_kl: bool = typer.Option(False, "--heuristic-kl", help="Experimental KL-oriented mixture"),
):
    """Approximate a distribution by a mixture of geometric distributions."""
    with _exit_codes():
        text = _read(file)
        lines = [line.split() for _, line in content_lines(text)]
        if any(tokens[0] == FORMAT_KEYWORDS["word"] for tokens in lines[1:]):
            p = read_distribution(text)
            if heuristic_kl:
                mixture = kl_heuristic_mixture(p.table)
                theta = max(len(w) for w in p.table)
                kl = truncated_kl(p, MixtureMassFunction(mixture, p.alphabet), theta)
                typer.echo(f"# heuristic truncated_kl={format_float(kl)} theta={theta}")
            else:
                mixture = approximate_finite_support(p.table, epsilon)
        else:
            expr, alphabet = read_sre(text)
            mixture = universal_approx(SreMassFunction(expr, alphabet), epsilon)
        typer.echo(write_mixture(mixture), nl=False)
        if as_sre:
            typer.echo(print_sre(mixture_to_sre(mixture)))


@app.command("serve")
def cmd_serve():
    """Run the tool server on stdio."""
    from stochlang.stochlang_server import mcp

    mcp.run()


if __name__ == "__main__":
    app()
