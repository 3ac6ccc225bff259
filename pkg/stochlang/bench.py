"""
Acceptance-rate tables over a corpus of reference SREs.

Each case contributes an identical-pair row (samples drawn from the reference itself) and, when a
single weight can reach the gap, a planted-far row whose generator sits at truncated distance 5ε/3
(ℓ1), or at a 2ε gap on an ε-heavy word (ℓ∞), from the reference.
"""

from pathlib import Path
from typing import Dict, List, NamedTuple, Sequence

from fastmcp.utilities.logging import get_logger

from stochlang.distribution import Alphabet
from stochlang.errors import WeightError
from stochlang.formats import read_sre
from stochlang.identity_testing import TestMode, TesterConfig, plant_alternative, run_trials
from stochlang.sre import SreExpr, truncation_threshold

logger = get_logger(__name__)

FAR_SUFFIX = "+far"


class BenchCase(NamedTuple):
    name: str
    expr: SreExpr
    alphabet: Alphabet


def load_corpus(directory: Path) -> List[BenchCase]:
    """Every ``*.sre`` file in the directory, sorted by file name."""
    cases = []
    for path in sorted(Path(directory).glob("*.sre")):
        expr, alphabet = read_sre(path.read_text(encoding="utf-8"))
        cases.append(BenchCase(path.stem, expr, alphabet))
    if not cases:
        raise FileNotFoundError(f"no .sre files in {directory}")
    return cases


def far_target(mode: TestMode, epsilon: float) -> float:
    return 5 * epsilon / 3 if mode == "l1" else 2 * epsilon


def plant_far(expr: SreExpr, mode: TestMode, epsilon: float, theta: int, alphabet: Alphabet) -> SreExpr:
    """
    An alternative the given tester must reject: truncated ℓ1 distance 5ε/3, or for ℓ∞ a gap of
    2ε on a word that stays ε-heavy under the alternative.

    Raises:
        WeightError: If no single weight of ``expr`` reaches that distance.
    """
    heavy_floor = epsilon if mode == "linf" else 0.0
    return plant_alternative(
        expr, far_target(mode, epsilon), theta, alphabet, metric=mode, heavy_floor=heavy_floor
    )


def bench_rows(
    cases: Sequence[BenchCase],
    trials: int,
    epsilon: float = 0.3,
    delta: float = 0.2,
    modes: Sequence[TestMode] = ("l1", "linf"),
    seed: int = 0,
    workers: int = 1,
    include_far: bool = True,
) -> List[Dict[str, object]]:
    """One row per (case, mode) pair and per planted-far generator, in corpus order."""
    rows = []
    for case in cases:
        theta = truncation_threshold(case.expr, epsilon).theta
        for mode in modes:
            cfg = TesterConfig(epsilon=epsilon, delta=delta, seed=seed)
            generators = [(case.name, case.expr)]
            if include_far:
                try:
                    far = plant_far(case.expr, mode, epsilon, theta, case.alphabet)
                    generators.append((case.name + FAR_SUFFIX, far))
                except WeightError as e:
                    logger.warning(f"Skipping planted-far row for {case.name} ({mode}): {e}")
            for name, generator in generators:
                summary = run_trials(case.expr, generator, cfg, trials, mode, workers, case.alphabet)
                logger.info(f"{name} [{mode}]: accept rate {summary.accept_rate:.2f} over {trials} trials")
                rows.append(
                    {
                        "case": name,
                        "mode": mode,
                        "epsilon": epsilon,
                        "accept_rate": summary.accept_rate,
                        "mean_N": summary.mean_samples,
                        "mean_ms": summary.mean_ms,
                    }
                )
    return rows
