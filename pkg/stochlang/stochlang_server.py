"""
MCP Stochlang Server Module
This module exposes stochastic regular expressions, cost register automata, geometric mixtures and
the identity testers as FastMCP tools.
"""

import math
from typing import Dict, List, Optional

import numpy as np
from fastmcp import Context, FastMCP
from fastmcp.prompts.prompt import PromptMessage, TextContent
from fastmcp.utilities.logging import get_logger

from stochlang import cra, geometric, identity_testing, sre
from stochlang.distribution import Alphabet, make_word
from stochlang.errors import StochlangError
from stochlang.formats import read_cra, read_dfa

logger = get_logger(__name__)

SERVER_VERSION = "1.0.0"

TOOL_NAMES = [
    "parse_sre",
    "eval_sre",
    "sample_sre",
    "truncation_threshold",
    "cra_total_weight",
    "cra_is_stochastic",
    "approximate_distribution",
    "identity_test",
]

# Initialize the FastMCP server
mcp = FastMCP(
    name="StochlangServer",
    instructions="""
        This server evaluates and samples stochastic regular expressions, computes total masses of
        cost register automata, approximates distributions by geometric mixtures and runs identity
        tests of sampled data against a reference expression. Expressions use the grammar
        'a' +[0.3] 'b', 'a' . 'b' and ('a') *[0.5]; alphabets are strings of single-character symbols.
        """,
    version=SERVER_VERSION,
    auth=None,
    tools=[])


def _error(e: Exception) -> Dict:
    logger.info(f"Tool call failed: {e}")
    return {"error": f"{type(e).__name__}: {e}"}


def _parse(expression: str, alphabet: str):
    symbols = Alphabet.parse(alphabet)
    return sre.parse_sre(expression, symbols), symbols


# ============================================================================
# MCP tools for stochastic regular expressions
# ============================================================================

@mcp.tool(name="parse_sre", tags={"sre", "parse"}, enabled=True)
async def parse_sre(expression: str, alphabet: str, ctx: Context) -> Dict:
    """
    Parse a stochastic regular expression and return its canonical form.

    Args:
        expression (str): Expression text, e.g. ('a' +[0.5] 'b') *[0.5].
        alphabet (str): Concatenated alphabet symbols, e.g. ab.

    Returns:
        Dict: canonical text, node count, depth and the symbols used, or an error.
    """
    await ctx.debug("parse_sre::tool called.")
    try:
        expr, _ = _parse(expression, alphabet)
    except (StochlangError, ValueError) as e:
        return _error(e)
    return {
        "canonical": sre.print_sre(expr),
        "size": sre.sre_size(expr),
        "depth": sre.sre_depth(expr),
        "symbols": "".join(sre.sre_symbols(expr)),
    }


@mcp.tool(name="eval_sre", tags={"sre", "probability"}, enabled=True)
async def eval_sre(expression: str, alphabet: str, word: str, ctx: Context, via_cra: bool = False) -> Dict:
    """
    Probability of a word under a stochastic regular expression.

    Args:
        expression (str): Expression text.
        alphabet (str): Concatenated alphabet symbols.
        word (str): Non-empty word over the alphabet.
        via_cra (bool): Evaluate the compiled cost register automaton instead.

    Returns:
        Dict: The word and its probability, or an error.
    """
    await ctx.debug("eval_sre::tool called.")
    try:
        expr, symbols = _parse(expression, alphabet)
        word = make_word(word, symbols)
        if via_cra:
            value = cra.eval_cra(cra.compile_sre(expr, symbols), word)
        else:
            value = sre.eval_sre(expr, word)
    except (StochlangError, ValueError) as e:
        return _error(e)
    await ctx.info(f"P({word}) = {value}")
    return {"word": word, "probability": value}


@mcp.tool(name="sample_sre", tags={"sre", "sampling"}, enabled=True)
async def sample_sre(expression: str, alphabet: str, ctx: Context, n: int = 10, seed: int = 0) -> Dict:
    """
    Draw words from a stochastic regular expression with a seeded generator.

    Returns:
        Dict: The drawn words in order, or an error.
    """
    await ctx.debug("sample_sre::tool called.")
    if n < 0:
        return {"error": "n must be non-negative"}
    try:
        expr, _ = _parse(expression, alphabet)
    except (StochlangError, ValueError) as e:
        return _error(e)
    rng = np.random.default_rng(seed)
    return {"words": [sre.sample_sre(expr, rng) for _ in range(n)], "seed": seed}


@mcp.tool(name="truncation_threshold", tags={"sre", "truncation"}, enabled=True)
async def truncation_threshold(expression: str, alphabet: str, epsilon: float, ctx: Context) -> Dict:
    """
    Length θ beyond which the expression keeps less than ε/3 of its mass, with the truncated domain size.

    Returns:
        Dict: theta, epsilon, the exact number of words up to θ and the |Σ|^(θ+1) bound, or an error.
    """
    await ctx.debug("truncation_threshold::tool called.")
    try:
        expr, symbols = _parse(expression, alphabet)
        threshold = sre.truncation_threshold(expr, epsilon)
        size = identity_testing.domain_size(symbols, threshold.theta)
    except (StochlangError, ValueError) as e:
        return _error(e)
    return {
        "theta": threshold.theta,
        "epsilon": threshold.epsilon_used,
        "domain_size": size.exact,
        "domain_bound": size.bound if math.isfinite(size.bound) else None,
    }


# ============================================================================
# MCP tools for cost register automata
# ============================================================================

@mcp.tool(name="cra_total_weight", tags={"cra", "mass"}, enabled=True)
async def cra_total_weight(cra_text: str, ctx: Context, dfa_text: Optional[str] = None) -> Dict:
    """
    Total mass of a linear cost register automaton given in the CRA text format,
    optionally restricted to the language of a DFA given in the DFA text format.

    Returns:
        Dict: total, per-state solution, residual and validation diagnostics, or an error.
    """
    await ctx.debug("cra_total_weight::tool called.")
    try:
        automaton = read_cra(cra_text)
        if dfa_text:
            automaton = cra.product_with_dfa(automaton, read_dfa(dfa_text, automaton.alphabet))
        solution = cra.total_weight(automaton)
    except (StochlangError, ValueError) as e:
        return _error(e)
    if not solution.validated:
        await ctx.info("The total weight could not be validated by the truncated cross-check.")
    return {**solution.model_dump(), "status": solution.status}


@mcp.tool(name="cra_is_stochastic", tags={"cra", "stochastic"}, enabled=True)
async def cra_is_stochastic(cra_text: str, ctx: Context) -> Dict:
    """
    Decide whether a non-negative linear CRA defines a probability distribution over non-empty words.

    Returns:
        Dict: stochastic flag, total, and the finiteness/non-negativity/validation diagnostics, or an error.
    """
    await ctx.debug("cra_is_stochastic::tool called.")
    try:
        report = cra.is_stochastic(read_cra(cra_text))
    except (StochlangError, ValueError) as e:
        return _error(e)
    return report.model_dump()


# ============================================================================
# MCP tools for approximation and testing
# ============================================================================

@mcp.tool(name="approximate_distribution", tags={"geometric", "approximation"}, enabled=True)
async def approximate_distribution(
    distribution: Dict[str, float], alphabet: str, epsilon: float, ctx: Context, as_sre: bool = False
) -> Dict:
    """
    Approximate a finite-support distribution within ℓ1 distance ε by a mixture of geometric distributions.

    Args:
        distribution (Dict[str, float]): Word to probability; must sum to 1.
        alphabet (str): Concatenated alphabet symbols.
        epsilon (float): Target ℓ1 error in (0,1).
        as_sre (bool): Also return the mixture as a stochastic regular expression.

    Returns:
        Dict: The mixture components (weight, alpha, word), optionally the SRE, or an error.
    """
    await ctx.debug("approximate_distribution::tool called.")
    try:
        symbols = Alphabet.parse(alphabet)
        for word in distribution:
            make_word(word, symbols)
        mixture = geometric.approximate_finite_support(distribution, epsilon)
        result = {
            "components": [
                {"weight": weight, "alpha": g.alpha, "word": g.base} for weight, g in mixture.components
            ]
        }
        if as_sre:
            result["sre"] = sre.print_sre(geometric.mixture_to_sre(mixture))
    except (StochlangError, ValueError) as e:
        return _error(e)
    return result


@mcp.tool(name="identity_test", tags={"testing", "identity"}, enabled=True)
async def identity_test(
    reference: str,
    alphabet: str,
    epsilon: float,
    ctx: Context,
    delta: float = 0.2,
    seed: int = 0,
    mode: str = "l1",
    generator: Optional[str] = None,
    samples: Optional[List[str]] = None,
    sample_budget_override: Optional[int] = None,
) -> Dict:
    """
    Test whether sampled data comes from the reference expression.

    The samples come from ``samples`` (replayed in order) when given, else from the ``generator``
    expression, else from the reference itself.

    Args:
        reference (str): Reference expression Q.
        alphabet (str): Concatenated alphabet symbols.
        epsilon (float): Distance parameter in (0,1).
        delta (float): Failure probability in (0,1).
        seed (int): Seed of the generator.
        mode (str): l1 or linf.
        generator (Optional[str]): Expression to sample P from.
        samples (Optional[List[str]]): Recorded words to replay as P.
        sample_budget_override (Optional[int]): Fixed sample count for the ℓ1 tester.

    Returns:
        Dict: The verdict with statistic, threshold, θ, domain size and sample counts, or an error.
    """
    await ctx.debug("identity_test::tool called.")
    if mode not in ("l1", "linf"):
        return {"error": f"mode must be l1 or linf, got {mode!r}"}
    try:
        expr, symbols = _parse(reference, alphabet)
        cfg = identity_testing.TesterConfig(
            epsilon=epsilon, delta=delta, seed=seed, sample_budget_override=sample_budget_override
        )
        if samples is not None:
            source = identity_testing.ReplaySampleSource(samples, symbols)
        elif generator is not None:
            source = identity_testing.SreSampleSource(sre.parse_sre(generator, symbols), seed, symbols)
        else:
            source = identity_testing.SreSampleSource(expr, seed, symbols)
        outcome = identity_testing.identity_test(expr, source, cfg, mode)
    except (StochlangError, ValueError) as e:
        return _error(e)
    await ctx.info(f"{outcome.verdict}: statistic {outcome.statistic} against {outcome.threshold_used}")
    return outcome.model_dump()


# ============================================================================
# MCP resources and prompts
# ============================================================================

@mcp.resource(uri="about://stochlang", name="about_stochlang", tags={"about"}, enabled=True)
async def about(ctx: Context) -> dict:
    """
    Provides information about this server.
    """
    await ctx.debug("about_stochlang resource called.")
    return {
        "version": SERVER_VERSION,
        "name": "StochlangServer",
        "description": "Stochastic regular expressions, cost register automata and identity testing.",
        "tools": TOOL_NAMES,
    }


@mcp.prompt
def identity_test_request(reference: str, alphabet: str) -> PromptMessage:
    """
    Asks for an ℓ1 identity test of recorded samples against a reference expression.

    Returns:
        PromptMessage – a user-role message describing the test to run.
    """
    content = (
        f"Using the alphabet {alphabet!r}, run an l1 identity test with epsilon 0.3 of my samples "
        f"against the reference expression {reference}. Report the verdict, the statistic, the threshold "
        "and how many samples were discarded by truncation."
    )
    return PromptMessage(role="user", content=TextContent(type="text", text=content))


@mcp.prompt
def check_automaton_is_stochastic() -> str:
    """
    Asks whether a cost register automaton defines a probability distribution.

    Returns:
        str – a short user message; FastMCP wraps it.
    """
    return (
        "Check whether the cost register automaton I provide is stochastic. "
        "Report its total weight and whether the result was validated."
    )


# ============================================================================
# MCP Server Entry Point
# ============================================================================
if __name__ == "__main__":
    mcp.run(transport="stdio")
