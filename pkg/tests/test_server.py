"""
Tests for the FastMCP tool server, run in memory through fastmcp.Client.
"""

import json

import pytest
from fastmcp import Client

from stochlang.stochlang_server import SERVER_VERSION, TOOL_NAMES, mcp

COIN_STAR = "('a' +[0.5] 'b') *[0.5]"
COUNT_AS_K4 = """
cra states=1 registers=2 alphabet=ab
init 0.0 1.0
trans 0 a 0 0.25 0.25 0.0 0.25
trans 0 b 0 0.25 0.0 0.0 0.25
final 0 1.0 0.0
"""

pytestmark = pytest.mark.anyio


async def call(tool, **arguments):
    async with Client(mcp) as client:
        result = await client.call_tool(tool, arguments)
    return result.structured_content


async def test_lists_every_tool():
    async with Client(mcp) as client:
        tools = await client.list_tools()
    assert {tool.name for tool in tools} == set(TOOL_NAMES)


async def test_parse_sre_tool():
    result = await call("parse_sre", expression=COIN_STAR, alphabet="ab")
    assert result == {"canonical": COIN_STAR, "size": 4, "depth": 3, "symbols": "ab"}


async def test_parse_sre_reports_errors():
    result = await call("parse_sre", expression="'c'", alphabet="ab")
    assert result["error"].startswith("ParseError")


async def test_eval_sre_tool():
    result = await call("eval_sre", expression=COIN_STAR, alphabet="ab", word="ab")
    assert result["probability"] == pytest.approx(0.0625)
    via_cra = await call("eval_sre", expression=COIN_STAR, alphabet="ab", word="ab", via_cra=True)
    assert via_cra["probability"] == pytest.approx(0.0625)


async def test_eval_sre_rejects_empty_word():
    result = await call("eval_sre", expression=COIN_STAR, alphabet="ab", word="")
    assert result["error"].startswith("WordError")


async def test_sample_sre_is_seeded():
    first = await call("sample_sre", expression=COIN_STAR, alphabet="ab", n=8, seed=4)
    second = await call("sample_sre", expression=COIN_STAR, alphabet="ab", n=8, seed=4)
    assert first == second
    assert len(first["words"]) == 8


async def test_truncation_threshold_tool():
    result = await call("truncation_threshold", expression=COIN_STAR, alphabet="ab", epsilon=0.3)
    assert result == {"theta": 4, "epsilon": 0.3, "domain_size": 30, "domain_bound": 32}


async def test_truncation_threshold_bound_past_64_bits():
    result = await call("truncation_threshold", expression="'a' *[0.5]", alphabet="ab", epsilon=1e-18)
    assert result["theta"] == 62
    assert result["domain_size"] == 2**63 - 2
    assert result["domain_bound"] is None


async def test_cra_tools():
    total = await call("cra_total_weight", cra_text=COUNT_AS_K4)
    assert total["total"] == pytest.approx(1.0)
    assert total["status"] == "validated"
    report = await call("cra_is_stochastic", cra_text=COUNT_AS_K4)
    assert report["stochastic"] is True


async def test_cra_total_weight_over_dfa():
    dfa = "dfa states=2 initial=0 accepting=1 alphabet=ab\ntrans 0 a 1\ntrans 0 b 1\ntrans 1 a 1\ntrans 1 b 1\n"
    result = await call("cra_total_weight", cra_text=COUNT_AS_K4, dfa_text=dfa)
    assert result["total"] == pytest.approx(1.0)


async def test_cra_tools_report_format_errors():
    result = await call("cra_is_stochastic", cra_text="cra states=1\n")
    assert result["error"].startswith("FormatError")


async def test_approximate_distribution_tool():
    result = await call(
        "approximate_distribution", distribution={"a": 0.5, "ab": 0.5}, alphabet="ab", epsilon=0.1, as_sre=True
    )
    assert [c["word"] for c in result["components"]] == ["a", "ab"]
    assert all(2 * (1 - c["alpha"]) <= 0.1 for c in result["components"])
    assert "+[0.5]" in result["sre"]


async def test_identity_test_tool():
    result = await call(
        "identity_test", reference="'a' *[0.5]", alphabet="a", epsilon=0.3, sample_budget_override=2000
    )
    assert result["verdict"] == "Accept"
    assert result["samples_drawn"] == 2000


async def test_identity_test_with_replayed_samples():
    result = await call(
        "identity_test", reference="'a' *[0.5]", alphabet="a", epsilon=0.3, samples=["a"] * 10
    )
    assert result["error"].startswith("ExhaustedSourceError")
    rejected = await call(
        "identity_test",
        reference="'a' *[0.5]",
        alphabet="a",
        epsilon=0.3,
        samples=["aaaa"] * 50,
        sample_budget_override=50,
    )
    assert rejected["verdict"] == "Reject"


async def test_identity_test_rejects_unknown_mode():
    result = await call("identity_test", reference="'a'", alphabet="a", epsilon=0.3, mode="l2")
    assert "error" in result


async def test_about_resource():
    async with Client(mcp) as client:
        contents = await client.read_resource("about://stochlang")
    about = json.loads(contents[0].text)
    assert about["version"] == SERVER_VERSION
    assert about["tools"] == TOOL_NAMES


async def test_prompts():
    async with Client(mcp) as client:
        prompt = await client.get_prompt("identity_test_request", {"reference": COIN_STAR, "alphabet": "ab"})
        check = await client.get_prompt("check_automaton_is_stochastic")
    assert COIN_STAR in prompt.messages[0].content.text
    assert "stochastic" in check.messages[0].content.text
