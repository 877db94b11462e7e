import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctmg_nets import fileio
from ctmg_nets.fileio import FormatError
from ctmg_nets.model import REACH, SAFE, MarkovGame, build_chain_game, build_erlang, build_running_example, strip_self_loops
from ctmg_nets.strategy import TimedPositionalStrategy

MODEL = """\
# two locations
ctmg 1
location a R   # start
location g R

goal g
init a 1
rate a x g 1/3
rate a y g 0.25
"""


def test_parse_model_basic():
    g = fileio.parse_model(MODEL)
    assert g.locations == ("a", "g")
    assert g.rates[("a", "x", "g")] == Fraction(1, 3)
    assert g.rates[("a", "y", "g")] == Fraction(1, 4)
    assert g.goal == {"g"} and g.initial == {"a": 1}
    assert g.enabled("g") == ("_absorb",)


@pytest.mark.parametrize(
    "text, line",
    [
        ("ctmg 2\n", 1),
        ("ctmg 1\nlocation a Q\n", 2),
        ("ctmg 1\nlocation a R\nlocation a S\n", 3),
        ("ctmg 1\nlocation a R\nrate a x b 1\n", 3),
        ("ctmg 1\nlocation a R\nrate a x a 1\nrate a x a 2\n", 4),
        ("ctmg 1\nlocation a R\nrate a x a one\n", 3),
        ("ctmg 1\nlocation a-b R\n", 2),
        ("ctmg 1\nfrobnicate\n", 2),
    ],
)
def test_parse_model_errors_carry_line(text, line):
    with pytest.raises(FormatError) as err:
        fileio.parse_model(text)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_parse_empty():
    with pytest.raises(FormatError):
        fileio.parse_model("# nothing\n\n")


@pytest.mark.parametrize(
    "game",
    [strip_self_loops(build_running_example()), build_erlang(), build_chain_game(n=6, final_split=("1/3", 2))],
    ids=["running", "erlang", "chain"],
)
def test_model_round_trip(game):
    text = fileio.format_model(game)
    assert "rate lS a lS" not in text
    assert fileio.parse_model(text) == game


def test_self_loops_are_not_written():
    text = fileio.format_model(build_running_example())
    assert fileio.parse_model(text) == strip_self_loops(build_running_example())


@given(st.lists(st.fractions(min_value=0, max_value=100).filter(lambda f: f > 0), min_size=1, max_size=6))
def test_round_trip_random_rates(rates):
    locs = [f"x{i}" for i in range(len(rates))] + ["G"]
    rmap = {(f"x{i}", "go", locs[i + 1]): r for i, r in enumerate(rates)}
    g = MarkovGame.from_rates(locs, {l: REACH for l in locs}, rmap, {"x0": 1}, {"G"})
    assert fileio.parse_model(fileio.format_model(g)) == g


def test_strategy_round_trip():
    s = TimedPositionalStrategy(SAFE, 4.0, {"lS": ((0.0, 0.60904485807387843, "b"), (0.60904485807387843, 4.0, "a"))})
    back = fileio.parse_strategy(fileio.format_strategy(s))
    assert back == s


@pytest.mark.parametrize(
    "text, line",
    [
        ("strategy X\n", 1),
        ("strategy R\npiece a 0 1\n", 2),
        ("strategy R\npiece a 0 x b\n", 2),
        ("strategy R\npiece a 1 1 b\n", 2),
    ],
)
def test_strategy_errors(text, line):
    with pytest.raises(FormatError) as err:
        fileio.parse_strategy(text)
    assert err.value.line == line


def test_strategy_with_gap_rejected():
    with pytest.raises(FormatError):
        fileio.parse_strategy("strategy R\npiece a 0 1 x\npiece a 2 3 x\n")


def test_result_csv_golden():
    text = fileio.result_csv({"a": 0.12345678901234, "g": 1.0000001}, 1e-3)
    assert text == (
        "location,value,lower,upper\n"
        "a,0.123456789012,0.122456789012,0.124456789012\n"
        "g,1,0.9990001,1\n"
    )


def test_result_csv_unclamped_value():
    text = fileio.result_csv({"b": -1e-9}, 1e-6, clamp=False)
    assert text.splitlines()[1] == "b,-1e-09,0,9.99e-07"


def test_result_json_fields_are_fixed():
    text = fileio.result_json("m.ctmg", 2, 0.1, 10, 1e-6, {"a": 1 / 3}, [], 1.5)
    obj = json.loads(text)
    assert tuple(obj) == fileio.JSON_FIELDS
    assert obj["values"]["a"] == 0.33333333333333331
