import numpy as np
import pytest

from ctmg_nets import oracle
from ctmg_nets.model import REACH, SAFE, MarkovGame, ModelError
from ctmg_nets.strategy import (
    TimedPositionalStrategy,
    check_strategy,
    count_switch_points,
    evaluate_best_response,
    extract_strategy,
    simulate,
)


@pytest.fixture(scope="module")
def strategies(running_solve_l2):
    return {p: extract_strategy(running_solve_l2, p) for p in (REACH, SAFE)}


def const(player, T, choice):
    return TimedPositionalStrategy(player, T, {l: ((0.0, T, a),) for l, a in choice.items()})


def test_strategy_validation():
    with pytest.raises(ValueError):
        TimedPositionalStrategy(REACH, 1.0, {"x": ((0.0, 0.5, "a"),)})
    with pytest.raises(ValueError):
        TimedPositionalStrategy(REACH, 1.0, {"x": ((0.0, 0.5, "a"), (0.6, 1.0, "b"))})
    with pytest.raises(ValueError):
        TimedPositionalStrategy("Q", 1.0, {})


def test_action_at_uses_later_piece_at_switch():
    s = TimedPositionalStrategy(REACH, 2.0, {"x": ((0.0, 1.0, "a"), (1.0, 2.0, "b"))})
    assert s.action_at("x", 0.999) == "a"
    assert s.action_at("x", 1.0) == "b"
    assert s.action_at("x", 2.0) == "b"
    assert s.switch_times() == [1.0]
    assert s.scaled(0.5).switch_times() == [0.5]


def test_extracted_strategies_match_switch_times(strategies):
    r, s = strategies[REACH], strategies[SAFE]
    assert [p[2] for p in r.pieces["lR"]] == ["b", "a"]
    assert r.pieces["lR"][0][1] == pytest.approx(1.123, abs=5e-3)
    assert s.pieces["lS"][0][1] == pytest.approx(0.609, abs=5e-3)
    assert r.pieces["l"] == ((0.0, 4.0, "a"),)
    rep = count_switch_points(r)
    assert rep.total == 1 and rep.per_location["lR"] == 1


def test_check_strategy_mismatches(running):
    with pytest.raises(ModelError):
        check_strategy(running, const(REACH, 4.0, {"nowhere": "a"}))
    with pytest.raises(ModelError):
        check_strategy(running, const(REACH, 4.0, {"lR": "zzz"}))
    with pytest.raises(ModelError):
        check_strategy(running, const(REACH, 4.0, {"lS": "a"}))


def test_evaluate_extracted_strategy_close_to_optimum(running, running_solve_l2, strategies):
    r = running_solve_l2
    rep = evaluate_best_response(running, strategies[REACH], 2, precision=1e-6)
    assert rep.method == "best-response-nets"
    assert abs(rep.value - r.value()) <= r.bound + r.strategy_bound


def test_evaluate_constant_strategy_is_suboptimal(running, running_solve_l2):
    r = running_solve_l2
    for a in ("a", "b"):
        rep = evaluate_best_response(running, const(REACH, 4.0, {"lR": a, "l": "a"}), 2, precision=1e-6)
        assert rep.value <= r.value() + r.bound + rep.bound


def test_evaluate_pinned_pair_matches_transient(running, strategies):
    rep = evaluate_best_response(running, strategies[REACH], 3, precision=1e-8, opponent=strategies[SAFE])
    ref = oracle.transient_fixed(running, strategies[REACH], strategies[SAFE], 4.0)
    assert rep.value == pytest.approx(ref.value("lS"), abs=rep.bound + ref.bound + 1e-12)


def test_evaluate_requires_full_cover(running):
    with pytest.raises(ModelError):
        evaluate_best_response(running, const(SAFE, 4.0, {}), 2, precision=1e-4)


def test_simulate_deterministic_per_seed(running, strategies):
    a = simulate(running, strategies[REACH], strategies[SAFE], 4.0, 5000, seed=7)
    b = simulate(running, strategies[REACH], strategies[SAFE], 4.0, 5000, seed=7)
    c = simulate(running, strategies[REACH], strategies[SAFE], 4.0, 5000, seed=8)
    assert a == b
    assert a.hits != c.hits


def test_simulate_uniform_game_matches_normed_version(running, strategies):
    doubled = MarkovGame(
        locations=running.locations,
        owner=dict(running.owner),
        actions=dict(running.actions),
        rates={k: 2 * r for k, r in running.rates.items()},
        initial=dict(running.initial),
        goal=running.goal,
    )
    sr, ss = strategies[REACH], strategies[SAFE]
    a = simulate(running, sr, ss, 4.0, 20_000, seed=5)
    b = simulate(doubled, sr.scaled(0.5), ss.scaled(0.5), 2.0, 20_000, seed=5)
    assert a.hits == b.hits


def test_simulate_single_trajectory(running, strategies):
    res = simulate(running, strategies[REACH], strategies[SAFE], 4.0, 1, seed=3)
    assert res.estimate in (0.0, 1.0)


def test_simulate_needs_strategy_for_every_choice(running, strategies):
    with pytest.raises(ModelError):
        simulate(running, strategies[REACH], None, 4.0, 10)


def test_simulate_agrees_with_transient(running, strategies):
    ref = oracle.transient_fixed(running, strategies[REACH], strategies[SAFE], 4.0)
    res = simulate(running, strategies[REACH], strategies[SAFE], 4.0, 200_000, seed=11)
    assert abs(res.estimate - ref.value("lS")) <= 4 * res.stderr
