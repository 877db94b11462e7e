import math

import numpy as np
import pytest

from ctmg_nets import oracle
from ctmg_nets.model import REACH, SAFE, MarkovGame, ModelError, build_running_example
from ctmg_nets.strategy import TimedPositionalStrategy


def two_state(rate=1):
    return MarkovGame.from_rates(["x", "G"], {"x": REACH, "G": REACH}, {("x", "a", "G"): rate}, {"x": 1}, {"G"})


def const(player, T, choice):
    return TimedPositionalStrategy(player, T, {l: ((0.0, T, a),) for l, a in choice.items()})


def test_poisson_weights_match_pmf():
    left, w = oracle.poisson_weights(3.0, 1e-12)
    k = np.arange(left, left + len(w))
    pmf = np.array([math.exp(i * math.log(3.0) - 3.0 - math.lgamma(i + 1)) for i in k])
    np.testing.assert_allclose(w, pmf / pmf.sum(), rtol=1e-10)
    assert 1 - pmf.sum() < 1e-11


def test_poisson_weights_large_rate_do_not_underflow():
    left, w = oracle.poisson_weights(5000.0, 1e-12)
    assert left > 4000 and np.isclose(w.sum(), 1.0)
    assert np.argmax(w) + left in (4999, 5000)


def test_transient_closed_form():
    ref = oracle.transient_fixed(two_state(3), None, None, 0.7)
    assert ref.value("x") == pytest.approx(1 - math.exp(-2.1), abs=1e-11)
    assert ref.extra["mass"][-1] == pytest.approx(1.0, abs=1e-11)


def test_transient_zero_horizon_is_goal_indicator():
    ref = oracle.transient_fixed(two_state(), None, None, 0.0)
    assert ref.as_dict() == {"x": 0.0, "G": 1.0}


def test_transient_needs_cover():
    with pytest.raises(ModelError):
        oracle.transient_fixed(build_running_example(), None, None, 1.0)


def test_transient_switching_strategy_splits_horizon():
    g = build_running_example()
    sr = TimedPositionalStrategy(REACH, 2.0, {"lR": ((0.0, 1.0, "b"), (1.0, 2.0, "a"))})
    ss = const(SAFE, 2.0, {"lS": "a"})
    ref = oracle.transient_fixed(g, sr, ss, 2.0)
    assert ref.extra["cuts"] == [0.0, 1.0, 2.0]
    for m in ref.extra["mass"]:
        assert m == pytest.approx(1.0, abs=1e-11)
    # the forward distribution at T agrees with the backward values
    assert ref.extra["distribution"][g.locations.index("G")] == pytest.approx(ref.value("lS"), abs=1e-11)


def test_fine_single_net_converges_to_closed_form():
    g = build_running_example()
    ref = oracle.fine_single_net(g, 1.0, 1e-3)
    assert ref.n_intervals == 1000 and ref.bound == pytest.approx(1e-3)
    assert oracle.fine_single_net(two_state(), 1.0, 1e-4).value("x") == pytest.approx(1 - math.exp(-1), abs=1e-4)


def test_extrapolation_beats_plain_fine_net():
    g = two_state()
    exact = 1 - math.exp(-1)
    plain = oracle.fine_single_net(g, 1.0, 1e-3).value("x")
    extra = oracle.extrapolated_single_net(g, 1.0, 1e-3).value("x")
    assert abs(extra - exact) < abs(plain - exact) / 100


def test_fine_net_and_transient_agree_on_single_action_game():
    g = two_state(1)
    a = oracle.extrapolated_single_net(g, 2.0, 1e-4).value("x")
    b = oracle.transient_fixed(g, None, None, 2.0).value("x")
    assert a == pytest.approx(b, abs=1e-8)


def test_fit_order_recovers_slope():
    eps = [0.1, 0.05, 0.025]
    order, resid = oracle.fit_order(eps, [3 * e**2 for e in eps])
    assert order == pytest.approx(2.0) and resid < 1e-12
    assert oracle.fit_order([0.1], [1.0]) == (None, None)


def test_transient_config_validation():
    with pytest.raises(ValueError):
        oracle.TransientConfig(tolerance=0)
