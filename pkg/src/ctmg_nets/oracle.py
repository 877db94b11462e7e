"""Reference computations used to check the nets solver.

Nothing here goes through :mod:`ctmg_nets.nets`; the fine level-1 solver
and the Poisson-series transient analysis build their own matrices
straight from the rational rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ABSORB, REACH, MarkovGame, ModelError, uniformise


@dataclass(frozen=True)
class TransientConfig:
    tolerance: float = 1e-12
    max_terms: int = 1_000_000

    def __post_init__(self):
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")


@dataclass
class ReferenceValues:
    locations: tuple
    values: np.ndarray
    bound: float
    epsilon: float = 0.0
    n_intervals: int = 0
    extra: dict = field(default_factory=dict)

    def value(self, loc: str) -> float:
        return float(self.values[self.locations.index(loc)])

    def as_dict(self) -> dict:
        return dict(zip(self.locations, map(float, self.values)))


def _padded_generator(game: MarkovGame):
    """Generator rows as an ``(n, max_actions, n)`` array plus a validity mask."""
    locs = game.locations
    idx = {l: i for i, l in enumerate(locs)}
    n = len(locs)
    acts = [sorted(game.enabled(l)) for l in locs]
    amax = max(len(a) for a in acts)
    G = np.zeros((n, amax, n))
    valid = np.zeros((n, amax), dtype=bool)
    for i, l in enumerate(locs):
        for j, a in enumerate(acts[i]):
            valid[i, j] = True
            if a == ABSORB:
                continue
            for dst, r in game.row(l, a).items():
                if dst != l:
                    G[i, j, idx[dst]] += float(r)
                    G[i, j, i] -= float(r)
    return G, valid, acts


def fine_single_net(game: MarkovGame, T: float, eps: float, guard: int = 10**9) -> ReferenceValues:
    """Level-1 values at time 0 on a uniform grid of step at most ``eps``.

    The game must be normed.  The global error is at most ``eps * T``.
    """
    locs = game.locations
    goal = np.array([1.0 if l in game.goal else 0.0 for l in locs])
    if T <= 0:
        return ReferenceValues(locs, goal, 0.0)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    steps = max(1, math.ceil(T / eps - 1e-9))
    if steps > guard:
        raise ModelError(f"{steps} steps exceed guard {guard}")
    h = T / steps
    G, valid, _ = _padded_generator(game)
    n, amax, _ = G.shape
    Gf = G.reshape(n * amax, n)
    reach = np.array([game.owner.get(l) == REACH for l in locs])
    lo_pad = np.where(valid, 0.0, -np.inf)
    hi_pad = np.where(valid, 0.0, np.inf)
    v = goal.copy()
    single = amax == 1
    for _ in range(steps):
        q = (Gf @ v).reshape(n, amax)
        if single:
            grad = q[:, 0]
        else:
            grad = np.where(reach, (q + lo_pad).max(axis=1), (q + hi_pad).min(axis=1))
        v = v + h * grad
    return ReferenceValues(locs, v, h * T, h, steps)


def extrapolated_single_net(game: MarkovGame, T: float, eps: float) -> ReferenceValues:
    """Richardson combination ``2*f(eps) - f(2*eps)`` of two fine level-1 runs.

    Level-1 errors are first order in the step, so the combination cancels
    the leading term.  ``bound`` stays the rigorous ``eps*T`` of the finer
    run; ``extra["spread"]`` is the gap between the two runs.
    """
    fine = fine_single_net(game, T, eps)
    coarse = fine_single_net(game, T, 2 * eps)
    vals = 2 * fine.values - coarse.values
    spread = float(np.max(np.abs(fine.values - coarse.values))) if len(vals) else 0.0
    return ReferenceValues(fine.locations, vals, fine.bound, fine.epsilon, fine.n_intervals, {"spread": spread})


def poisson_weights(rate: float, tol: float, max_terms: int = 1_000_000):
    """Truncated Poisson(rate) probabilities as ``(left, weights)``.

    Built outward from the mode with relative recurrences and renormalised,
    so large rates do not underflow.  The dropped tails carry less than
    ``tol`` of the mass.
    """
    if rate == 0:
        return 0, np.ones(1)
    mode = int(math.floor(rate))
    up = [1.0]
    k = mode
    while True:
        nxt = up[-1] * rate / (k + 1)
        up.append(nxt)
        k += 1
        if nxt < tol * 1e-3 * 1.0 and k > rate:
            break
        if len(up) > max_terms:
            raise ModelError("Poisson truncation needs too many terms")
    down = []
    w = 1.0
    k = mode
    while k > 0:
        w = w * k / rate
        k -= 1
        down.append(w)
        if w < tol * 1e-3:
            break
    left = k
    weights = np.array(down[::-1] + up)
    weights /= weights.sum()
    # trim the tails down to the requested tolerance
    cum = np.cumsum(weights)
    hi = int(np.searchsorted(cum, 1.0 - tol / 2)) + 1
    lo_cut = int(np.searchsorted(cum, tol / 2))
    weights = weights[lo_cut:hi]
    weights /= weights.sum()
    return left + lo_cut, weights


def _pinned_matrix(game, locs, idx, lam, choose):
    n = len(locs)
    P = np.zeros((n, n))
    for i, l in enumerate(locs):
        a = choose(l)
        if a == ABSORB:
            P[i, i] = 1.0
            continue
        off = 0.0
        for dst, r in game.row(l, a).items():
            if dst != l:
                P[i, idx[dst]] += float(r) / lam
                off += float(r) / lam
        P[i, i] += 1.0 - off
    return P


def transient_fixed(game: MarkovGame, s_reach, s_safe, T: float, cfg: TransientConfig = TransientConfig()) -> ReferenceValues:
    """Goal probability at ``T`` from every location under a fixed strategy pair.

    ``[0, T]`` is cut at every switch time; on each piece the pinned chain
    is homogeneous and the uniformisation series is summed until the
    Poisson tail drops below the tolerance.
    """
    uni = game if game.is_uniform() else uniformise(game)
    locs = uni.locations
    idx = {l: i for i, l in enumerate(locs)}
    goal = np.array([1.0 if l in uni.goal else 0.0 for l in locs])
    init = np.array([float(uni.initial.get(l, 0)) for l in locs])
    lam = float(uni.uniform_rate()) or 1.0
    if T <= 0:
        return ReferenceValues(locs, goal, 0.0, extra={"mass": [float(init.sum())]})

    strategies = [s for s in (s_reach, s_safe) if s is not None]
    cuts = {0.0, float(T)}
    for s in strategies:
        cuts.update(t for t in s.switch_times() if 0 < t < T)
    cuts = sorted(cuts)

    def chooser(mid):
        def choose(l):
            en = uni.enabled(l)
            if len(en) == 1:
                return en[0]
            s = s_reach if uni.owner[l] == REACH else s_safe
            if s is None or l not in s.pieces:
                raise ModelError(f"no strategy covers location {l}")
            a = s.action_at(l, mid)
            if a not in en:
                raise ModelError(f"action {a} not enabled at {l}")
            return a
        return choose

    mats = []
    for a, b in zip(cuts, cuts[1:]):
        mats.append((b - a, _pinned_matrix(uni, locs, idx, lam, chooser(0.5 * (a + b)))))

    def series(P, vec, h, transpose):
        left, w = poisson_weights(lam * h, cfg.tolerance, cfg.max_terms)
        M = P.T if transpose else P
        x = vec.copy()
        for _ in range(left):
            x = M @ x
        acc = w[0] * x
        for wk in w[1:]:
            x = M @ x
            acc += wk * x
        return acc, left + len(w)

    u = goal.copy()
    terms = 0
    for h, P in reversed(mats):
        u, k = series(P, u, h, False)
        terms += k
    # forward pass only to watch probability conservation
    dist = init.copy()
    mass = [float(dist.sum())]
    for h, P in mats:
        dist, _ = series(P, dist, h, True)
        mass.append(float(dist.sum()))
    return ReferenceValues(
        locs,
        u,
        cfg.tolerance * len(mats),
        extra={"mass": mass, "terms": terms, "distribution": dist, "cuts": cuts},
    )


@dataclass
class ConvergenceStudy:
    model: str
    levels: tuple
    eps_list: tuple
    errors: dict
    orders: dict
    residuals: dict
    reference_bound: float

    def rows(self):
        for k in self.levels:
            for e in self.eps_list:
                yield k, e, self.errors[(k, e)]


def fit_order(eps_list: Sequence[float], errors: Sequence[float]):
    """Least-squares slope of ``log(error)`` against ``log(eps)``."""
    if len(eps_list) < 2:
        return None, None
    x = np.log(np.asarray(eps_list, dtype=float))
    y = np.log(np.maximum(np.asarray(errors, dtype=float), 1e-300))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid


def convergence_study(
    game: MarkovGame,
    T: float,
    levels: Sequence[int],
    eps_list: Sequence[float],
    ref_eps: float | None = None,
    model: str = "",
    reference: ReferenceValues | None = None,
    extrapolate: bool = True,
) -> ConvergenceStudy:
    """Max-norm error at time 0 of each level and step against a fine reference.

    The reference is level 1 at ``ref_eps`` (default ``min(1e-6, min(eps)**2)``),
    Richardson-extrapolated unless ``extrapolate`` is false.
    """
    from . import nets

    eps_list = tuple(eps_list)
    if reference is None:
        if ref_eps is None:
            ref_eps = min(1e-6, min(eps_list) ** 2)
        if extrapolate:
            reference = extrapolated_single_net(game, T, ref_eps)
        else:
            reference = fine_single_net(game, T, ref_eps)
    errors, orders, resid = {}, {}, {}
    for k in levels:
        errs = []
        for e in eps_list:
            res = nets.solve(game, nets.SolverConfig(k, T, epsilon=e), record="none")
            err = float(np.max(np.abs(res.values0 - reference.values)))
            errors[(k, e)] = err
            errs.append(err)
        orders[k], resid[k] = fit_order(eps_list, errs)
    return ConvergenceStudy(model, tuple(levels), eps_list, errors, orders, resid, reference.bound)
