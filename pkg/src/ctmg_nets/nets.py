"""Backward interval iteration with epsilon-nets of level 1 to 4.

On each interval ``[t - eps, t]`` a tower ``p_1, ..., p_k`` is built from the
values at ``t``: ``p_1`` is linear with the gradient of the best action at
``t``, and ``p_j`` integrates the pointwise optimum of the action qualities
evaluated on ``p_{j-1}``.  The left end of ``p_k`` anchors the next interval.

Everything in the hot loop works on :class:`~ctmg_nets.model.GameArrays`.
Within an interval the segmentation is shared by all locations: a segment
boundary is any switch point of any location at the previous level.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import poly
from .model import ABSORB, REACH, MarkovGame, ModelError, NormedGame, as_fraction, as_normed

log = logging.getLogger(__name__)

DEFAULT_GUARD = 10**8
_NEG = -1e30


class BudgetExceeded(RuntimeError):
    """The requested precision needs more intervals than the guard allows."""


class NumericFailure(RuntimeError):
    def __init__(self, msg, interval=None):
        super().__init__(msg if interval is None else f"interval {interval}: {msg}")
        self.interval = interval


# -- accuracy constants ---------------------------------------------------

_VALUE_CONST = {1: Fraction(1), 2: Fraction(2, 3), 3: Fraction(1, 3), 4: Fraction(2, 15)}
_STRATEGY_CONST = {1: Fraction(2), 2: Fraction(2), 3: Fraction(17, 6), 4: Fraction(67, 30)}


def next_constants(k: int, c: Fraction, d: Fraction) -> tuple[Fraction, Fraction]:
    """Step-error constants of level ``k + 1`` from those of level ``k``."""
    return 2 * c / (k + 2), (8 * c + 3 * d) / (k + 2)


@dataclass(frozen=True)
class NetLevel:
    k: int

    def __post_init__(self):
        if self.k not in _VALUE_CONST:
            raise ValueError(f"level must be 1..4, got {self.k}")

    @property
    def c(self) -> Fraction:
        return _VALUE_CONST[self.k]

    @property
    def d(self) -> Fraction:
        return _STRATEGY_CONST[self.k]


def _level(level) -> NetLevel:
    return level if isinstance(level, NetLevel) else NetLevel(int(level))


# -- budgeting ------------------------------------------------------------


def _iroot_ceil(x: Fraction, k: int) -> int:
    """Smallest integer n >= 1 with n**k >= x."""
    if x <= 1:
        return 1
    n = max(1, int(math.floor(float(x) ** (1.0 / k))))
    while n**k < x:
        n += 1
    while n > 1 and (n - 1) ** k >= x:
        n -= 1
    return n


def choose_epsilon(level, T, precision, guard: int | None = DEFAULT_GUARD) -> tuple[float, int]:
    """Uniform step ``eps = T/n`` with ``c_k * eps**k * T <= precision``.

    ``n = ceil(T * (c_k*T/precision)**(1/k))``, evaluated exactly, and at
    least ``ceil(T)`` so that ``eps <= 1``.
    """
    lv = _level(level)
    T, pi = as_fraction(T), as_fraction(precision)
    if T <= 0:
        raise ValueError("horizon must be > 0")
    if not 0 < pi < 1:
        raise ValueError("precision must lie in (0, 1)")
    # c*(T/n)**k*T <= pi  <=>  n**k >= c*T**(k+1)/pi
    n = _iroot_ceil(lv.c * T ** (lv.k + 1) / pi, lv.k)
    n = max(n, math.ceil(T))
    if guard is not None and n > guard:
        raise BudgetExceeded(f"level {lv.k} needs {n} intervals (guard {guard})")
    return float(T) / n, n


def step_budget_table(T, precisions: Sequence, levels=(1, 2, 3, 4)) -> dict:
    """``{(level, precision): n_intervals}`` without any guard."""
    return {(k, p): choose_epsilon(k, T, p, guard=None)[1] for k in levels for p in precisions}


@dataclass(frozen=True)
class SolverConfig:
    level: NetLevel
    horizon: float
    precision: float | None = None
    epsilon: float | None = None
    guard: int = DEFAULT_GUARD

    def __post_init__(self):
        object.__setattr__(self, "level", _level(self.level))
        if (self.precision is None) == (self.epsilon is None):
            raise ValueError("give exactly one of precision or epsilon")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if self.precision is not None and not 0 < self.precision < 1:
            raise ValueError("precision must lie in (0, 1)")
        if self.epsilon is not None and not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")

    def grid(self) -> tuple[float, int]:
        if self.precision is not None:
            return choose_epsilon(self.level, self.horizon, self.precision, self.guard)
        n = max(1, math.ceil(self.horizon / self.epsilon - 1e-9))
        if n > self.guard:
            raise BudgetExceeded(f"{n} intervals exceed guard {self.guard}")
        return self.horizon / n, n


# -- vectorised step machinery ---------------------------------------------


def _shift(C: np.ndarray, s: float) -> np.ndarray:
    """Re-expand polynomials ``C[..., :]`` (ascending) around ``tau = s``."""
    if s == 0.0:
        return C
    C = C.copy()
    d = C.shape[-1]
    for i in range(d - 1):
        for j in range(d - 2, i - 1, -1):
            C[..., j] += s * C[..., j + 1]
    return C


def _horner(C: np.ndarray, x) -> np.ndarray:
    out = C[..., -1].copy()
    for j in range(C.shape[-1] - 2, -1, -1):
        out = out * x + C[..., j]
    return out


@dataclass
class _Tower:
    """One level of the tower on ``[0, eps]``.

    ``cuts`` are segment boundaries in tau (``cuts[0] = 0``, ``cuts[-1] = eps``);
    ``coef[m, l]`` is location ``l``'s polynomial on segment ``m``;
    ``choice[m, l]`` is the pair that drove it there.
    """

    cuts: np.ndarray
    coef: np.ndarray
    choice: np.ndarray


class Stepper:
    """Per-interval worker bound to one normed game."""

    def __init__(self, arrays):
        self.a = arrays
        self.A = arrays.rates
        self.pl = arrays.pair_loc
        self.sign = arrays.pair_sign
        self.starts = arrays.starts
        self.n = arrays.n
        self.np_ = arrays.n_pairs
        self._ar = np.arange(self.np_)
        multi = np.flatnonzero(arrays.counts > 1)
        self.multi_locs = multi
        self.multi_pairs = np.concatenate([np.arange(arrays.starts[l], arrays.starts[l] + arrays.counts[l]) for l in multi]) if len(multi) else np.zeros(0, dtype=np.intp)
        self.any_choice = len(multi) > 0

    # best pair per location from signed values (ties -> first pair)
    def _argbest(self, S):
        best = np.maximum.reduceat(S, self.starts, axis=-1)
        cand = np.where(S >= np.take(best, self.pl, axis=-1) - poly.TIE_TOL, self._ar, self.np_)
        return np.minimum.reduceat(cand, self.starts, axis=-1)

    def level1(self, v, eps, allowed=None) -> _Tower:
        qual = self.A @ v - v[self.pl]
        if self.any_choice:
            S = self.sign * qual
            if allowed is not None:
                S = np.where(allowed, S, _NEG)
            chosen = self._argbest(S)
        else:
            chosen = self.starts
        coef = np.stack([v, qual[chosen]], axis=-1)[None]
        return _Tower(np.array([0.0, eps]), coef, chosen[None])

    def next_level(self, tw: _Tower, allowed=None, interval=None) -> _Tower:
        cuts, coef = tw.cuts, tw.coef
        m = len(cuts) - 1
        # qualities of every pair on every segment, in global tau
        QC = self.A @ coef - coef[:, self.pl, :]
        new_cuts = [0.0]
        new_choice = []
        new_seg_src = []
        for i in range(m):
            s, e = cuts[i], cuts[i + 1]
            if not self.any_choice:
                new_cuts.append(e)
                new_choice.append(self.starts)
                new_seg_src.append(i)
                continue
            S = self.sign[:, None] * _shift(QC[i], s)
            if allowed is not None:
                S = np.where(allowed[:, None], S, 0.0)
                S[:, 0] = np.where(allowed, S[:, 0], _NEG)
            w = self._argbest(S[:, 0])
            h = e - s
            bad = self._undominated(S, w, h)
            if not bad.size:
                new_cuts.append(e)
                new_choice.append(w)
                new_seg_src.append(i)
                continue
            # exact envelopes for the few locations whose winner may change
            sub = {}
            for l in bad:
                prs = [p for p in range(self.starts[l], self.starts[l] + self.a.counts[l]) if allowed is None or allowed[p]]
                quals = [poly.ActionQuality(self.a.pair_action[p], self.sign[p] * QC[i, p]) for p in prs]
                try:
                    env = poly.envelope_poly(quals, e, maximise=True, lo=s)
                except poly.PolyError as exc:
                    raise NumericFailure(str(exc), interval) from exc
                name2pair = {self.a.pair_action[p]: p for p in prs}
                sub[l] = [(name2pair[a], st) for a, st in env.pieces]
            inner = sorted({st for pcs in sub.values() for _, st in pcs[1:]})
            pts = [s]
            for x in inner:
                if x - pts[-1] >= poly.MIN_PIECE and e - x >= poly.MIN_PIECE:
                    pts.append(x)
            pts.append(e)
            for a_, b_ in zip(pts, pts[1:]):
                mid = 0.5 * (a_ + b_)
                ch = w.copy()
                for l, pcs in sub.items():
                    k = 0
                    while k + 1 < len(pcs) and pcs[k + 1][1] <= mid:
                        k += 1
                    ch[l] = pcs[k][0]
                new_cuts.append(b_)
                new_choice.append(ch)
                new_seg_src.append(i)
        new_cuts = np.array(new_cuts)
        choice = np.array(new_choice)
        # integrate the chosen qualities segment by segment, keeping continuity
        M = len(new_cuts) - 1
        d = QC.shape[-1]
        out = np.zeros((M, self.n, d + 1))
        val = coef[0, :, 0].copy()
        div = np.arange(1, d + 1)
        for j in range(M):
            q = QC[new_seg_src[j], choice[j], :]
            G = np.empty((self.n, d + 1))
            G[:, 1:] = q / div
            G[:, 0] = 0.0
            G[:, 0] = val - _horner(G, new_cuts[j])
            out[j] = G
            val = _horner(G, new_cuts[j + 1])
        return _Tower(new_cuts, out, choice)

    def _undominated(self, S, w, h):
        """Locations where the winner at the segment start might be overtaken."""
        mp = self.multi_pairs
        W = S[w[self.pl[mp]]]
        D = W - S[mp]
        D[:, 0] = W[:, 0] - S[mp, 0]
        if D.shape[1] > 1:
            hp = h ** np.arange(1, D.shape[1])
            lb = D[:, 0] + np.minimum(D[:, 1:], 0.0) @ hp
        else:
            lb = D[:, 0]
        fail = lb < -poly.TIE_TOL
        if not fail.any():
            return np.zeros(0, dtype=np.intp)
        return np.unique(self.pl[mp[fail]])

    def step(self, v, eps, k, allowed=None, interval=None) -> list[_Tower]:
        tw = self.level1(v, eps, allowed)
        towers = [tw]
        for _ in range(2, k + 1):
            tw = self.next_level(tw, allowed, interval)
            towers.append(tw)
        return towers


def _end_values(tw: _Tower) -> np.ndarray:
    return _horner(tw.coef[-1], tw.cuts[-1])


# -- public single-step API -----------------------------------------------


@dataclass
class StepReport:
    interval: int | None
    t_lo: float
    t_hi: float
    envelopes: dict
    gradients: dict


def _vector(game, values) -> np.ndarray:
    arr = game.arrays()
    if isinstance(values, Mapping):
        return np.array([float(values.get(l, 0.0)) for l in arr.locations])
    return np.asarray(values, dtype=float)


def _envelopes(arr, tw: _Tower) -> dict:
    envs = {}
    for l, name in enumerate(arr.locations):
        pieces = []
        for j in range(tw.choice.shape[0]):
            a = arr.pair_action[tw.choice[j, l]]
            if not pieces or pieces[-1][0] != a:
                pieces.append((a, float(tw.cuts[j])))
        envs[name] = poly.Envelope(tuple(pieces), float(tw.cuts[-1]))
    return envs


def step_single(game: NormedGame, values_at_t, eps: float, t: float | None = None, interval=None):
    """One level-1 step: constant gradient of the best action at ``t``."""
    arr = game.arrays()
    v = _vector(game, values_at_t)
    tw = Stepper(arr).level1(v, eps)
    grads = {l: float(tw.coef[0, i, 1]) for i, l in enumerate(arr.locations)}
    t_hi = float(t) if t is not None else 0.0
    rep = StepReport(interval, t_hi - eps, t_hi, _envelopes(arr, tw), grads)
    return v + eps * tw.coef[0, :, 1], rep


@dataclass(frozen=True)
class LocalPiece:
    """Piece of ``p_k`` on ``tau in [tau_lo, tau_hi]`` (coefficients in interval tau)."""

    tau_lo: float
    tau_hi: float
    coeffs: np.ndarray
    action: str


def step_level(game: NormedGame, k: int, anchors, eps: float, t: float | None = None, interval=None):
    """Build the level-``k`` approximation on one interval from right-end anchors.

    Returns ``(pieces, report)`` where ``pieces[loc]`` lists the polynomial
    pieces of ``p_k`` for that location, merged where consecutive segments
    share both the driving action and the polynomial.
    """
    if k not in (1, 2, 3, 4):
        raise ValueError("k must be in 1..4")
    arr = game.arrays()
    v = _vector(game, anchors)
    towers = Stepper(arr).step(v, eps, k, interval=interval)
    top = towers[-1]
    pieces = {}
    for l, name in enumerate(arr.locations):
        out: list[LocalPiece] = []
        for j in range(top.coef.shape[0]):
            a = arr.pair_action[top.choice[j, l]]
            c = top.coef[j, l].copy()
            if out and out[-1].action == a and np.allclose(out[-1].coeffs, c, rtol=0, atol=1e-15):
                out[-1] = LocalPiece(out[-1].tau_lo, float(top.cuts[j + 1]), out[-1].coeffs, a)
            else:
                out.append(LocalPiece(float(top.cuts[j]), float(top.cuts[j + 1]), c, a))
        pieces[name] = out
    t_hi = float(t) if t is not None else 0.0
    grads = {name: [pc.coeffs for pc in pieces[name]] for name in arr.locations}
    rep = StepReport(interval, t_hi - eps, t_hi, _envelopes(arr, top), grads)
    return pieces, rep


# -- full solve ------------------------------------------------------------


@dataclass
class SolveResult:
    game: MarkovGame
    level: NetLevel
    horizon: float
    epsilon: float
    n_intervals: int
    grid: np.ndarray | None
    values0: np.ndarray
    bound: float
    strategy_bound: float
    switches: list
    grid_values: np.ndarray | None = None
    segments: list | None = None
    wall_time: float = 0.0
    restricted: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def locations(self):
        return self.game.arrays().locations

    def value(self, loc: str | None = None) -> float:
        """Value at time 0 of ``loc``, or of the initial distribution."""
        arr = self.game.arrays()
        if loc is None:
            return float(arr.initial @ self.values0)
        return float(self.values0[arr.index[loc]])

    def values(self) -> dict:
        return {l: float(x) for l, x in zip(self.locations, self.values0)}

    def value_function(self, loc: str) -> poly.PiecewiseFunction:
        if self.segments is None:
            raise ValueError("solve was run without recording pieces")
        li = self.game.arrays().index[loc]
        pieces = []
        for t_hi, cuts, coef in self.segments:
            for j in range(coef.shape[0]):
                pieces.append(poly.Piece(t_hi - cuts[j + 1], t_hi - cuts[j], t_hi, coef[j, li].copy()))
        return poly.PiecewiseFunction(pieces)


def _record_policy(n_intervals, n, k, record):
    if record == "auto":
        full = n_intervals * n * (k + 1) <= 3_000_000
        return full, n_intervals * n <= 5_000_000
    if record == "full":
        return True, True
    if record == "values":
        return False, True
    return False, False


def solve_on_grid(
    game: NormedGame,
    grid: np.ndarray,
    level,
    allowed_fn: Callable[[int, float, float], np.ndarray | None] | None = None,
    record: str = "auto",
) -> SolveResult:
    """Backward iteration over an explicit increasing grid ``0 = t_0 < ... < t_N``.

    ``allowed_fn(i, t_lo, t_hi)`` may return a boolean mask over pairs that
    restricts the actions available on interval ``i``.
    """
    lv = _level(level)
    game = as_normed(game)
    arr = game.arrays()
    grid = np.asarray(grid, dtype=float)
    N = len(grid) - 1
    steps = np.diff(grid)
    if N < 1 or np.any(steps <= 0):
        raise ValueError("grid must be strictly increasing with >= 2 points")
    if steps.max() > 1 + 1e-12:
        raise ValueError("interval lengths must not exceed 1")
    keep_pieces, keep_values = _record_policy(N, arr.n, lv.k, record)
    st = Stepper(arr)
    v = arr.goal.copy()
    gv = np.empty((N + 1, arr.n)) if keep_values else None
    if keep_values:
        gv[N] = v
    segments = [] if keep_pieces else None
    switches = []
    prev = None
    t0 = time.perf_counter()
    for i in range(N - 1, -1, -1):
        t_lo, t_hi = grid[i], grid[i + 1]
        allowed = allowed_fn(i, t_lo, t_hi) if allowed_fn is not None else None
        towers = st.step(v, t_hi - t_lo, lv.k, allowed, interval=i)
        top = towers[-1]
        if st.any_choice:
            ch = top.choice
            if prev is None:
                prev = ch[0]
            for j in range(ch.shape[0]):
                diff = ch[j] != prev
                if diff.any():
                    t_sw = t_hi - top.cuts[j]
                    for l in np.flatnonzero(diff):
                        switches.append((int(l), float(t_sw), int(ch[j, l]), int(prev[l])))
                    prev = ch[j]
        elif prev is None:
            prev = top.choice[0]
        v = _end_values(top)
        if not np.all(np.isfinite(v)):
            raise NumericFailure("non-finite values", i)
        if keep_values:
            gv[i] = v
        if keep_pieces:
            segments.append((float(t_hi), top.cuts.copy(), top.coef.copy()))
    if segments is not None:
        segments.reverse()
    eps_max = float(steps.max())
    bound = float(lv.c) * float(np.sum(steps ** (lv.k + 1)))
    sbound = float(lv.d) * float(np.sum(steps ** (lv.k + 1)))
    res = SolveResult(
        game=game,
        level=lv,
        horizon=float(grid[-1]),
        epsilon=eps_max,
        n_intervals=N,
        grid=grid,
        values0=v,
        bound=bound,
        strategy_bound=sbound,
        switches=switches,
        grid_values=gv,
        segments=segments,
        wall_time=time.perf_counter() - t0,
        restricted=allowed_fn is not None,
    )
    res.extra["first_choice"] = prev
    return res


def uniform_grid(T: float, n: int) -> np.ndarray:
    return T * np.arange(n + 1) / n


def solve(game: NormedGame, config: SolverConfig, record: str = "auto") -> SolveResult:
    """Approximate optimal values on ``[0, T]`` with the configured net level."""
    game = as_normed(game)
    eps, n = config.grid()
    log.info("level %d: %d intervals, eps=%.6g", config.level.k, n, eps)
    res = solve_on_grid(game, uniform_grid(config.horizon, n), config.level, record=record)
    # uniform grid: report the bound straight from eps
    res.epsilon = eps
    res.bound = float(config.level.c) * eps**config.level.k * config.horizon
    res.strategy_bound = float(config.level.d) * eps**config.level.k * config.horizon
    return res
