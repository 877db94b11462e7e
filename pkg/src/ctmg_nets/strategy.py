"""Timed positional strategies: extraction, evaluation and simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import nets
from .model import ABSORB, PLAYERS, REACH, SAFE, MarkovGame, ModelError, NormedGame, as_normed


@dataclass(frozen=True)
class TimedPositionalStrategy:
    """Per-location piecewise constant action choice on ``[0, horizon]``.

    ``pieces[loc]`` is a list of ``(t_start, t_end, action)`` in time order.
    Pieces are half-open ``[t_start, t_end)``; the last one is closed at the
    horizon.  So at an exact switch time the later action applies.
    """

    player: str
    horizon: float
    pieces: Mapping[str, tuple[tuple[float, float, str], ...]]

    def __post_init__(self):
        if self.player not in PLAYERS:
            raise ValueError(f"player must be R or S, got {self.player!r}")
        for loc, pcs in self.pieces.items():
            if not pcs:
                raise ValueError(f"{loc}: no pieces")
            if abs(pcs[0][0]) > 1e-12 or abs(pcs[-1][1] - self.horizon) > 1e-9 * max(1.0, self.horizon):
                raise ValueError(f"{loc}: pieces do not cover [0, {self.horizon}]")
            for a, b in zip(pcs, pcs[1:]):
                if abs(a[1] - b[0]) > 1e-12 * max(1.0, self.horizon):
                    raise ValueError(f"{loc}: gap or overlap at {a[1]}")

    def action_at(self, loc: str, t: float) -> str:
        pcs = self.pieces[loc]
        starts = [p[0] for p in pcs]
        i = int(np.searchsorted(starts, t, side="right")) - 1
        return pcs[min(max(i, 0), len(pcs) - 1)][2]

    def switch_times(self) -> list[float]:
        return sorted({p[0] for pcs in self.pieces.values() for p in pcs[1:]})

    def scaled(self, factor: float) -> "TimedPositionalStrategy":
        """Stretch time by ``factor`` (e.g. ``1/lambda`` to undo norming)."""
        return TimedPositionalStrategy(
            self.player,
            self.horizon * factor,
            {l: tuple((a * factor, b * factor, x) for a, b, x in pcs) for l, pcs in self.pieces.items()},
        )


@dataclass(frozen=True)
class SwitchPointReport:
    points: tuple[tuple[str, float, str, str], ...]
    per_location: dict
    total: int


@dataclass(frozen=True)
class EvaluationReport:
    values: dict
    value: float
    method: str
    bound: float
    ci: tuple[float, float] | None = None
    extra: dict = field(default_factory=dict)


def extract_strategy(result: nets.SolveResult, player: str) -> TimedPositionalStrategy:
    """Strategy of ``player`` read off the top-level envelopes of a solve."""
    game = result.game
    arr = game.arrays()
    T = result.horizon
    first = result.extra.get("first_choice")
    if first is None:
        first = arr.starts
    events: dict[int, list] = {}
    for l, t, before, after in result.switches:
        events.setdefault(l, []).append((t, before, after))
    pieces = {}
    for li, loc in enumerate(arr.locations):
        if game.owner.get(loc) != player:
            continue
        cur = int(first[li])
        start = 0.0
        out = []
        for t, before, after in sorted(events.get(li, []), key=lambda e: e[0]):
            out.append((start, t, arr.pair_action[cur]))
            start, cur = t, after
        out.append((start, T, arr.pair_action[cur]))
        merged = []
        for p in out:
            if merged and merged[-1][2] == p[2]:
                merged[-1] = (merged[-1][0], p[1], p[2])
            elif p[1] - p[0] > 0 or not merged:
                merged.append(p)
        pieces[loc] = tuple(merged)
    return TimedPositionalStrategy(player, T, pieces)


def count_switch_points(s: TimedPositionalStrategy) -> SwitchPointReport:
    points = []
    per = {}
    for loc, pcs in s.pieces.items():
        c = 0
        for a, b in zip(pcs, pcs[1:]):
            if a[2] != b[2] and 0 < b[0] < s.horizon:
                points.append((loc, b[0], a[2], b[2]))
                c += 1
        per[loc] = c
    points.sort(key=lambda p: (p[1], p[0]))
    return SwitchPointReport(tuple(points), per, len(points))


def check_strategy(game: MarkovGame, s: TimedPositionalStrategy) -> None:
    """Raise :class:`ModelError` if ``s`` does not fit ``game``."""
    for loc, pcs in s.pieces.items():
        if loc not in game.owner:
            raise ModelError(f"strategy mentions unknown location {loc}")
        if game.owner[loc] != s.player and len(game.enabled(loc)) > 1:
            raise ModelError(f"location {loc} is not owned by player {s.player}")
        enabled = game.enabled(loc)
        for _, _, a in pcs:
            if a not in enabled:
                raise ModelError(f"action {a} is not enabled at {loc}")


def _piece_index(s: TimedPositionalStrategy, loc: str, mids: np.ndarray) -> np.ndarray:
    starts = np.array([p[0] for p in s.pieces[loc]])
    return np.clip(np.searchsorted(starts, mids, side="right") - 1, 0, len(starts) - 1)


def evaluate_best_response(
    game: NormedGame,
    fixed: TimedPositionalStrategy,
    level,
    precision: float | None = None,
    epsilon: float | None = None,
    opponent: TimedPositionalStrategy | None = None,
) -> EvaluationReport:
    """Value of ``fixed`` against an optimal opponent, via a restricted solve.

    The solver grid is overlaid with the strategy's switch times so that on
    every interval the fixed player's locations have a single action.  With
    ``opponent`` given both players are pinned.
    """
    game = as_normed(game)
    check_strategy(game, fixed)
    if opponent is not None:
        check_strategy(game, opponent)
    arr = game.arrays()
    T = fixed.horizon
    cfg = nets.SolverConfig(level, T, precision=precision, epsilon=epsilon)
    eps, n = cfg.grid()
    pts = [nets.uniform_grid(T, n)]
    fixed_all = [fixed] + ([opponent] if opponent is not None else [])
    for s in fixed_all:
        pts.append(np.array(s.switch_times()))
    grid = np.unique(np.concatenate(pts))
    keep = np.concatenate([[True], np.diff(grid) > 1e-12])
    grid = grid[keep]
    grid[-1] = T
    mids = 0.5 * (grid[:-1] + grid[1:])

    # per-interval pinned pair for each fixed location
    pinned = []
    for s in fixed_all:
        for loc in s.pieces:
            li = arr.index[loc]
            if arr.counts[li] < 2:
                continue
            pcs = s.pieces[loc]
            pair_of_piece = np.array([arr.pair_index(loc, p[2]) for p in pcs])
            pinned.append((arr.pairs_of(li), pair_of_piece[_piece_index(s, loc, mids)]))
    for s in fixed_all:
        for li, loc in enumerate(arr.locations):
            if game.owner[loc] == s.player and arr.counts[li] > 1 and loc not in s.pieces:
                raise ModelError(f"strategy for {s.player} does not cover location {loc}")
    cache: dict = {}

    def allowed(i, lo, hi):
        key = tuple(int(p[i]) for _, p in pinned)
        m = cache.get(key)
        if m is None:
            m = np.ones(arr.n_pairs, dtype=bool)
            for (rng, _), pair in zip(pinned, key):
                m[rng.start : rng.stop] = False
                m[pair] = True
            cache[key] = m
        return m

    res = nets.solve_on_grid(game, grid, level, allowed_fn=allowed if pinned else None, record="none")
    return EvaluationReport(
        values=res.values(),
        value=res.value(),
        method="best-response-nets",
        bound=res.bound,
        extra={"intervals": res.n_intervals, "epsilon": res.epsilon, "result": res},
    )


# -- simulation -------------------------------------------------------------


@dataclass(frozen=True)
class SimulationResult:
    estimate: float
    ci: tuple[float, float]
    stderr: float
    n: int
    hits: int


def _successor_tables(arr):
    P = arr.rates / arr.uniform_rate
    deg = max(1, int((P > 0).sum(axis=1).max()))
    idx = np.zeros((arr.n_pairs, deg), dtype=np.intp)
    cdf = np.ones((arr.n_pairs, deg))
    for p in range(arr.n_pairs):
        nz = np.flatnonzero(P[p] > 0)
        idx[p, : len(nz)] = nz
        idx[p, len(nz) :] = nz[-1]
        c = np.cumsum(P[p, nz])
        c[-1] = 1.0
        cdf[p, : len(nz)] = c
    return idx, cdf


def simulate(
    game: MarkovGame,
    s_reach: TimedPositionalStrategy | None,
    s_safe: TimedPositionalStrategy | None,
    T: float,
    n: int,
    seed: int = 0,
    block: int = 1 << 16,
) -> SimulationResult:
    """Monte Carlo estimate of the probability of sitting in the goal at ``T``.

    Trajectories follow the uniformised chain: jump epochs arrive at the
    uniform rate and at each epoch the successor (self-loop included) is
    drawn from the action the strategy picks at that location and time.
    Block ``b`` of ``block`` trajectories uses its own Philox stream keyed
    by ``(seed, b)``, so results do not depend on how blocks are scheduled.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    arr = game.arrays()
    lam = arr.uniform_rate
    succ, cdf = _successor_tables(arr)
    default_pair = arr.starts.copy()
    timed = []  # (loc index, piece starts, piece pairs)
    for li, loc in enumerate(arr.locations):
        if arr.counts[li] < 2:
            continue
        s = s_reach if game.owner[loc] == REACH else s_safe
        if s is None or loc not in s.pieces:
            raise ModelError(f"no strategy covers location {loc}")
        if s.horizon < T - 1e-9 * max(1.0, T):
            raise ModelError(f"strategy for {loc} ends at {s.horizon} < {T}")
        pcs = s.pieces[loc]
        pairs = np.array([arr.pair_index(loc, p[2]) for p in pcs])
        if len(pcs) == 1:
            default_pair[li] = pairs[0]
        else:
            timed.append((li, np.array([p[0] for p in pcs]), pairs))
    init_cdf = np.cumsum(arr.initial)
    init_cdf[-1] = 1.0
    hits = 0
    for b in range(math.ceil(n / block)):
        m = min(block, n - b * block)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(b,))))
        loc = np.searchsorted(init_cdf, rng.random(m), side="right")
        loc = np.minimum(loc, arr.n - 1)
        t = np.zeros(m)
        active = np.arange(m)
        while active.size:
            t[active] += rng.exponential(1.0 / lam, size=active.size)
            active = active[t[active] < T]
            if not active.size:
                break
            la = loc[active]
            pair = default_pair[la]
            for li, starts, pairs in timed:
                sel = np.flatnonzero(la == li)
                if sel.size:
                    k = np.searchsorted(starts, t[active[sel]], side="right") - 1
                    pair[sel] = pairs[np.clip(k, 0, len(pairs) - 1)]
            u = rng.random(active.size)
            k = (cdf[pair] <= u[:, None]).sum(axis=1)
            k = np.minimum(k, cdf.shape[1] - 1)
            loc[active] = succ[pair, k]
        hits += int(arr.goal[loc].sum())
    p = hits / n
    se = math.sqrt(p * (1 - p) / n)
    return SimulationResult(p, (p - 1.96 * se, p + 1.96 * se), se, n, hits)
