"""Continuous-time Markov games: data types, validation and reductions.

A game is stored with exact rational rates.  Floating point only appears
once a solver asks for the dense numeric view (:meth:`MarkovGame.arrays`).

Absorbing locations (no declared rates at all) get a single implicit action
:data:`ABSORB` whose self-loop carries the whole uniform rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

REACH = "R"
SAFE = "S"
PLAYERS = (REACH, SAFE)

ABSORB = "_absorb"

ROW_TOL = 1e-12


class ModelError(ValueError):
    """Raised when an operation needs a well-formed game and did not get one."""


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        # repr gives the shortest decimal that round-trips, so 0.1 -> 1/10
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class DerivedMatrices:
    P: dict
    Q: dict


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    derived: DerivedMatrices | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class GameArrays:
    """Dense float view of a game, one row per (location, action) pair.

    Pairs are ordered by location index, then by action identifier, so
    the first optimal pair in a location is the lexicographically smallest
    action.
    """

    locations: tuple[str, ...]
    index: dict
    pair_loc: np.ndarray
    pair_action: tuple[str, ...]
    pair_sign: np.ndarray
    starts: np.ndarray
    counts: np.ndarray
    rates: np.ndarray
    goal: np.ndarray
    initial: np.ndarray
    uniform_rate: float

    @property
    def n(self) -> int:
        return len(self.locations)

    @property
    def n_pairs(self) -> int:
        return len(self.pair_action)

    def pairs_of(self, loc: int) -> range:
        return range(int(self.starts[loc]), int(self.starts[loc] + self.counts[loc]))

    def pair_index(self, loc: str, action: str) -> int:
        li = self.index[loc]
        for j in self.pairs_of(li):
            if self.pair_action[j] == action:
                return j
        raise KeyError((loc, action))


@dataclass(frozen=True, eq=False)
class MarkovGame:
    """A continuous-time Markov game with rational rates.

    ``rates`` maps ``(src, action, dst)`` to a nonnegative rate; missing
    entries are zero.  ``actions`` lists the declared actions per location;
    an empty tuple marks an absorbing location.
    """

    locations: tuple[str, ...]
    owner: Mapping[str, str]
    actions: Mapping[str, tuple[str, ...]]
    rates: Mapping[tuple[str, str, str], Fraction]
    initial: Mapping[str, Fraction]
    goal: frozenset
    probabilities: Mapping[tuple[str, str, str], Fraction] | None = field(default=None)

    @classmethod
    def from_rates(
        cls,
        locations: Iterable[str],
        owner: Mapping[str, str],
        rates: Mapping,
        initial: Mapping,
        goal: Iterable[str],
        probabilities: Mapping | None = None,
    ):
        locations = tuple(locations)
        acts: dict[str, list[str]] = {l: [] for l in locations}
        clean = {}
        for (src, a, dst), r in rates.items():
            r = as_fraction(r)
            if src in acts and a not in acts[src]:
                acts[src].append(a)
            if r != 0:
                clean[(src, a, dst)] = r
        return cls(
            locations=locations,
            owner=dict(owner),
            actions={l: tuple(sorted(acts[l])) for l in locations},
            rates=clean,
            initial={l: as_fraction(p) for l, p in initial.items()},
            goal=frozenset(goal),
            probabilities=probabilities,
        )

    def __eq__(self, other):
        if not isinstance(other, MarkovGame):
            return NotImplemented
        return (
            self.locations == other.locations
            and dict(self.owner) == dict(other.owner)
            and {l: tuple(a) for l, a in self.actions.items()}
            == {l: tuple(a) for l, a in other.actions.items()}
            and {k: v for k, v in self.rates.items() if v != 0}
            == {k: v for k, v in other.rates.items() if v != 0}
            and {l: p for l, p in self.initial.items() if p != 0}
            == {l: p for l, p in other.initial.items() if p != 0}
            and self.goal == other.goal
        )

    __hash__ = None

    def __post_init__(self):
        pass

    # -- structure -------------------------------------------------------

    @cached_property
    def _rows(self) -> dict:
        rows: dict = {}
        for (src, a, dst), r in self.rates.items():
            rows.setdefault((src, a), {})[dst] = r
        return rows

    def row(self, loc: str, action: str) -> dict:
        """Rates out of ``loc`` under ``action`` (self-loop included)."""
        return dict(self._rows.get((loc, action), {}))

    def exit_mass(self, loc: str, action: str, include_self: bool = True) -> Fraction:
        row = self._rows.get((loc, action), {})
        return sum(
            (r for dst, r in row.items() if include_self or dst != loc), Fraction(0)
        )

    def is_absorbing(self, loc: str) -> bool:
        return len(self.actions.get(loc, ())) == 0

    def enabled(self, loc: str) -> tuple[str, ...]:
        """Enabled actions of ``loc``; absorbing locations get :data:`ABSORB`."""
        if self.is_absorbing(loc):
            return (ABSORB,)
        return tuple(a for a in self.actions[loc] if self.exit_mass(loc, a) > 0)

    def size(self) -> int:
        return sum(1 for r in self.rates.values() if r != 0)

    def uniform_rate(self) -> Fraction:
        """Largest off-diagonal exit rate over all enabled actions."""
        lam = Fraction(0)
        for l in self.locations:
            for a in self.enabled(l):
                if a != ABSORB:
                    lam = max(lam, self.exit_mass(l, a, include_self=False))
        return lam

    def is_uniform(self) -> bool:
        """True when every enabled row (self-loop included) has the same mass."""
        lam = self.uniform_rate()
        for l in self.locations:
            for a in self.enabled(l):
                if a != ABSORB and self.exit_mass(l, a) != lam:
                    return False
        return True

    def derived(self) -> DerivedMatrices:
        P, Q = {}, {}
        for l in self.locations:
            for a in self.enabled(l):
                if a == ABSORB:
                    P[(l, a, l)] = Fraction(1)
                    Q[(l, a, l)] = Fraction(0)
                    continue
                total = self.exit_mass(l, a)
                off = self.exit_mass(l, a, include_self=False)
                for dst, r in self.row(l, a).items():
                    P[(l, a, dst)] = r / total
                    if dst != l:
                        Q[(l, a, dst)] = r
                Q[(l, a, l)] = -off
        return DerivedMatrices(P=P, Q=Q)

    # -- numeric view ----------------------------------------------------

    def arrays(self) -> GameArrays:
        return self._arrays

    @cached_property
    def _arrays(self) -> GameArrays:
        idx = {l: i for i, l in enumerate(self.locations)}
        n = len(self.locations)
        # any rate >= every total exit mass is a valid uniformisation rate
        lam = max(
            (self.exit_mass(l, a) for l in self.locations for a in self.enabled(l) if a != ABSORB),
            default=Fraction(0),
        )
        lam_f = float(lam) if lam > 0 else 1.0
        pair_loc, pair_action, pair_sign, rows = [], [], [], []
        starts, counts = [], []
        for i, l in enumerate(self.locations):
            acts = sorted(self.enabled(l))
            starts.append(len(pair_action))
            counts.append(len(acts))
            sign = 1.0 if self.owner.get(l, REACH) == REACH else -1.0
            for a in acts:
                row = np.zeros(n)
                if a == ABSORB:
                    row[i] = lam_f
                else:
                    for dst, r in self.row(l, a).items():
                        if dst != l:
                            row[idx[dst]] += float(r)
                    row[i] += lam_f - row.sum()
                pair_loc.append(i)
                pair_action.append(a)
                pair_sign.append(sign)
                rows.append(row)
        goal = np.array([1.0 if l in self.goal else 0.0 for l in self.locations])
        init = np.array([float(self.initial.get(l, 0)) for l in self.locations])
        return GameArrays(
            locations=self.locations,
            index=idx,
            pair_loc=np.array(pair_loc, dtype=np.intp),
            pair_action=tuple(pair_action),
            pair_sign=np.array(pair_sign),
            starts=np.array(starts, dtype=np.intp),
            counts=np.array(counts, dtype=np.intp),
            rates=np.array(rows).reshape(len(rows), n),
            goal=goal,
            initial=init,
            uniform_rate=lam_f,
        )


class NormedGame(MarkovGame):
    """A uniform game with rate 1, so rates double as branching probabilities.

    Construction checks that every enabled row, self-loop included, sums
    to 1.  Absorbing locations are implicitly normed.
    """

    certified = True

    def __post_init__(self):
        for l in self.locations:
            for a in self.enabled(l):
                if a == ABSORB:
                    continue
                if abs(float(self.exit_mass(l, a)) - 1.0) > ROW_TOL:
                    raise ModelError(
                        f"row ({l}, {a}) sums to {self.exit_mass(l, a)}, not 1"
                    )


def validate(game: MarkovGame) -> ValidationReport:
    """Collect every well-formedness violation of ``game``."""
    v: list[str] = []
    locs = set(game.locations)
    if len(locs) != len(game.locations):
        v.append("duplicate location identifiers")
    for l in game.locations:
        if game.owner.get(l) not in PLAYERS:
            v.append(f"location {l}: owner must be R or S, got {game.owner.get(l)!r}")
    for (src, a, dst), r in game.rates.items():
        if src not in locs or dst not in locs:
            v.append(f"rate ({src}, {a}, {dst}): unknown location")
            continue
        if not np.isfinite(float(r)) or r < 0:
            v.append(f"rate ({src}, {a}, {dst}) = {r}: must be finite and >= 0")
    for l in game.locations:
        if not game.is_absorbing(l) and not game.enabled(l):
            v.append(f"location {l}: no enabled action")
    for g in game.goal:
        if g not in locs:
            v.append(f"goal {g}: unknown location")
    total = Fraction(0)
    for l, p in game.initial.items():
        if l not in locs:
            v.append(f"init {l}: unknown location")
        if p < 0 or p > 1:
            v.append(f"init {l} = {p}: not a probability")
        total += p
    if abs(float(total) - 1.0) > 1e-12:
        v.append(f"initial distribution sums to {float(total)}, not 1")
    if v:
        return ValidationReport(tuple(v))

    derived = game.derived()
    if game.probabilities is not None:
        for (l, a, dst), p in game.probabilities.items():
            expect = derived.P.get((l, a, dst), Fraction(0))
            if a not in game.enabled(l):
                expect = Fraction(0)
            if abs(float(as_fraction(p) - expect)) > 1e-12:
                v.append(
                    f"P({l}, {a}, {dst}) = {p} differs from R/R(l,a,L) = {expect}"
                )
    for l in game.locations:
        for a in game.enabled(l):
            psum = sum(p for (s, b, _), p in derived.P.items() if s == l and b == a)
            qsum = sum(q for (s, b, _), q in derived.Q.items() if s == l and b == a)
            if abs(float(psum) - 1) > 1e-12:
                v.append(f"P row ({l}, {a}) sums to {psum}")
            if abs(float(qsum)) > 1e-12:
                v.append(f"Q row ({l}, {a}) sums to {qsum}")
    return ValidationReport(tuple(v), None if v else derived)


def _require_valid(game: MarkovGame) -> None:
    report = validate(game)
    if not report.ok:
        raise ModelError("invalid game: " + "; ".join(report.violations))


def uniformise(game: MarkovGame) -> MarkovGame:
    """Pad self-loops so every enabled action leaves at the same total rate.

    The common rate is the largest off-diagonal exit rate.  Off-diagonal
    entries are copied untouched.
    """
    _require_valid(game)
    lam = game.uniform_rate()
    rates = {}
    for l in game.locations:
        for a in game.enabled(l):
            if a == ABSORB:
                continue
            off = Fraction(0)
            for dst, r in game.row(l, a).items():
                if dst != l:
                    rates[(l, a, dst)] = r
                    off += r
            if lam - off > 0:
                rates[(l, a, l)] = lam - off
    # disabled actions keep their (all-zero) rows out of the result
    actions = {l: tuple(a for a in game.enabled(l) if a != ABSORB) for l in game.locations}
    return MarkovGame(
        locations=game.locations,
        owner=dict(game.owner),
        actions=actions,
        rates=rates,
        initial=dict(game.initial),
        goal=game.goal,
    )


def normalise(game: MarkovGame, horizon) -> tuple[NormedGame, float, Fraction]:
    """Return the normed game, the compressed horizon ``lambda*T`` and ``lambda``."""
    uni = uniformise(game)
    lam = uni.uniform_rate()
    if lam == 0:
        # nothing ever moves; any rate works
        lam = Fraction(1)
    rates = {k: r / lam for k, r in uni.rates.items()}
    normed = NormedGame(
        locations=uni.locations,
        owner=dict(uni.owner),
        actions=dict(uni.actions),
        rates=rates,
        initial=dict(uni.initial),
        goal=uni.goal,
    )
    if isinstance(horizon, (Fraction, int)):
        scaled = horizon * lam
    else:
        scaled = float(horizon) * float(lam)
    return normed, scaled, lam


def as_normed(game: MarkovGame) -> NormedGame:
    """Re-type an already normed game, failing if its rows do not sum to 1."""
    if isinstance(game, NormedGame):
        return game
    return NormedGame(
        locations=game.locations,
        owner=dict(game.owner),
        actions=dict(game.actions),
        rates=dict(game.rates),
        initial=dict(game.initial),
        goal=game.goal,
    )


def strip_self_loops(game: MarkovGame) -> MarkovGame:
    """Drop self-loop entries; the model file format never writes them."""
    return MarkovGame(
        locations=game.locations,
        owner=dict(game.owner),
        actions=dict(game.actions),
        rates={k: r for k, r in game.rates.items() if k[0] != k[2]},
        initial=dict(game.initial),
        goal=game.goal,
    )


# -- benchmark builders ---------------------------------------------------


def _fill_self_loops(rates: dict, lam: Fraction = Fraction(1)) -> dict:
    out = dict(rates)
    mass: dict = {}
    for (src, a, dst), r in rates.items():
        if src != dst:
            mass[(src, a)] = mass.get((src, a), Fraction(0)) + r
    for (src, a), m in mass.items():
        if lam - m > 0:
            out[(src, a, src)] = lam - m
    return out


RUNNING_EXAMPLE_EDGES = {
    ("lS", "a", "lR"): Fraction(1),
    ("lS", "b", "G"): Fraction(1, 8),
    ("lS", "b", "bot"): Fraction(7, 8),
    ("lR", "a", "G"): Fraction(1, 20),
    ("lR", "a", "bot"): Fraction(3, 20),
    ("lR", "b", "l"): Fraction(1, 5),
    ("l", "a", "G"): Fraction(1, 10),
}


def build_running_example() -> NormedGame:
    """The five-location normed game with one Reach and one Safe choice.

    ``lS`` (Safe) picks between moving to ``lR`` and gambling on G vs. bot;
    ``lR`` (Reach) picks between a direct shot at G and a detour via ``l``.
    """
    locations = ("lS", "lR", "l", "G", "bot")
    owner = {"lS": SAFE, "lR": REACH, "l": REACH, "G": REACH, "bot": REACH}
    rates = _fill_self_loops(RUNNING_EXAMPLE_EDGES)
    actions = {"lS": ("a", "b"), "lR": ("a", "b"), "l": ("a",), "G": (), "bot": ()}
    return NormedGame(
        locations=locations,
        owner=owner,
        actions=actions,
        rates=rates,
        initial={"lS": Fraction(1)},
        goal=frozenset({"G"}),
    )


def build_erlang(stages: int = 30, stage_rate=10) -> MarkovGame:
    """Erlang race CTMDP: a long fast chain against a lossy slow detour.

    From ``l1`` action ``a`` enters a chain of ``stages`` locations, each left
    at ``stage_rate``; the last one feeds the goal ``l4``.  Action ``b`` moves
    to ``l3``, which splits evenly between ``l4`` and the sink ``l5``.
    """
    if stages < 1:
        raise ModelError("stages must be >= 1")
    stage_rate = as_fraction(stage_rate)
    if stage_rate <= 0:
        raise ModelError("stage_rate must be > 0")
    chain = [f"e{i}" for i in range(1, stages + 1)]
    locations = ("l1", *chain, "l3", "l4", "l5")
    rates = {
        ("l1", "a", chain[0]): Fraction(1),
        ("l1", "b", "l3"): Fraction(1),
        ("l3", "a", "l4"): Fraction(1, 2),
        ("l3", "a", "l5"): Fraction(1, 2),
    }
    for here, there in zip(chain, chain[1:] + ["l4"]):
        rates[(here, "a", there)] = stage_rate
    return MarkovGame.from_rates(
        locations,
        {l: REACH for l in locations},
        rates,
        {"l1": 1},
        {"l4"},
    )


def build_chain_game(n: int = 100, fast=5, slow=1, cross=3, final_split=(2, 2)) -> MarkovGame:
    """Two interleaved chains owned by opposite players.

    Reach location ``r<i>`` either walks its own chain slowly or crosses to
    the Safe chain; Safe location ``s<i>`` either walks its chain fast or
    crosses back one step ahead.  ``s<n>`` splits between ``G`` and ``bot``.
    """
    if n < 2:
        raise ModelError("n must be >= 2")
    fast, slow, cross = (as_fraction(x) for x in (fast, slow, cross))
    split = tuple(as_fraction(x) for x in final_split)
    if min(fast, slow, cross, *split) <= 0:
        raise ModelError("all rates must be > 0")
    r = [f"r{i}" for i in range(1, n + 1)]
    s = [f"s{i}" for i in range(1, n + 1)]
    rates = {}
    for i in range(n):
        nxt_r = r[i + 1] if i + 1 < n else "G"
        rates[(r[i], "slow", nxt_r)] = slow
        rates[(r[i], "cross", s[i])] = cross
        if i + 1 < n:
            rates[(s[i], "fast", s[i + 1])] = fast
            rates[(s[i], "cross", r[i + 1])] = cross
    rates[(s[-1], "a", "G")] = split[0]
    rates[(s[-1], "a", "bot")] = split[1]
    locations = (*r, *s, "G", "bot")
    owner = {l: REACH for l in r} | {l: SAFE for l in s} | {"G": REACH, "bot": REACH}
    return MarkovGame.from_rates(locations, owner, rates, {r[0]: 1}, {"G"})
