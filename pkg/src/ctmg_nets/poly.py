"""Piecewise polynomials, low-degree root finding and action envelopes.

Polynomials are ascending coefficient arrays ``c[0] + c[1]*tau + ...`` in a
backward local variable ``tau``: ``tau = 0`` is the later end of an interval
and ``tau`` grows into the past.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_DEGREE = 4
PARALLEL_TOL = 1e-14
TIE_TOL = 1e-14
MIN_PIECE = 1e-12
DISC_TOL = 1e-14


class PolyError(ValueError):
    pass


def _coeffs(p) -> np.ndarray:
    return np.atleast_1d(np.asarray(p, dtype=float))


def polyval(p, x):
    """Horner evaluation of ascending coefficients ``p`` at ``x``."""
    p = _coeffs(p)
    out = np.zeros_like(np.asarray(x, dtype=float)) + p[-1]
    for c in p[-2::-1]:
        out = out * x + c
    return out


def derivative(p) -> np.ndarray:
    p = _coeffs(p)
    if len(p) == 1:
        return np.zeros(1)
    return p[1:] * np.arange(1, len(p))


def antiderivative(p, anchor_value: float = 0.0) -> np.ndarray:
    """Integrate ``p`` so that the result takes ``anchor_value`` at ``tau = 0``.

    ``p`` is the rate at which the value grows into the past (the negated
    time derivative), so the returned ``F`` satisfies ``dF/dtau = p``.
    """
    p = _coeffs(p)
    if len(p) > MAX_DEGREE:
        raise PolyError(f"degree {len(p) - 1} quality cannot be integrated below degree {MAX_DEGREE}")
    out = np.empty(len(p) + 1)
    out[0] = anchor_value
    out[1:] = p / np.arange(1, len(p) + 1)
    return out


def continue_antiderivative(p, start: float, start_value: float) -> np.ndarray:
    """Antiderivative of ``p`` passing through ``(start, start_value)``."""
    F = antiderivative(p)
    F[0] = start_value - polyval(F, start)
    return F


def trim(p, tol: float = PARALLEL_TOL) -> np.ndarray:
    """Drop negligible leading coefficients."""
    p = _coeffs(p)
    d = len(p) - 1
    while d > 0 and abs(p[d]) <= tol:
        d -= 1
    return p[: d + 1].copy()


def taylor_shift(p, s: float) -> np.ndarray:
    """Coefficients of ``u -> p(s + u)``."""
    p = _coeffs(p).copy()
    n = len(p)
    # repeated synthetic division
    for i in range(n - 1):
        for j in range(n - 2, i - 1, -1):
            p[j] += s * p[j + 1]
    return p


# -- roots ----------------------------------------------------------------


def _newton_polish(p, r, lo, hi, steps=3):
    dp = derivative(p)
    for _ in range(steps):
        d = polyval(dp, r)
        if d == 0:
            break
        step = polyval(p, r) / d
        nr = r - step
        if not (lo - 1e-12 <= nr <= hi + 1e-12):
            break
        r = nr
        if abs(step) <= 1e-16 * max(1.0, abs(r)):
            break
    return float(r)


def _bracketed(p, a, b, fa, fb, tol=1e-15):
    """Safeguarded Newton on a sign-change bracket ``[a, b]``."""
    dp = derivative(p)
    x = 0.5 * (a + b)
    for _ in range(200):
        fx = float(polyval(p, x))
        if fx == 0.0:
            return x
        if (fx < 0) == (fa < 0):
            a, fa = x, fx
        else:
            b, fb = x, fx
        d = float(polyval(dp, x))
        nx = x - fx / d if d != 0 else None
        if nx is None or not (a < nx < b):
            nx = 0.5 * (a + b)
        if abs(nx - x) <= tol * max(1.0, abs(x)) or b - a <= tol * max(1.0, abs(x)):
            return nx
        x = nx
    return x


def _quadratic_roots(c, b, a):
    """Real roots of ``a t^2 + b t + c`` for the scaled coefficients."""
    disc = b * b - 4 * a * c
    if disc < -DISC_TOL:
        return []
    if abs(disc) <= DISC_TOL:
        return [-b / (2 * a)]
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    r1 = q / a
    r2 = c / q if q != 0 else r1
    return sorted({r1, r2})


def roots_in_interval(p, lo: float, hi: float) -> list[float]:
    """All real roots of ``p`` (degree <= 3) in ``[lo, hi]``, ascending."""
    p = _coeffs(p)
    if len(p) - 1 > 3:
        raise PolyError("root finding supports degree <= 3")
    if not lo < hi:
        raise PolyError("need lo < hi")
    scale = np.max(np.abs(p))
    if scale == 0:
        return []
    q = trim(p / scale)
    deg = len(q) - 1
    if deg == 0:
        return []
    if deg == 1:
        cand = [-q[0] / q[1]]
    elif deg == 2:
        cand = [_newton_polish(q, r, lo, hi) for r in _quadratic_roots(q[0], q[1], q[2])]
    else:
        cand = _cubic_roots(q, lo, hi)
    out: list[float] = []
    for r in sorted(cand):
        if lo - 1e-15 <= r <= hi + 1e-15:
            r = min(max(r, lo), hi)
            if not out or abs(r - out[-1]) > 1e-13 * max(1.0, abs(r)):
                out.append(float(r))
    return out


def _cubic_roots(q, lo, hi):
    # split at the extrema so each piece is monotone
    dq = derivative(q)
    crit = [x for x in roots_in_interval(dq, lo, hi) if lo < x < hi] if np.any(dq) else []
    knots = [lo, *crit, hi]
    vals = [float(polyval(q, x)) for x in knots]
    roots = []
    tol = 1e-14
    for x, v in zip(knots, vals):
        if abs(v) <= tol:
            # touching zero at a knot (double root at an extremum, or endpoint)
            roots.append(_newton_polish(q, x, lo, hi) if x in crit else x)
    for (a, fa), (b, fb) in zip(zip(knots, vals), zip(knots[1:], vals[1:])):
        if abs(fa) <= tol or abs(fb) <= tol:
            continue
        if (fa < 0) != (fb < 0):
            roots.append(_bracketed(q, a, b, fa, fb))
    return roots


# -- piecewise functions --------------------------------------------------


@dataclass(frozen=True)
class Piece:
    """One polynomial piece on absolute times ``[t_lo, t_hi]``.

    ``coeffs`` are in ``tau = origin - t``; ``origin`` is the right end of
    the solver interval the piece came from.
    """

    t_lo: float
    t_hi: float
    origin: float
    coeffs: np.ndarray

    def __call__(self, t):
        return polyval(self.coeffs, self.origin - np.asarray(t, dtype=float))


class PiecewiseFunction:
    """A continuous piecewise polynomial on ``[t_lo, t_hi]``.

    Pieces are kept in increasing time order.  At a breakpoint the later
    piece (the one to the right) is used.
    """

    def __init__(self, pieces: Sequence[Piece]):
        pieces = sorted(pieces, key=lambda p: p.t_lo)
        if not pieces:
            raise PolyError("empty piecewise function")
        for a, b in zip(pieces, pieces[1:]):
            if abs(a.t_hi - b.t_lo) > 1e-12:
                raise PolyError("pieces are not contiguous")
        self.pieces = list(pieces)
        self._lo = np.array([p.t_lo for p in self.pieces])

    @property
    def t_lo(self) -> float:
        return self.pieces[0].t_lo

    @property
    def t_hi(self) -> float:
        return self.pieces[-1].t_hi

    @property
    def breakpoints(self) -> np.ndarray:
        """Interior breakpoints, increasing."""
        return self._lo[1:].copy()

    def _find(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_lo - 1e-12) or np.any(t > self.t_hi + 1e-12):
            raise PolyError(f"time outside [{self.t_lo}, {self.t_hi}]")
        return np.clip(np.searchsorted(self._lo, t, side="right") - 1, 0, len(self.pieces) - 1)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        idx = np.atleast_1d(self._find(t_arr))
        flat = np.atleast_1d(t_arr)
        out = np.array([self.pieces[i](x) for i, x in zip(idx, flat)], dtype=float)
        return out.reshape(t_arr.shape) if t_arr.shape else float(out[0])

    def left_limit(self, t: float) -> float:
        i = int(self._find(t))
        if i > 0 and abs(self.pieces[i].t_lo - t) <= 1e-15:
            i -= 1
        return float(self.pieces[i](t))

    def max_jump(self) -> float:
        """Largest discontinuity across interior breakpoints."""
        jumps = [abs(a(a.t_hi) - b(b.t_lo)) for a, b in zip(self.pieces, self.pieces[1:])]
        return float(max(jumps, default=0.0))


def evaluate(f: PiecewiseFunction, t):
    return f(t)


# -- envelopes ------------------------------------------------------------


@dataclass(frozen=True)
class ActionQuality:
    action: str
    coeffs: np.ndarray

    def __call__(self, tau):
        return polyval(self.coeffs, tau)


@dataclass(frozen=True)
class Envelope:
    """``pieces[i] = (action, tau_start)``; the action holds until the next start."""

    pieces: tuple[tuple[str, float], ...]
    length: float

    def actions(self) -> list[str]:
        return [a for a, _ in self.pieces]

    def starts(self) -> list[float]:
        return [s for _, s in self.pieces]

    def action_at(self, tau: float) -> str:
        starts = self.starts()
        i = int(np.searchsorted(starts, tau, side="right")) - 1
        return self.pieces[max(i, 0)][0]

    def __len__(self):
        return len(self.pieces)


def _signed(qualities, maximise):
    sign = 1.0 if maximise else -1.0
    return [(q.action, sign * _coeffs(q.coeffs)) for q in qualities]


def _merge(pieces, length):
    out: list[list] = []
    for a, s in pieces:
        if out and out[-1][0] == a:
            continue
        if out and s - out[-1][1] < MIN_PIECE:
            # a too-short predecessor is absorbed by the newcomer
            out[-1][0] = a
            if len(out) > 1 and out[-2][0] == a:
                out.pop()
            continue
        out.append([a, s])
    while len(out) > 1 and length - out[-1][1] < MIN_PIECE:
        out.pop()
    return tuple((a, float(s)) for a, s in out)


def envelope_linear(qualities: Sequence[ActionQuality], eps: float, maximise: bool = True) -> Envelope:
    """Optimal action over ``tau in [0, eps]`` for linear qualities.

    Sorted sweep: actions are visited from best to worst at ``tau = 0`` and
    a stack of ``(action, start)`` pieces is kept; a newcomer that beats the
    top of the stack at ``eps`` pops every piece it overtakes before that
    piece starts.  Each action enters and leaves the stack at most once.
    """
    if not qualities:
        raise PolyError("no actions")
    lines = []
    for a, c in _signed(qualities, maximise):
        if len(trim(c)) > 2:
            raise PolyError("envelope_linear needs degree <= 1 qualities")
        c = np.pad(c, (0, max(0, 2 - len(c))))
        lines.append((a, float(c[0]), float(c[1])))
    # best first at tau = 0; equal intercepts: steeper first; then by name
    lines.sort(key=lambda x: (-x[1], -x[2], x[0]))

    def at(line, tau):
        return line[1] + line[2] * tau

    stack = [(lines[0], 0.0)]
    for new in lines[1:]:
        top, start = stack[-1]
        if not at(new, eps) > at(top, eps) + TIE_TOL:
            continue
        while True:
            top, start = stack[-1]
            dslope = new[2] - top[2]
            if abs(dslope) <= PARALLEL_TOL:
                x = 0.0 if new[1] >= top[1] else math.inf
            else:
                x = (top[1] - new[1]) / dslope
            if x > start:
                stack.append((new, min(max(x, 0.0), eps)))
                break
            stack.pop()
            if not stack:
                stack.append((new, 0.0))
                break
    return Envelope(_merge([(l[0], s) for l, s in stack], eps), eps)


def _best_at(signed, tau):
    vals = [float(polyval(c, tau)) for _, c in signed]
    m = max(vals)
    return min(a for (a, _), v in zip(signed, vals) if v >= m - TIE_TOL)


def envelope_poly(
    qualities: Sequence[ActionQuality],
    eps: float,
    maximise: bool = True,
    lo: float = 0.0,
) -> Envelope:
    """Optimal action over ``tau in [lo, eps]`` for qualities of degree <= 3.

    All pairwise crossings are collected, the optimum is read off at the
    midpoint of every elementary subinterval, and equal neighbours merged.
    """
    if not qualities:
        raise PolyError("no actions")
    signed = _signed(qualities, maximise)
    for a, c in signed:
        if len(trim(c)) - 1 > 3:
            raise PolyError(f"quality of {a} has degree > 3")
    cuts = {lo, eps}
    for i in range(len(signed)):
        for j in range(i + 1, len(signed)):
            ci, cj = signed[i][1], signed[j][1]
            n = max(len(ci), len(cj))
            d = np.pad(ci, (0, n - len(ci))) - np.pad(cj, (0, n - len(cj)))
            d = np.where(np.abs(d) <= PARALLEL_TOL, 0.0, d)
            if np.any(d):
                cuts.update(roots_in_interval(d, lo, eps))
    cuts = sorted(cuts)
    pieces = []
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= 0:
            continue
        pieces.append((_best_at(signed, 0.5 * (a + b)), a))
    if not pieces:
        pieces = [(_best_at(signed, lo), lo)]
    return Envelope(_merge(pieces, eps), eps)
