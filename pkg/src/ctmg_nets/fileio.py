"""Text formats: model files, strategy files and result tables.

Model file::

    ctmg 1
    location lS S
    location G R
    goal G
    init lS 1
    rate lS b G 1/8

Strategy file::

    strategy R
    piece lR 0 1.12317928717512 b
"""

from __future__ import annotations

import csv
import io
import json
import re
from fractions import Fraction

from .model import PLAYERS, MarkovGame, as_fraction
from .strategy import TimedPositionalStrategy

IDENT = re.compile(r"^[A-Za-z0-9_]+$")
RESULT_HEADER = ("location", "value", "lower", "upper")
JSON_FIELDS = ("model", "level", "epsilon", "intervals", "bound", "values", "switch_points", "wall_time_ms")


class FormatError(ValueError):
    def __init__(self, msg, line=None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


def _tokens(text):
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def _number(tok, no) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise FormatError(f"bad number {tok!r}", no) from None


def _ident(tok, no):
    if not IDENT.match(tok):
        raise FormatError(f"bad identifier {tok!r}", no)
    return tok


def parse_model(text: str) -> MarkovGame:
    it = _tokens(text)
    try:
        no, head = next(it)
    except StopIteration:
        raise FormatError("empty model file") from None
    if head != ["ctmg", "1"]:
        raise FormatError("first line must be 'ctmg 1'", no)
    locations, owner, goal, init, rates = [], {}, [], {}, {}
    refs = []
    for no, tok in it:
        kw, args = tok[0], tok[1:]
        if kw == "location":
            if len(args) != 2 or args[1] not in PLAYERS:
                raise FormatError("expected 'location <id> <R|S>'", no)
            name = _ident(args[0], no)
            if name in owner:
                raise FormatError(f"location {name} declared twice", no)
            locations.append(name)
            owner[name] = args[1]
        elif kw == "goal":
            if len(args) != 1:
                raise FormatError("expected 'goal <id>'", no)
            goal.append(_ident(args[0], no))
            refs.append((no, args[0]))
        elif kw == "init":
            if len(args) != 2:
                raise FormatError("expected 'init <id> <number>'", no)
            init[_ident(args[0], no)] = _number(args[1], no)
            refs.append((no, args[0]))
        elif kw == "rate":
            if len(args) != 4:
                raise FormatError("expected 'rate <src> <action> <dst> <number>'", no)
            src, act, dst = (_ident(a, no) for a in args[:3])
            key = (src, act, dst)
            if key in rates:
                raise FormatError(f"duplicate rate {src} {act} {dst}", no)
            rates[key] = _number(args[3], no)
            refs += [(no, src), (no, dst)]
        else:
            raise FormatError(f"unknown directive {kw!r}", no)
    for no, name in refs:
        if name not in owner:
            raise FormatError(f"undeclared location {name}", no)
    return MarkovGame.from_rates(locations, owner, rates, init, goal)


def _num(x: Fraction) -> str:
    x = as_fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def format_model(game: MarkovGame, comment: str | None = None) -> str:
    """Serialise ``game``; self-loops are left out."""
    out = []
    if comment:
        out += [f"# {line}" for line in comment.splitlines()]
    out.append("ctmg 1")
    for l in game.locations:
        out.append(f"location {l} {game.owner[l]}")
    for l in sorted(game.goal, key=game.locations.index):
        out.append(f"goal {l}")
    for l in game.locations:
        p = game.initial.get(l, 0)
        if p:
            out.append(f"init {l} {_num(p)}")
    for l in game.locations:
        for a in game.actions[l]:
            for dst, r in sorted(game.row(l, a).items(), key=lambda kv: game.locations.index(kv[0])):
                if dst != l and r != 0:
                    out.append(f"rate {l} {a} {dst} {_num(r)}")
    return "\n".join(out) + "\n"


def read_model(path) -> MarkovGame:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def write_model(game: MarkovGame, path, comment=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_model(game, comment))


# -- strategies -------------------------------------------------------------


def format_strategy(s: TimedPositionalStrategy) -> str:
    out = [f"strategy {s.player}"]
    for loc, pcs in s.pieces.items():
        for a, b, act in pcs:
            out.append(f"piece {loc} {a:.17g} {b:.17g} {act}")
    return "\n".join(out) + "\n"


def parse_strategy(text: str) -> TimedPositionalStrategy:
    it = _tokens(text)
    try:
        no, head = next(it)
    except StopIteration:
        raise FormatError("empty strategy file") from None
    if len(head) != 2 or head[0] != "strategy" or head[1] not in PLAYERS:
        raise FormatError("first line must be 'strategy <R|S>'", no)
    pieces: dict = {}
    for no, tok in it:
        if tok[0] != "piece" or len(tok) != 5:
            raise FormatError("expected 'piece <location> <t_start> <t_end> <action>'", no)
        loc, act = _ident(tok[1], no), _ident(tok[4], no)
        try:
            a, b = float(tok[2]), float(tok[3])
        except ValueError:
            raise FormatError("bad time", no) from None
        if not b > a:
            raise FormatError("empty piece", no)
        pieces.setdefault(loc, []).append((a, b, act))
    if not pieces:
        raise FormatError("strategy has no pieces")
    horizon = max(p[-1][1] for p in pieces.values())
    try:
        return TimedPositionalStrategy(head[1], horizon, {l: tuple(sorted(p)) for l, p in pieces.items()})
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def read_strategy(path) -> TimedPositionalStrategy:
    with open(path, encoding="utf-8") as fh:
        return parse_strategy(fh.read())


def write_strategy(s: TimedPositionalStrategy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_strategy(s))


# -- results ----------------------------------------------------------------


def _clamp(x):
    return min(1.0, max(0.0, x))


def result_csv(values: dict, bound: float, clamp: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for loc, v in values.items():
        shown = _clamp(v) if clamp else v
        w.writerow([loc, f"{shown:.12g}", f"{_clamp(v - bound):.12g}", f"{_clamp(v + bound):.12g}"])
    return buf.getvalue()


def result_json(model, level, epsilon, intervals, bound, values, switch_points, wall_time_ms, **extra) -> str:
    obj = dict(
        model=model,
        level=level,
        epsilon=epsilon,
        intervals=intervals,
        bound=bound,
        values=values,
        switch_points=switch_points,
        wall_time_ms=wall_time_ms,
    )
    obj.update(extra)

    def enc(o):
        if isinstance(o, float):
            return float(f"{o:.17g}")
        if isinstance(o, dict):
            return {k: enc(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [enc(v) for v in o]
        return o

    return json.dumps(enc(obj), indent=2) + "\n"


def study_csv(study) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("level", "epsilon", "error", "order"))
    for k, e, err in study.rows():
        order = study.orders.get(k)
        w.writerow([k, f"{e:.12g}", f"{err:.12g}", "" if order is None else f"{order:.6g}"])
    return buf.getvalue()
