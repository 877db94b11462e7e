"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid model or strategy,
3 numeric failure or interval guard exceeded.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import fileio, nets, oracle, strategy
from .model import REACH, SAFE, ModelError, build_chain_game, build_erlang, build_running_example, normalise, strip_self_loops, validate

EXIT_USAGE, EXIT_MODEL, EXIT_NUMERIC = 1, 2, 3


class _Exit(Exception):
    def __init__(self, code, msg=""):
        super().__init__(msg)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _load(path):
    try:
        game = fileio.read_model(path)
    except OSError as exc:
        raise _Exit(EXIT_USAGE, f"cannot read model: {exc}")
    except fileio.FormatError as exc:
        raise _Exit(EXIT_MODEL, f"{path}: {exc}")
    report = validate(game)
    if not report.ok:
        raise _Exit(EXIT_MODEL, "\n".join(f"{path}: {v}" for v in report.violations))
    return game


def _load_strategy(path):
    try:
        return fileio.read_strategy(path)
    except OSError as exc:
        raise _Exit(EXIT_USAGE, f"cannot read strategy: {exc}")
    except fileio.FormatError as exc:
        raise _Exit(EXIT_MODEL, f"{path}: {exc}")


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _strategy_path(path, player):
    stem, ext = os.path.splitext(path)
    return f"{stem}.{player}{ext or '.strategy'}"


def cmd_solve(args):
    game = _load(args.model)
    normed, H, lam = normalise(game, args.horizon)
    lam = float(lam)
    print(f"lambda {lam:.17g} scaled_horizon {float(H):.17g}", file=sys.stderr)
    try:
        cfg = nets.SolverConfig(
            args.level,
            float(H),
            precision=None if args.epsilon else args.precision,
            epsilon=args.epsilon,
        )
        t0 = time.perf_counter()
        res = nets.solve(normed, cfg, record="none")
        wall = (time.perf_counter() - t0) * 1000
    except (nets.BudgetExceeded, nets.NumericFailure) as exc:
        raise _Exit(EXIT_NUMERIC, str(exc))
    except ValueError as exc:
        raise _Exit(EXIT_USAGE, str(exc))
    strategies = {p: strategy.extract_strategy(res, p).scaled(1 / lam) for p in (REACH, SAFE)}
    points = []
    for p in (REACH, SAFE):
        for loc, t, before, after in strategy.count_switch_points(strategies[p]).points:
            points.append({"location": loc, "time": t, "before": before, "after": after})
    points.sort(key=lambda d: d["time"])
    values = res.values()
    if args.clamp:
        values = {k: min(1.0, max(0.0, v)) for k, v in values.items()}
    if args.format == "json":
        text = fileio.result_json(
            args.model,
            args.level,
            res.epsilon / lam,
            res.n_intervals,
            res.bound,
            values,
            points,
            wall,
            lam=lam,
            scaled_horizon=float(H),
            initial_value=res.value(),
        )
    else:
        text = fileio.result_csv(res.values(), res.bound, clamp=args.clamp)
    _emit(text, args.out)
    if args.switch_points and args.format != "json":
        for d in points:
            print(f"switch {d['location']} {d['time']:.12g} {d['before']} {d['after']}", file=sys.stderr)
    if args.strategy_out:
        for p, s in strategies.items():
            if s.pieces:
                fileio.write_strategy(s, _strategy_path(args.strategy_out, p))
    return 0


def cmd_evaluate(args):
    game = _load(args.model)
    fixed = _load_strategy(args.strategy)
    normed, H, lam = normalise(game, args.horizon)
    lam = float(lam)
    scaled = fixed.scaled(lam)
    if abs(scaled.horizon - float(H)) > 1e-9 * max(1.0, float(H)):
        raise _Exit(EXIT_MODEL, f"strategy horizon {fixed.horizon} differs from --horizon {args.horizon}")
    try:
        t0 = time.perf_counter()
        rep = strategy.evaluate_best_response(normed, scaled, args.level, precision=args.precision)
        wall = (time.perf_counter() - t0) * 1000
    except ModelError as exc:
        raise _Exit(EXIT_MODEL, str(exc))
    except (nets.BudgetExceeded, nets.NumericFailure) as exc:
        raise _Exit(EXIT_NUMERIC, str(exc))
    if args.format == "json":
        text = fileio.result_json(
            args.model, args.level, rep.extra["epsilon"] / lam, rep.extra["intervals"],
            rep.bound, rep.values, [], wall, method=rep.method, initial_value=rep.value,
        )
    else:
        text = fileio.result_csv(rep.values, rep.bound)
    _emit(text, args.out)
    return 0


def cmd_simulate(args):
    game = _load(args.model)
    sr = _load_strategy(args.strategy_r) if args.strategy_r else None
    ss = _load_strategy(args.strategy_s) if args.strategy_s else None
    try:
        for s in (sr, ss):
            if s is not None:
                strategy.check_strategy(game, s)
        res = strategy.simulate(game, sr, ss, args.horizon, args.n, seed=args.seed)
    except ModelError as exc:
        raise _Exit(EXIT_MODEL, str(exc))
    except ValueError as exc:
        raise _Exit(EXIT_USAGE, str(exc))
    sys.stdout.write(
        f"estimate {res.estimate:.12g}\nci95 {res.ci[0]:.12g} {res.ci[1]:.12g}\n"
        f"stderr {res.stderr:.12g}\nn {res.n}\nseed {args.seed}\n"
    )
    return 0


def cmd_oracle(args):
    game = _load(args.model)
    normed, H, lam = normalise(game, args.horizon)
    if args.mode == "fine":
        ref = oracle.fine_single_net(normed, float(H), args.epsilon)
        _emit(fileio.result_csv(ref.as_dict(), ref.bound), args.out)
    elif args.mode == "transient":
        sr = _load_strategy(args.strategy_r) if args.strategy_r else None
        ss = _load_strategy(args.strategy_s) if args.strategy_s else None
        try:
            ref = oracle.transient_fixed(game, sr, ss, args.horizon)
        except ModelError as exc:
            raise _Exit(EXIT_MODEL, str(exc))
        _emit(fileio.result_csv(ref.as_dict(), ref.bound), args.out)
    else:
        levels = [int(x) for x in _floats(args.levels)]
        study = oracle.convergence_study(
            normed, float(H), levels, _floats(args.eps_list), ref_eps=args.epsilon, model=args.model
        )
        _emit(fileio.study_csv(study), args.out)
    return 0


def cmd_gen(args):
    if args.benchmark == "running-example":
        game = strip_self_loops(build_running_example())
    elif args.benchmark == "erlang":
        game = build_erlang(args.stages, args.stage_rate)
    else:
        game = build_chain_game(args.n, args.fast, args.slow, args.cross, (args.split_goal, args.split_sink))
    _emit(fileio.format_model(game, comment=f"benchmark {args.benchmark}"), args.out)
    return 0


def cmd_table(args):
    levels = [int(x) for x in _floats(args.levels)]
    precs = _floats(args.precisions)
    try:
        table = nets.step_budget_table(args.horizon, precs, levels)
    except ValueError as exc:
        raise _Exit(EXIT_USAGE, str(exc))
    lines = ["level," + ",".join(f"{p:g}" for p in precs)]
    for k in levels:
        lines.append(f"{k}," + ",".join(str(table[(k, p)]) for p in precs))
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_normalise(args):
    game = _load(args.model)
    normed, H, lam = normalise(game, args.horizon)
    print(f"lambda {float(lam):.17g} scaled_horizon {float(H):.17g}", file=sys.stderr)
    _emit(fileio.format_model(normed, comment=f"normed, lambda {lam}"), args.out)
    return 0


def build_parser():
    p = _Parser(prog="ctmg-nets", description="Time-bounded reachability for continuous-time Markov games.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="approximate optimal values and strategies")
    s.add_argument("--model", required=True)
    s.add_argument("--horizon", type=float, required=True)
    s.add_argument("--precision", type=float, default=1e-6)
    s.add_argument("--level", type=int, choices=(1, 2, 3, 4), default=2)
    s.add_argument("--epsilon", type=float, help="explicit step in normed time units")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--out")
    s.add_argument("--strategy-out", help="writes <stem>.R<ext> and <stem>.S<ext>")
    s.add_argument("--switch-points", action="store_true")
    s.add_argument("--clamp", action="store_true")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("evaluate", help="value of a fixed strategy against a best response")
    e.add_argument("--model", required=True)
    e.add_argument("--horizon", type=float, required=True)
    e.add_argument("--strategy", required=True)
    e.add_argument("--precision", type=float, default=1e-6)
    e.add_argument("--level", type=int, choices=(1, 2, 3, 4), default=2)
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("simulate", help="Monte Carlo check of a strategy pair")
    m.add_argument("--model", required=True)
    m.add_argument("--horizon", type=float, required=True)
    m.add_argument("--strategy-r")
    m.add_argument("--strategy-s")
    m.add_argument("--n", type=int, default=100_000)
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="reference computations")
    o.add_argument("--model", required=True)
    o.add_argument("--horizon", type=float, required=True)
    o.add_argument("--mode", choices=("fine", "transient", "study"), default="fine")
    o.add_argument("--epsilon", type=float, default=1e-4)
    o.add_argument("--strategy-r")
    o.add_argument("--strategy-s")
    o.add_argument("--levels", default="1,2,3")
    o.add_argument("--eps-list", default="0.1,0.05,0.025,0.0125")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("gen", help="write a benchmark model")
    g.add_argument("--benchmark", required=True, choices=("running-example", "erlang", "chain-game"))
    g.add_argument("--stages", type=int, default=30)
    g.add_argument("--stage-rate", default="10")
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--fast", default="5")
    g.add_argument("--slow", default="1")
    g.add_argument("--cross", default="3")
    g.add_argument("--split-goal", default="2")
    g.add_argument("--split-sink", default="2")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("table", help="interval counts per level and precision")
    t.add_argument("--horizon", type=float, required=True)
    t.add_argument("--precisions", required=True)
    t.add_argument("--levels", default="1,2,3,4")
    t.set_defaults(func=cmd_table)

    n = sub.add_parser("normalise", help="uniformise and norm a model")
    n.add_argument("--model", required=True)
    n.add_argument("--horizon", type=float, required=True)
    n.add_argument("--out")
    n.set_defaults(func=cmd_normalise)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        if str(exc):
            print(str(exc), file=sys.stderr)
        return exc.code
    except ModelError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
