"""Command line entry point: ``flowsampling {solve,simulate,analyze,reproduce}``.

CSV goes to ``--out`` when given, otherwise to standard output.  Any error
prints a single ``error: ...`` line to standard error and exits with status 1.
"""
from __future__ import annotations

import argparse
import contextlib
import sys
from pathlib import Path

from ..analysis import (cost_order_statistic, cost_uniform, cost_weighted, lower_bound,
                        water_filling)
from ..solver import relative_value_iteration
from .figures import FIGURES, Budget, reproduce, write_csv
from .scenario import load_scenario
from .simulate import simulate


@contextlib.contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _scenario(args):
    if args.scenario is None:
        raise ValueError("--scenario is required")
    return load_scenario(args.scenario).with_seed(args.seed)


def cmd_solve(args) -> None:
    sc = _scenario(args)
    sol = relative_value_iteration(sc.path(), sc.epsilon)
    print(f"gain={sol.gain!r} iterations={sol.iterations} span={sol.final_span:.3g}")
    if args.out is not None:
        M = sol.config.M
        with _output(args.out) as fh:
            write_csv(({**{f"n{i + 1}": r[i] for i in range(M)}, "action": r[-1]}
                       for r in sol.table_rows()),
                      fh, columns=tuple(f"n{i + 1}" for i in range(M)) + ("action",))


SIMULATE_COLUMNS = ("policy", "M", "T", "reps", "burn_in", "seed", "mean_cost", "stderr",
                    "device", "phi", "p", "sampling_rate", "reset_rate")


def cmd_simulate(args) -> None:
    spec = _scenario(args).scenario_spec()
    rep = simulate(spec, threads=args.threads)
    path = spec.path
    rows = (dict(policy=rep.policy, M=path.M, T=spec.horizon, reps=spec.replications,
                 burn_in=rep.burn_in, seed=rep.seed, mean_cost=rep.mean_cost,
                 stderr=rep.cost_stderr, device=i + 1, phi=float(path.phi[i]), p=float(path.p[i]),
                 sampling_rate=float(rep.per_device_sampling_rate[i]),
                 reset_rate=float(rep.per_device_reset_rate[i]))
            for i in range(path.M))
    with _output(args.out) as fh:
        write_csv(rows, fh, columns=SIMULATE_COLUMNS)


def cmd_analyze(args) -> None:
    sc = _scenario(args)
    Gs = sc.G
    columns = (("M", "cost_uniform") + tuple(f"cost_order_statistic_G{g}" for g in Gs)
               + ("cost_weighted", "lower_bound", "weights"))
    rows = []
    for path in sc.paths():
        w = water_filling(path).weights
        row = dict(M=path.M, cost_uniform=cost_uniform(path), cost_weighted=cost_weighted(path, w),
                   lower_bound=lower_bound(path), weights=";".join(repr(float(x)) for x in w))
        for g in Gs:
            row[f"cost_order_statistic_G{g}"] = cost_order_statistic(path, g)
        rows.append(row)
    with _output(args.out) as fh:
        write_csv(rows, fh, columns=columns)


def cmd_reproduce(args) -> None:
    budget = Budget(horizon=args.horizon, replications=args.reps, threads=args.threads)
    rows = reproduce(args.figure, seed=args.seed or 0, budget=budget)
    with _output(args.out) as fh:
        write_csv(rows, fh)


def _reps(text: str) -> int:
    n = int(text)
    if n < 20:
        raise argparse.ArgumentTypeError("desk-scale runs need at least 20 replications")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowsampling",
                                     description="Flow-sampling MDP solver and simulator.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for replications")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (("solve", cmd_solve, "relative value iteration on the scenario path"),
                            ("simulate", cmd_simulate, "Monte Carlo run of the scenario policy"),
                            ("analyze", cmd_analyze, "closed-form costs per M value")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--scenario", required=True, type=Path, help="TOML scenario file")
        p.set_defaults(func=fn)

    p = sub.add_parser("reproduce", parents=[common], help="run a reference figure grid")
    p.add_argument("figure", choices=FIGURES, type=str.upper)
    p.add_argument("--reps", type=_reps, default=20, help="replications per grid point (>= 20)")
    p.add_argument("--horizon", type=int, default=10**5, help="slots per replication")
    p.set_defaults(func=cmd_reproduce)
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())
