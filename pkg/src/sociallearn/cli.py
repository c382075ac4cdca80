"""Command-line front end.

Exit codes:
    0  success
    2  bad command-line usage (argparse)
    3  configuration file cannot be read or parsed
    4  configuration describes an invalid experiment
    5  runtime failure (saturation, weight overflow, I/O)
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import config as cfg
from .analysis import RATE_COLUMNS, RateFunction, asymptotic_rate
from .engine import DRAW_COLUMNS, TRAJECTORY_COLUMNS, SimConfig, run
from .montecarlo import DEVIATION_COLUMNS, SaturationError, WeightOverflowError, deviation
from .network import perron_vector, validate
from .tables import read_csv, write_csv

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_INVALID = 4
EXIT_RUNTIME = 5


def _load(path):
    return cfg.load(path)


def _out_path(conf, given, default_name):
    if given:
        p = Path(given)
    else:
        p = conf.output_dir / default_name
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _fmt_vec(v):
    return "[" + ", ".join(f"{x:.12g}" for x in v) + "]"


def cmd_validate(args) -> int:
    conf = _load(args.config)
    report = validate(conf.A)
    print(f"combination matrix: {report}")
    if not report:
        return EXIT_INVALID
    pi = perron_vector(conf.A)
    print(f"perron vector: {_fmt_vec(pi)}")
    ok = True
    for alt in conf.hypotheses.alternatives:
        d = conf.model.divergence_vector(conf.truth, alt)
        label = conf.hypotheses.labels[alt]
        print(f"divergence vs {label}: {_fmt_vec(d)}")
        if not np.all(np.isfinite(d)):
            print(f"  infinite divergence vs {label}")
            ok = False
            continue
        print(f"asymptotic rate vs {label}: {asymptotic_rate(pi, d):.12g}")
    ident = conf.model.is_identifiable(conf.truth)
    print(f"globally identifiable: {ident}")
    if not ident:
        ok = False
    return EXIT_OK if ok else EXIT_INVALID


def cmd_simulate(args) -> int:
    conf = _load(args.config)
    alpha = args.alpha if args.alpha is not None else conf.alpha
    steps = args.steps if args.steps is not None else conf.steps
    seed = args.seed if args.seed is not None else conf.seed
    reps = [args.replication] if args.replication is not None else range(conf.replications)
    for rep in reps:
        sim = SimConfig(steps=steps, alpha=alpha, seed=seed, replication=rep,
                        record_draws=args.draws, truth=conf.truth)
        traj = run(conf.model, conf.A, sim)
        name = "trajectory.csv" if len(reps) == 1 else f"trajectory_rep{rep}.csv"
        out = _out_path(conf, args.out if len(reps) == 1 else None, name)
        write_csv(out, TRAJECTORY_COLUMNS, traj.rows())
        print(f"wrote {out}")
        if args.draws:
            dpath = out.with_name(out.stem + "_draws.csv")
            write_csv(dpath, DRAW_COLUMNS, traj.draw_rows())
            print(f"wrote {dpath}")
        if traj.steps:
            final = traj.rates()[-1, :, 0]
            print("final lambda/i: " + _fmt_vec(final))
        if args.plot and traj.steps:
            from .plotting import plot_rates

            pi = perron_vector(conf.A)
            d = conf.model.divergence_vector(conf.truth, traj.alternatives[0])
            png = plot_rates(traj, out.with_suffix(".png"), agents=args.agents,
                             rate=asymptotic_rate(pi, d) if np.all(np.isfinite(d)) else None)
            print(f"wrote {png}")
    return EXIT_OK


def _alt(conf, args):
    if args.alt is None:
        return conf.hypotheses.alternatives[0]
    alt = conf.hypotheses.index(args.alt if not str(args.alt).isdigit() else int(args.alt))
    if alt == conf.truth:
        raise cfg.ConfigValidationError("alternative hypothesis equals the true one")
    return alt


def cmd_rate(args) -> int:
    conf = _load(args.config)
    grid = cfg.parse_s_grid(args.s_grid) if args.s_grid else conf.s_grid
    if grid is None:
        raise cfg.ConfigError("no s grid given (use --s-grid or rate.s_grid)")
    alt = _alt(conf, args)
    rf = RateFunction(conf.A, conf.model, conf.truth, alt, t_max=conf.t_max, alpha=conf.alpha)
    rows = rf.table(grid)
    out = _out_path(conf, args.out, "rate_function.csv")
    write_csv(out, RATE_COLUMNS, rows)
    print(f"wrote {out}")
    print(f"rate function vanishes at s = {rf.mean:.10g}")
    n_sat = sum(r[3] for r in rows)
    if n_sat:
        print(f"warning: {n_sat} grid point(s) saturated at |t| = {rf.t_max}", file=sys.stderr)
    if args.plot:
        from .plotting import plot_rate_function

        png = plot_rate_function(rows, out.with_suffix(".png"), mean=rf.mean)
        print(f"wrote {png}")
    return EXIT_OK


def cmd_deviation(args) -> int:
    conf = _load(args.config)
    dev = conf.deviation
    s_values = args.s if args.s else dev.s
    if not s_values:
        raise cfg.ConfigError("no deviation thresholds given (use --s or deviation.s)")
    steps = args.i if args.i is not None else dev.i
    agents = args.k if args.k else dev.agents
    n = args.N if args.N is not None else dev.N
    method = args.method or dev.method
    seed = args.seed if args.seed is not None else conf.seed
    alt = _alt(conf, args)
    for k in agents:
        if not 0 <= k < conf.K:
            raise cfg.ConfigValidationError(f"agent {k} out of range")
    rf = RateFunction(conf.A, conf.model, conf.truth, alt, t_max=conf.t_max, alpha=conf.alpha)
    out = _out_path(conf, args.out, "deviation.csv")
    rows = []
    for j, k in enumerate(agents):
        for m, s in enumerate(s_values):
            est = deviation(conf.A, conf.model, k, steps, s, n, method=method,
                            direction=args.direction, seed=seed, true=conf.truth, alt=alt,
                            rate=rf, replication=j * len(s_values) + m)
            rows.append(est.row())
            print(f"k={k} s={s:g} {method}: p_hat={est.p_hat:.6g} "
                  f"(stderr {est.stderr:.3g}), -log(p)/i={est.minus_log_p_over_i:.6g}, "
                  f"I(s)={rf(s):.6g}")
    write_csv(out, DEVIATION_COLUMNS, rows, append=not args.overwrite)
    print(f"wrote {out}")
    if args.plot:
        from .plotting import plot_rate_function

        _, all_rows = read_csv(out)
        markers = [dict(zip(DEVIATION_COLUMNS, r)) for r in all_rows]
        lo = min(min(s_values), rf.mean) - 1.0
        hi = max(max(s_values), rf.mean) + 1.0
        grid = np.linspace(lo, hi, 81)
        png = plot_rate_function(rf.table(grid), out.with_suffix(".png"), mean=rf.mean,
                                 markers=markers)
        print(f"wrote {png}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sociallearn",
        description="Social learning with randomized neighbor selection: simulation, "
        "learning rates and large-deviation estimates.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a configuration and print pi, d and the rate")
    v.add_argument("config", help="YAML config path or preset name (paper-10node)")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="run the learning recursion and write a trajectory CSV")
    s.add_argument("config")
    s.add_argument("--seed", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--replication", type=int)
    s.add_argument("--out")
    s.add_argument("--draws", action="store_true", help="also write the neighbor draws")
    s.add_argument("--plot", action="store_true", help="render lambda/i paths to PNG")
    s.add_argument("--agents", type=int, nargs="+", help="agents to plot (default all)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("rate", help="tabulate the rate function I(s)")
    r.add_argument("config")
    r.add_argument("--s-grid", help="start:stop:step or comma-separated values")
    r.add_argument("--alt", help="alternative hypothesis (label or index)")
    r.add_argument("--out")
    r.add_argument("--plot", action="store_true")
    r.set_defaults(func=cmd_rate)

    d = sub.add_parser("deviation", help="estimate deviation probabilities of lambda/i")
    d.add_argument("config")
    d.add_argument("--s", type=float, nargs="+")
    d.add_argument("--i", type=int)
    d.add_argument("--k", type=int, nargs="+")
    d.add_argument("--N", type=int)
    d.add_argument("--method", choices=("importance", "plain"))
    d.add_argument("--direction", choices=("below", "above"))
    d.add_argument("--alt")
    d.add_argument("--seed", type=int)
    d.add_argument("--out")
    d.add_argument("--overwrite", action="store_true", help="replace instead of appending rows")
    d.add_argument("--plot", action="store_true")
    d.set_defaults(func=cmd_deviation)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except cfg.ConfigValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SaturationError, WeightOverflowError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
