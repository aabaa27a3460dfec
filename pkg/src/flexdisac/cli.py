"""Command-line front end.

Subcommands:
  run       execute the sweep described by a config file, write a CSV
  sweep     describe a sweep on the command line (kind/range/trials/schemes)
  validate  parse and check a config file without running anything
  trace     run a single trial and dump the inner-loop iteration trace

Exit codes: 0 success, 1 configuration error, 2 runtime or invariant failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .harness import (SweepSpec, aggregate, run_sweep, scenario_at, write_records)
from .partition import pattern_search
from .scenario import channel_stream, generate_channels
from .solver import (MonotonicityError, MultiplierSearchError, SolverInvariantError,
                     SolverSettings)

_KIND_ALIASES = {"bs-power": "bs_power", "user-power": "user_power",
                 "scnr": "scnr_floor", "users": "num_users"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexdisac",
        description="Flexible-duplex ISAC sum-rate simulator")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the sweep described by a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output CSV path")

    sweep = sub.add_parser("sweep", help="run a sweep described on the command line")
    sweep.add_argument("--kind", required=True,
                       choices=sorted(_KIND_ALIASES))
    sweep.add_argument("--from", dest="start", type=float, required=True)
    sweep.add_argument("--to", dest="stop", type=float, required=True)
    sweep.add_argument("--step", type=float, required=True)
    sweep.add_argument("--trials", type=int, default=10)
    sweep.add_argument("--schemes", default="flexd,hd,zf",
                       help="comma-separated subset of flexd,hd,zf,exhaustive")
    sweep.add_argument("--config", help="optional base config file")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", required=True)

    val = sub.add_parser("validate", help="dry-run checks of a config file")
    val.add_argument("--config", required=True)

    trace = sub.add_parser("trace", help="single-trial iteration dump")
    trace.add_argument("--config", required=True)
    trace.add_argument("--trial", type=int, default=0)
    trace.add_argument("--out", help="write the trace CSV here instead of stdout")
    return parser


def _load(path: str):
    scenario, settings, sweep = load_config(path)
    return scenario, settings, sweep


def _cmd_run(args) -> int:
    scenario, settings, sweep = _load(args.config)
    if sweep["values"] is None:
        raise ConfigError("sweep.values is required for 'run'")
    spec = SweepSpec(sweep_kind=sweep["kind"], values=sweep["values"],
                     trials=sweep["trials"], schemes=sweep["schemes"],
                     scenario=scenario, settings=settings,
                     workers=sweep["workers"], measure_time=sweep["measure_time"])
    records = run_sweep(spec)
    write_records(records, args.out)
    _print_summary(records)
    return 0


def _cmd_sweep(args) -> int:
    if args.config:
        scenario, settings, _ = _load(args.config)
    else:
        from .scenario import Scenario
        scenario, settings = Scenario(num_users=5), SolverSettings()
    if args.step <= 0:
        raise ConfigError("sweep --step must be positive")
    values = []
    v = args.start
    while v <= args.stop + 1e-9:
        values.append(round(v, 9))
        v += args.step
    schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    spec = SweepSpec(sweep_kind=_KIND_ALIASES[args.kind], values=tuple(values),
                     trials=args.trials, schemes=schemes, scenario=scenario,
                     settings=settings, workers=args.workers)
    records = run_sweep(spec)
    write_records(records, args.out)
    _print_summary(records)
    return 0


def _cmd_validate(args) -> int:
    scenario, settings, sweep = _load(args.config)
    print(f"config OK: K={scenario.num_users} nt={scenario.nt} nr={scenario.nr} "
          f"L={scenario.user_antennas}")
    print(f"  powers: BS {scenario.bs_power_max:.6g} W, "
          f"users {scenario.user_power_max} W, SCNR floor {scenario.scnr_min:.6g}")
    print(f"  solver: tol {settings.inner_tol}, max iters {settings.max_inner_iters}")
    if sweep["values"] is not None:
        print(f"  sweep: {sweep['kind']} over {sweep['values']}, "
              f"{sweep['trials']} trials, schemes {','.join(sweep['schemes'])}")
    return 0


def _cmd_trace(args) -> int:
    scenario, settings, _ = _load(args.config)
    settings = dataclasses.replace(settings, collect_trace=True)
    rng = channel_stream(scenario, trial=args.trial, point=0)
    channels = generate_channels(scenario, rng)
    result = pattern_search(channels, scenario, settings)
    lines = ["iter,sum_rate,scnr,bs_power,max_user_power"]
    for row in result.diagnostics.get("trace_rows", []):
        lines.append(",".join(f"{x:.9g}" if isinstance(x, float) else str(x)
                              for x in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if result.outage:
        print("note: best partition was infeasible (outage)", file=sys.stderr)
    return 0


def _print_summary(records) -> None:
    stats = aggregate(records)
    for (value, scheme), info in stats.items():
        print(f"value={value:g} scheme={scheme}: mean rate "
              f"{info['mean_rate']:.4f} nat/s/Hz, outage {info['outage_fraction']:.0%} "
              f"({info['trials']} trials)")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="raise")
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate,
                "trace": _cmd_trace}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (MonotonicityError, SolverInvariantError, MultiplierSearchError,
            ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
