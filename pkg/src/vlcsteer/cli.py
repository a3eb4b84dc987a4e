"""Command line entry point.

Exit codes: 0 on success, 2 for invalid input, 3 when a solver fails.
Set ``VLCSTEER_LOG_LEVEL`` (e.g. ``INFO``) for more output on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .harness.experiments import KINDS, SCHEMES, ExperimentSpec, run_experiment
from .harness.report import FORMATS, emit_report
from .harness.scenario import Scenario, ScenarioError, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3

# single-drop subcommands: (experiment kind, default schemes)
_COMMANDS = {
    "steer": ("single_beam_sweep", ("no_steering", "sbs", "sbsf", "ga_fbs")),
    "cluster": ("multi_beam_sweep", ("sbsf", "single_stream", "multi_stream")),
    "power": ("power_opt_sweep", ("sbsf", "multi_stream", "power_opt_sum", "power_opt_log")),
    "noma": ("multi_beam_sweep", ("sbsf", "multi_stream", "noma")),
}


def _int_list(text):
    out = []
    for part in text.split(","):
        if "-" in part.strip("-"):
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _scheme_list(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="JSON scenario file (omitted fields take defaults)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--seed", type=int, help="master seed (default: the scenario's)")
    common.add_argument("--trials", type=int, help="number of user drops")
    common.add_argument("--scheme", type=_scheme_list, help=f"comma separated subset of {','.join(SCHEMES)}")
    common.add_argument("--delta-deg", type=float, help="angle grid step in degrees")
    common.add_argument("--users", type=_int_list, help="user counts, e.g. 6 or 1-10 or 2,4,8")
    common.add_argument("--workers", type=int, default=1, help="worker processes")

    p = argparse.ArgumentParser(prog="vlcsteer", description="Steerable-beam VLC downlink simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("steer", "cluster", "power", "noma"):
        sp = sub.add_parser(name, parents=[common], help=f"{name} on random user drops")
        if name != "steer":
            sp.add_argument("--beams", type=_int_list, help="beam counts (default: the scenario's)")
    ep = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo sweep")
    ep.add_argument("kind", choices=KINDS)
    ep.add_argument("--beams", type=_int_list, help="beam counts")
    ep.add_argument("--steering-solver", choices=("enumeration", "mm"), default="enumeration")
    ep.add_argument("--noma-objective", choices=("sum_rate", "log_rate"), default="sum_rate")
    return p


def _spec(args, scenario: Scenario) -> ExperimentSpec:
    kw = dict(seed=scenario.seed if args.seed is None else args.seed, delta_deg=args.delta_deg,
              workers=args.workers)
    if args.command == "experiment":
        kw.update(kind=args.kind, steering_solver=args.steering_solver, noma_objective=args.noma_objective)
    else:
        kind, schemes = _COMMANDS[args.command]
        kw.update(kind=kind, name=args.command, schemes=schemes, trials=1, users=(6,))
        if args.command != "steer":
            kw["beams"] = (scenario.n_beams,)
    for field_name in ("trials", "users"):
        if getattr(args, field_name) is not None:
            kw[field_name] = getattr(args, field_name)
    if getattr(args, "beams", None) is not None:
        kw["beams"] = args.beams
    if args.scheme is not None:
        kw["schemes"] = args.scheme
    return ExperimentSpec(**kw)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("VLCSTEER_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario) if args.scenario else Scenario()
        if args.delta_deg is not None and not args.delta_deg > 0:
            raise ValueError("--delta-deg must be positive")
        if args.workers < 1:
            raise ValueError("--workers must be at least 1")
        spec = _spec(args, scenario)
    except ScenarioError as exc:
        for err in exc.errors:
            print(f"invalid scenario: {err}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        report = run_experiment(scenario, spec)
    except (RuntimeError, ArithmeticError, ValueError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    try:
        text = emit_report(report, args.format, args.out)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    if args.out is None:
        sys.stdout.write(text)
    excluded = report.metadata["excluded_trials"]
    for msg in excluded:
        print(f"excluded: {msg}", file=sys.stderr)
    if excluded and (args.command != "experiment" or len(excluded) == spec.trials * len(spec.users)):
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
