"""``mcsched`` command line: gen, solve, verify, sweep."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bnb import MilpOptions
from .experiment import (
    SCHEMES, ExperimentError, config_from_dict, config_to_dict, emit_csv,
    run_experiment, solve_scheme,
)
from .formulations import BuildError, DecodeError, SchedParams
from .io import ParseError, load_instance, load_schedule, save_instance, save_schedule
from .lp import LpInputError, LpIterationLimit
from .network import ConfigError, InstanceConfig, generate_instance
from .verify import ScheduleShapeError, verify_schedule

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3  # unreadable or invalid files and parameters
EXIT_SOLVE = 4  # infeasible, limit hit, or a failed audit


def _csv_list(kind):
    def parse(text: str):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _params(args) -> SchedParams:
    return SchedParams(T=args.slots, demand=args.demand, beta=args.beta,
                       p_slot_max=args.p_max, p_slot_min=args.p_min, const_power=args.power)


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--slots", "-T", type=int, default=8, help="slots per frame")
    p.add_argument("--demand", "-B", type=int, default=1, help="required slots per link")
    p.add_argument("--beta", type=float, default=10.0, help="SINR threshold (linear)")
    p.add_argument("--p-max", type=float, default=300.0, help="per-slot power cap, mW")
    p.add_argument("--p-min", type=float, default=3.0, help="per-slot power floor, mW")
    p.add_argument("--power", type=float, default=90.0, help="constant power, mW")


def cmd_gen(args) -> int:
    cfg = InstanceConfig(num_sources=args.sources, group_size=args.group_size,
                         path_loss_exponent=args.path_loss, noise_power=args.noise,
                         seed=args.seed)
    inst = generate_instance(cfg)
    save_instance(inst, args.out)
    print(f"wrote {args.out}: {inst.num_sources} sources, {inst.num_destinations} destinations")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    params = _params(args)
    params.validate(inst)
    options = MilpOptions(node_limit=args.node_limit, time_limit=args.time_limit)
    status, value, sched = solve_scheme(args.scheme, inst, params, options)
    print(f"status: {status}")
    print(f"throughput: {value!r}")
    if sched is None:
        return EXIT_SOLVE
    if args.out:
        save_schedule(sched, args.out)
        print(f"schedule: {args.out}")
    return EXIT_OK if status in ("optimal", "heuristic") else EXIT_SOLVE


def cmd_verify(args) -> int:
    inst = load_instance(args.instance)
    sched = load_schedule(args.schedule)
    params = SchedParams(T=sched.T, demand=args.demand, beta=args.beta,
                         p_slot_max=args.p_max, p_slot_min=args.p_min, const_power=args.power)
    params.validate(inst)
    report = verify_schedule(inst, sched, params)
    print(json.dumps(report.summary(), indent=1))
    return EXIT_OK if report.ok else EXIT_SOLVE


def cmd_sweep(args) -> int:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(args.config, exc.msg, line=exc.lineno, column=exc.colno) from None
    overrides = {
        "sources": args.sources, "group_size": args.group_size, "T": args.slots,
        "B": args.demand, "schemes": args.schemes, "trials": args.trials,
        "base_seed": args.seed, "workers": args.workers, "node_limit": args.node_limit,
        "time_limit": args.time_limit,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    config = config_from_dict(data)
    records = run_experiment(config, timing=not args.no_timing)
    agg = emit_csv(records, args.out)
    counts = {}
    for r in records:
        counts[r.status] = counts.get(r.status, 0) + 1
    print(f"wrote {args.out} ({len(records)} records) and {agg}")
    print("statuses: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    if args.dump_config:
        Path(args.dump_config).write_text(json.dumps(config_to_dict(config), indent=1) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcsched", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="draw a random instance")
    g.add_argument("--sources", "-N", type=int, required=True)
    g.add_argument("--group-size", "-D", type=int, default=2)
    g.add_argument("--path-loss", type=float, default=3.0)
    g.add_argument("--noise", type=float, default=0.1, help="noise power, mW")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", "-o", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one scheme on an instance file")
    s.add_argument("instance")
    s.add_argument("--scheme", "-s", choices=sorted(SCHEMES), default="dmc-opt")
    _add_param_flags(s)
    s.add_argument("--node-limit", type=int, default=None)
    s.add_argument("--time-limit", type=float, default=None)
    s.add_argument("--out", "-o", help="schedule file to write")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="audit a schedule against an instance")
    v.add_argument("instance")
    v.add_argument("schedule")
    _add_param_flags(v)
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="Monte-Carlo sweep to CSV")
    w.add_argument("config", nargs="?", help="JSON file of ExperimentConfig fields")
    w.add_argument("--sources", type=_csv_list(int))
    w.add_argument("--group-size", type=int)
    w.add_argument("--slots", type=int)
    w.add_argument("--demand", type=int)
    w.add_argument("--schemes", type=_csv_list(str))
    w.add_argument("--trials", type=int)
    w.add_argument("--seed", type=int)
    w.add_argument("--workers", type=int)
    w.add_argument("--node-limit", type=int)
    w.add_argument("--time-limit", type=float)
    w.add_argument("--no-timing", action="store_true",
                   help="leave the seconds column empty for reproducible output")
    w.add_argument("--dump-config", help="write the effective configuration here")
    w.add_argument("--out", "-o", default="results.csv")
    w.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ConfigError, BuildError, ExperimentError, ScheduleShapeError,
            DecodeError, LpInputError) as exc:
        print(f"mcsched: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"mcsched: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LpIterationLimit as exc:
        print(f"mcsched: error: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
