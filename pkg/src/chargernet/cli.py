"""Command-line front end: ``run``, ``sweep``, ``trace`` and ``scenario``.

Exit codes: 0 success, 2 usage or configuration error, 3 internal invariant
violation. Reports go to ``--out`` (written only once complete) or stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import protocol
from .assignment import SCHEMES
from .scenario import ScenarioError, build_default_scenario, load_scenario, scenario_to_dict
from .simulator import ConfigurationError, InvariantError, run_replications, sweep_ratio

RUN_COLUMNS = ["area", "mean_delay_cost", "mean_price_cost", "mean_overall_cost", "users",
               "ci_low", "ci_high"]
SWEEP_COLUMNS = ["ratio", "scheme", "mean_overall_cost", "ci_low", "ci_high"]


class UsageError(Exception):
    pass


def _num(x, digits: int = 6):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return round(x, digits)


def _scenario(args):
    if args.default == bool(args.scenario):
        raise UsageError("give exactly one of --default or --scenario PATH")
    if args.default:
        return build_default_scenario()
    path = Path(args.scenario)
    if not path.is_file():
        raise UsageError(f"scenario file not found: {path}")
    return load_scenario(path)


def _seeds(args, scenario) -> list[int]:
    if args.seed_list:
        if args.seeds is not None and args.seeds != len(args.seed_list):
            raise UsageError(f"--seeds {args.seeds} disagrees with {len(args.seed_list)} entries in --seed-list")
        return list(args.seed_list)
    n = 30 if args.seeds is None else args.seeds
    if n < 1:
        raise UsageError("need at least one seed")
    return [scenario.seed + i for i in range(n)]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in columns})
    return buf.getvalue()


def run_table(reps) -> tuple[list[dict], dict]:
    """Per-area rows pooled over replications, plus the summary row."""
    reports = reps.reports
    rows = []
    for i, first in enumerate(reports[0].per_area):
        groups = [r.per_area[i] for r in reports]
        users = sum(g.users for g in groups)

        def pooled(attr):
            if users == 0:
                return None
            return math.fsum(getattr(g, attr) * g.users for g in groups if g.users) / users

        rows.append({
            "area": first.area,
            "mean_delay_cost": _num(pooled("mean_delay_cost")),
            "mean_price_cost": _num(pooled("mean_price_cost")),
            "mean_overall_cost": _num(pooled("mean_overall_cost")),
            "users": users,
        })
    usable = [r for r in reports if r.users]
    summary = {
        "area": "all",
        "mean_delay_cost": _num(math.fsum(r.mean_delay for r in usable) / len(usable)) if usable else "",
        "mean_price_cost": _num(math.fsum(r.mean_price for r in usable) / len(usable)) if usable else "",
        "mean_overall_cost": _num(reps.summary.mean),
        "users": sum(r.users for r in reports),
        "ci_low": _num(reps.summary.ci_low),
        "ci_high": _num(reps.summary.ci_high),
    }
    return rows, summary


def cmd_run(args) -> int:
    scenario = _scenario(args)
    seeds = _seeds(args, scenario)
    reps = run_replications(scenario, args.scheme, seeds, args.workers)
    rows, summary = run_table(reps)
    if args.format == "csv":
        text = _csv(RUN_COLUMNS, rows + [summary])
    else:
        text = json.dumps({
            "scheme": args.scheme,
            "seeds": seeds,
            "rows": rows,
            "summary": summary,
            "estimated_mean_overall_cost": _num(reps.estimated.mean),
            "reports": [r.to_dict() for r in reps.reports],
        }, indent=2) + "\n"
    _emit(text, args.out)
    if args.out:
        s = reps.summary
        print(f"{args.scheme}: mean overall cost {s.mean:.3f} "
              f"(95% CI {s.ci_low:.3f}-{s.ci_high:.3f}, {s.n} seeds)", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    scenario = _scenario(args)
    seeds = _seeds(args, scenario)
    if not args.ratios:
        raise UsageError("need at least one ratio")
    if any(r < 1 for r in args.ratios):
        raise UsageError("ratios must be >= 1")
    rows = []
    for scheme in args.schemes:
        for p in sweep_ratio(scenario, scheme, args.ratios, seeds, args.workers):
            rows.append({"ratio": p.ratio, "scheme": p.scheme,
                         "mean_overall_cost": _num(p.mean_overall_cost),
                         "ci_low": _num(p.ci_low), "ci_high": _num(p.ci_high)})
    if args.format == "csv":
        text = _csv(SWEEP_COLUMNS, rows)
    else:
        text = json.dumps({"seeds": seeds, "rows": rows}, indent=2) + "\n"
    _emit(text, args.out)
    return 0


def cmd_trace(args) -> int:
    faults = [protocol.Fault.parse(f) for f in args.fault or ()]
    trace = protocol.run_session(
        args.standard, args.demand, faults,
        power=args.power, category=args.category, frequency=args.frequency,
        control_period_ms=args.control_period_ms,
    )
    _emit(trace.to_text(), args.out)
    return 0


def cmd_scenario(args) -> int:
    scenario = _scenario(args)
    _emit(json.dumps(scenario_to_dict(scenario), indent=2) + "\n", args.out)
    return 0


def _add_source(p):
    p.add_argument("--default", action="store_true", help="use the built-in 16-area campus")
    p.add_argument("--scenario", metavar="PATH", help="scenario JSON file")


def _add_seeds(p):
    p.add_argument("--seeds", type=int, help="number of replications (default 30)")
    p.add_argument("--seed-list", type=int, nargs="+", metavar="SEED", help="explicit seeds")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $CHARGERNET_THREADS or 1)")


def _add_output(p):
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chargernet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replicated run of one scheme; per-area table")
    _add_source(p)
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    _add_seeds(p)
    _add_output(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="load-ratio sweep (mean overall cost per ratio)")
    _add_source(p)
    p.add_argument("--schemes", nargs="+", choices=SCHEMES, default=list(SCHEMES))
    p.add_argument("--ratios", nargs="+", type=float, default=[1.0, 2.0, 3.0, 4.0])
    _add_seeds(p)
    _add_output(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", help="dump one charging-session trace")
    p.add_argument("--standard", type=str.lower, choices=("qi", "a4wp"), required=True)
    p.add_argument("--demand", type=float, default=20.0, help="charging minutes")
    p.add_argument("--fault", action="append", metavar="KIND@MIN", help="e.g. over-temp@10")
    p.add_argument("--power", type=float, help="requested power in W")
    p.add_argument("--category", choices=tuple(protocol.QI_CATEGORIES), default="low")
    p.add_argument("--frequency", type=float, help="Qi operating frequency in kHz")
    p.add_argument("--control-period-ms", type=int, default=250)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("scenario", help="write a scenario as JSON")
    _add_source(p)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ScenarioError, ConfigurationError, protocol.PowerLimitError, ValueError) as exc:
        kind = "power-limit" if isinstance(exc, protocol.PowerLimitError) else "error"
        print(f"chargernet: {kind}: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"chargernet: invariant violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
