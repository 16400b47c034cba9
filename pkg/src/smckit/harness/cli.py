"""Command-line interface.

    smc run <config.json>     one configured experiment (single_run/sweep/...)
    smc plan <config.json>    planner table + plan.jsonl
    smc fig1 [config.json]    fixed-budget greedy allocation sweep
    smc fig2 [config.json]    means vs medians robustness comparison
    smc sweep <config.json>   cartesian parameter sweep

Common flags: --out DIR, --seed N, --threads N; the figure commands accept
--paper-scale to restore publication replicate counts (desk-scale defaults
keep each figure within minutes on a laptop).
"""

import argparse
import json
import sys

from ..errors import SMCError
from .config import resolve
from .experiments import plan_rows, run_experiment


def _load_config(path):
    with open(path) as fh:
        return json.load(fh)


def _add_common(parser, config_required=True, config_allowed=True):
    if config_allowed:
        nargs = None if config_required else "?"
        parser.add_argument("config", nargs=nargs, default=None,
                            help="JSON experiment configuration")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override replication.master_seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for the replicate pool")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smc",
        description="SMC samplers toolkit: runs, parameter plans, and the "
                    "figure protocols")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("run", help="run a configured experiment"))
    _add_common(sub.add_parser("plan", help="print a parameter-planning table"))
    _add_common(sub.add_parser("sweep", help="run a parameter sweep"))
    for fig in ("fig1", "fig2"):
        p = sub.add_parser(fig, help=f"run the {fig} protocol")
        _add_common(p, config_required=False)
        p.add_argument("--paper-scale", action="store_true",
                       help="use publication replicate counts")
    return parser


def _print_plan_table(rows):
    header = f"{'theorem':<22}{'fidelity':<13}{'M':>10}{'P':>12}{'J':>5}" \
             f"{'cost':>16}  inputs"
    print(header)
    print("-" * len(header))
    for row in rows:
        p_repr = (row["P"] if row["P_array"] is None
                  else f"{row['P_array'][0]}..{row['P_array'][-1]}")
        inputs = ",".join(f"{k}={v}" for k, v in sorted(row["inputs"].items()))
        print(f"{row['theorem']:<22}{row['fidelity']:<13}{row['M']:>10}"
              f"{str(p_repr):>12}{row['J']:>5}{row['predicted_cost']:>16,}"
              f"  {inputs}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("fig1", "fig2"):
            cfg = _load_config(args.config) if args.config else {}
            cfg.setdefault("experiment", args.command)
            out = run_experiment(cfg, out_dir=args.out, threads=args.threads,
                                 paper_scale=args.paper_scale,
                                 master_seed=args.seed)
        elif args.command == "plan":
            cfg = _load_config(args.config)
            cfg.setdefault("experiment", "plan")
            rows = plan_rows(resolve(cfg))
            _print_plan_table(rows)
            out = run_experiment(cfg, out_dir=args.out, threads=args.threads,
                                 master_seed=args.seed)
        else:
            cfg = _load_config(args.config)
            if args.command == "sweep":
                cfg.setdefault("experiment", "sweep")
            out = run_experiment(cfg, out_dir=args.out, threads=args.threads,
                                 master_seed=args.seed)
    except (SMCError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
