"""Command line entry point.

Exit codes: 0 success, 2 configuration problem, 3 runtime failure.
"""

import argparse
import os
import sys

from .config import ConfigError, load_config
from .errors import ScaopoError
from .experiment import emit_plotdata, run_experiment

OUTPUT_ROOT_VAR = "SCAOPO_OUTPUT_ROOT"


def _resolve_out(path):
    if os.path.isabs(path):
        return path
    root = os.environ.get(OUTPUT_ROOT_VAR, "")
    return os.path.join(root, path) if root else path


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scaopo",
        description="Constrained average-cost policy optimization runs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config over its seed list")
    p_run.add_argument("config", help="path to a JSON run config")
    p_run.add_argument("-o", "--output",
                       help="output directory (default: run.output_dir from "
                            "the config; relative paths resolve under "
                            f"${OUTPUT_ROOT_VAR} when set)")
    p_run.add_argument("-w", "--workers", type=int, default=None,
                       help="process count for seed parallelism "
                            "(default: run.workers; 0 = one per seed)")

    p_val = sub.add_parser("validate", help="check a config and exit")
    p_val.add_argument("config", help="path to a JSON run config")

    p_plot = sub.add_parser("plotdata",
                            help="derive plot-ready CSVs from a run directory")
    p_plot.add_argument("run_dir", help="directory produced by `scaopo run`")
    p_plot.add_argument("-o", "--output",
                        help="where to write the plot tables "
                             "(default: <run_dir>.plots)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        try:
            load_config(args.config)
        except ConfigError as exc:
            print(f"{args.config}: {len(exc.violations)} problem(s)",
                  file=sys.stderr)
            for v in exc.violations:
                print(f"  - {v}", file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"cannot read {args.config}: {exc}", file=sys.stderr)
            return 2
        print(f"{args.config}: ok")
        return 0

    if args.command == "run":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"{args.config}: {len(exc.violations)} problem(s)",
                  file=sys.stderr)
            for v in exc.violations:
                print(f"  - {v}", file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"cannot read {args.config}: {exc}", file=sys.stderr)
            return 2
        out = args.output or cfg.run["output_dir"]
        if out is None:
            print("no output directory: set run.output_dir in the config "
                  "or pass --output", file=sys.stderr)
            return 2
        out = _resolve_out(out)
        try:
            summary = run_experiment(cfg, out, workers=args.workers)
        except ScaopoError as exc:
            print(f"run failed: {exc}", file=sys.stderr)
            return 3
        agg = summary["aggregate"]
        print(f"wrote {out}")
        print(f"  seeds: {agg['n_seeds']}, meeting limits: "
              f"{agg['seeds_meeting_limits']}")
        print(f"  final objective: {agg['final_objective_mean']:.6g} "
              f"(+/- {agg['final_objective_std']:.2g})")
        return 0

    if args.command == "plotdata":
        try:
            out = emit_plotdata(args.run_dir,
                                _resolve_out(args.output) if args.output
                                else None)
        except (OSError, KeyError, ValueError, ScaopoError) as exc:
            print(f"plotdata failed: {exc}", file=sys.stderr)
            return 3
        print(f"wrote {out}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
