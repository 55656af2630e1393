"""
rclab/_cli/report.py

    define CLI for report top-level subcommand
"""


import argparse
import glob
import os

from rclab.report import write_report
from rclab._cli._common import debug_flag, begin_manifest, finish_manifest


REPORT_DESCRIPTION = """
    Reduce finished run directories into ablation, stage-trend and skill tables
"""


def setup_report_subparser(parser: argparse.ArgumentParser):
    """ set up the subparser for report subcommand """
    parser.add_argument(
        "RUN_DIR",
        nargs="*",
        help="run directories (default: every <out-dir>/runs/*)"
    )
    parser.add_argument(
        "--plots",
        action="store_true",
        default=False,
        help="also write PNG plots"
    )


def report_run(args: argparse.Namespace):
    """ write the report into <out-dir>/report """
    runs = args.RUN_DIR or sorted(d for d in glob.glob(os.path.join(args.out_dir, "runs", "*")) if os.path.isdir(d))
    if not runs:
        raise ValueError("report: no run directories given or found")
    manifest = begin_manifest(args)
    out = os.path.join(args.out_dir, "report")
    written = write_report(runs, out, plots=args.plots, debug_flag=debug_flag(args))
    finish_manifest(args.out_dir, manifest, written)
    print(f"report in {out}")
