"""
rclab/_cli/ablate.py

    define CLI for ablate top-level subcommand
"""


import argparse
import os

from rclab.harness import run_ablation
from rclab.report import write_report
from rclab.tasks import build_dataset, write_dataset
from rclab.util import sha256_file
from rclab._cli._common import load_params, config_hash, debug_flag, begin_manifest, finish_manifest


ABLATE_DESCRIPTION = """
    Train RC, CS+RL and RL-only over a list of seeds from one shared config and report the comparison
"""


def setup_ablate_subparser(parser: argparse.ArgumentParser):
    """ set up the subparser for ablate subcommand """
    parser.add_argument(
        "--seeds",
        type=int,
        nargs="+",
        default=None,
        help="run seeds (default: just --seed)"
    )
    parser.add_argument(
        "--variants",
        nargs="+",
        default=["rc", "cs_rl", "rl_only"],
        help="variants to compare (default: rc cs_rl rl_only)"
    )
    parser.add_argument(
        "--dataset",
        default=None,
        help="dataset file shared by every run (default: generate <out-dir>/dataset.ndjson with --seed)"
    )
    parser.add_argument(
        "--plots",
        action="store_true",
        default=False,
        help="also write PNG plots with the report"
    )


def ablate_run(args: argparse.Namespace):
    """ run the ablation then reduce it into <out-dir>/report """
    params = load_params(args)
    seeds = args.seeds if args.seeds is not None else [args.seed]
    manifest = begin_manifest(args, seeds=seeds)
    manifest.config_hash = config_hash(args)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.dataset is None:
        dataset_file = os.path.join(args.out_dir, "dataset.ndjson")
        write_dataset(dataset_file, build_dataset(params.data, args.seed, debug_flag=debug_flag(args)))
    else:
        dataset_file = args.dataset
    manifest.dataset_hash = sha256_file(dataset_file)
    result = run_ablation(params, dataset_file, seeds, args.out_dir, variants=args.variants,
                          n_proc=args.threads, debug_flag=debug_flag(args))
    written = write_report(result.run_paths, os.path.join(args.out_dir, "report"), plots=args.plots,
                           failures=result.failures, debug_flag=debug_flag(args))
    if result.failures:
        manifest.status = "partial"
        for f in result.failures:
            print(f"run {f['variant']} seed {f['seed']} failed: {f['error']}")
    finish_manifest(args.out_dir, manifest, [dataset_file] + written)
    print(f"{len(result.runs) - len(result.failures)} of {len(result.runs)} runs finished, "
          f"report in {os.path.join(args.out_dir, 'report')}")
