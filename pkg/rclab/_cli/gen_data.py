"""
rclab/_cli/gen_data.py

    define CLI for gen-data top-level subcommand
"""


import argparse
import os

from rclab.params import DOMAINS, DIFFICULTIES
from rclab.tasks import build_dataset, write_dataset
from rclab.util import sha256_file
from rclab._cli._common import load_params, config_hash, debug_flag, begin_manifest, finish_manifest


GEN_DATA_DESCRIPTION = """
    Generate train / eval tasks for the six reasoning domains (and cold-start math traces)
"""


def setup_gen_data_subparser(parser: argparse.ArgumentParser):
    """ set up the subparser for gen-data subcommand """
    parser.add_argument(
        "--domain",
        action="append",
        choices=DOMAINS,
        default=None,
        help="domain to generate, repeat for several (default=all)"
    )
    parser.add_argument(
        "--difficulty",
        action="append",
        choices=DIFFICULTIES,
        default=None,
        help="difficulty tier to generate, repeat for several (default=all)"
    )
    parser.add_argument(
        "--n",
        type=int,
        default=None,
        help="tasks per domain, split between eval and train by --eval-frac (default: cell sizes from config)"
    )
    parser.add_argument(
        "--eval-frac",
        type=float,
        default=0.2,
        help="share of --n that goes to the eval split (default=0.2)"
    )
    parser.add_argument(
        "--cold-start",
        type=int,
        default=None,
        help="number of cold-start math traces (default from config)"
    )
    parser.add_argument(
        "--output",
        default=None,
        help="dataset file (default=<out-dir>/dataset.ndjson)"
    )


def gen_data_run(args: argparse.Namespace):
    """ generate and write a dataset """
    if args.n is not None and args.n < 1:
        raise ValueError("gen-data: --n must be positive")
    if not 0. <= args.eval_frac < 1.:
        raise ValueError("gen-data: --eval-frac must be in [0, 1)")
    params = load_params(args)
    manifest = begin_manifest(args)
    manifest.config_hash = config_hash(args)
    os.makedirs(args.out_dir, exist_ok=True)
    path = args.output if args.output is not None else os.path.join(args.out_dir, "dataset.ndjson")
    dataset = build_dataset(params.data, args.seed, domains=args.domain, difficulties=args.difficulty,
                            n_per_domain=args.n, eval_frac=args.eval_frac, cold_start=args.cold_start,
                            debug_flag=debug_flag(args))
    write_dataset(path, dataset)
    manifest.dataset_hash = sha256_file(path)
    finish_manifest(args.out_dir, manifest, [path])
    print(f"wrote {len(dataset.tasks)} tasks to {path}")
