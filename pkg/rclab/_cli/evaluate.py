"""
rclab/_cli/evaluate.py

    define CLI for eval top-level subcommand
"""


import argparse
import json
import os

from rclab.model.checkpoint import load_checkpoint
from rclab.curriculum import select_eval_tasks
from rclab.rollout import evaluate_pass1
from rclab.tasks import read_dataset
from rclab._cli._common import load_params, debug_flag, begin_manifest, finish_manifest
from rclab.util import sha256_file


EVAL_DESCRIPTION = """
    Greedy pass@1 per domain of a checkpoint on a dataset's eval split
"""


def setup_eval_subparser(parser: argparse.ArgumentParser):
    """ set up the subparser for eval subcommand """
    parser.add_argument(
        "CHECKPOINT",
        help="checkpoint file (.ckpt)"
    )
    parser.add_argument(
        "DATASET",
        help="dataset file (.ndjson)"
    )
    parser.add_argument(
        "--limit-per-domain",
        type=int,
        default=None,
        help="only evaluate the first N eval tasks of each domain (default from config)"
    )
    parser.add_argument(
        "--sample",
        dest="greedy",
        default=None,
        action="store_false",
        help="sample at temperature 1 (seeded by --seed) instead of greedy decoding"
    )


def eval_run(args: argparse.Namespace):
    """ evaluate a checkpoint, write eval.csv and eval.json to the output directory """
    params = load_params(args)
    ckpt = load_checkpoint(args.CHECKPOINT)
    dataset = read_dataset(args.DATASET)
    limit = args.limit_per_domain if args.limit_per_domain is not None else params.eval.limit_per_domain
    tasks = select_eval_tasks(dataset, limit)
    greedy = params.eval.greedy if args.greedy is None else args.greedy
    manifest = begin_manifest(args)
    table = evaluate_pass1(ckpt.params, tasks, ckpt.vocab, greedy=greedy, max_new=params.eval.max_new,
                           seed=args.seed, n_proc=args.threads, debug_flag=debug_flag(args))
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "eval.csv")
    json_path = os.path.join(args.out_dir, "eval.json")
    frame = table.to_frame()
    frame.write_csv(csv_path)
    with open(json_path, "w") as f:
        json.dump({"checkpoint": args.CHECKPOINT, "checksum": ckpt.params.checksum(), **table.to_json()},
                  f, indent=2, sort_keys=True)
    manifest.dataset_hash = sha256_file(args.DATASET)
    finish_manifest(args.out_dir, manifest, [csv_path, json_path])
    print(frame)
    if table.missing_domains:
        print(f"no eval tasks for: {', '.join(table.missing_domains)}")
