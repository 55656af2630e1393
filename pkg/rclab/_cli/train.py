"""
rclab/_cli/train.py

    define CLI for train top-level subcommand
"""


import argparse
import os

from rclab.params import LabParams
from rclab.curriculum import parse_variant
from rclab.harness import RunDirectory, train_run, run_dir_name
from rclab.tasks import build_dataset, read_dataset
from rclab._cli._common import load_params, debug_flag, begin_manifest, finish_manifest


TRAIN_DESCRIPTION = """
    Train one curriculum variant (rc, rc_flat, cs_rl, rl_only) with one seed
"""


def setup_train_subparser(parser: argparse.ArgumentParser):
    """ set up the subparser for train subcommand """
    parser.add_argument(
        "--variant",
        default=None,
        help="curriculum variant: rc, rc_flat, cs_rl or rl_only (default from config)"
    )
    parser.add_argument(
        "--dataset",
        default=None,
        help="dataset file from gen-data (default: generate one from the config data section)"
    )
    parser.add_argument(
        "--run-dir",
        default=None,
        help="run directory (default=<out-dir>/runs/<VARIANT>_seed<SEED>)"
    )
    parser.add_argument(
        "--resume",
        action="store_true",
        default=False,
        help="continue the run from its latest checkpoint, config and dataset are taken from the run directory"
    )
    parser.add_argument(
        "--max-steps",
        type=int,
        default=None,
        help="stop after this many training steps (the run can be resumed)"
    )
    parser.add_argument(
        "--no-skills",
        dest="skills",
        default=True,
        action="store_false",
        help="do not profile skills of the final policy"
    )


def train_run_cli(args: argparse.Namespace):
    """ run (or resume) a training run """
    if args.max_steps is not None and args.max_steps < 1:
        raise ValueError("train: --max-steps must be positive")
    params = load_params(args)
    variant = parse_variant(args.variant if args.variant is not None else params.curriculum.variant)
    run_path = args.run_dir if args.run_dir is not None else os.path.join(args.out_dir, "runs",
                                                                          run_dir_name(variant, args.seed))
    rd = RunDirectory(run_path)
    manifest = begin_manifest(args)
    if args.resume:
        # a resumed run keeps the config and dataset it started with
        params = LabParams.from_config(rd.config_path)
        dataset = read_dataset(rd.dataset_path)
        dataset_file = rd.dataset_path
    elif args.dataset is not None:
        dataset = read_dataset(args.dataset)
        dataset_file = args.dataset
    else:
        dataset = build_dataset(params.data, args.seed, debug_flag=debug_flag(args))
        dataset_file = None
    arts = train_run(params, dataset, variant, args.seed, run_path, dataset_file=dataset_file,
                     resume=args.resume, max_steps=args.max_steps, profile_skills=args.skills,
                     n_proc=args.threads, debug_flag=debug_flag(args))
    manifest.config_hash = rd.config_hash()
    manifest.dataset_hash = rd.dataset_hash()
    if not arts.completed:
        manifest.status = "interrupted"
    finish_manifest(run_path, manifest, [os.path.join(run_path, a) for a in rd.artifacts()])
    state = "finished" if arts.completed else "stopped"
    print(f"{state} at step {arts.state.global_step}, checksum {arts.checksum}")
