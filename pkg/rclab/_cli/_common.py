"""
rclab/_cli/_common.py

    flags and helpers shared by every subcommand
"""


from typing import Optional, List
import argparse
import os

from rclab.params import LabParams, _DEFAULT_CONFIG
from rclab.harness import RunManifest, append_manifest, utc_now
from rclab.util import sha256_file


def add_global_args(parser: argparse.ArgumentParser):
    """ --config, --seed, --out-dir and --threads, accepted by every subcommand """
    parser.add_argument(
        "--config",
        default=None,
        help="parameter config file (.yaml or .json), defaults are used for anything not in it"
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=0,
        help="run / generation seed (default=0)"
    )
    parser.add_argument(
        "--out-dir",
        default=".",
        help="output directory (default=.)"
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker processes, 1 runs everything in-process (default=1)"
    )


def load_params(args: argparse.Namespace) -> LabParams :
    if args.config is None:
        return LabParams.load_default()
    return LabParams.from_config(args.config)


def config_hash(args: argparse.Namespace) -> str :
    return sha256_file(_DEFAULT_CONFIG if args.config is None else args.config)


def debug_flag(args: argparse.Namespace) -> str :
    return "text_pid" if args.threads > 1 else "text"


def begin_manifest(args: argparse.Namespace, seeds: Optional[List[int]] = None) -> RunManifest :
    return RunManifest(command=list(getattr(args, "argv", [])), config_hash=None, dataset_hash=None,
                       seeds=[args.seed] if seeds is None else list(seeds), started=utc_now())


def finish_manifest(out_dir: str, manifest: RunManifest, artifacts: List[str]) -> str :
    """ record artifact paths (relative to ``out_dir``) and append the manifest """
    manifest.artifacts = sorted(os.path.relpath(p, out_dir) for p in artifacts)
    manifest.finished = utc_now()
    return append_manifest(out_dir, manifest)
