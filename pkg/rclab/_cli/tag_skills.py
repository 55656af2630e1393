"""
rclab/_cli/tag_skills.py

    define CLI for tag-skills top-level subcommand
"""


import argparse
import json
import os

from rclab.model.checkpoint import load_checkpoint
from rclab.curriculum import select_eval_tasks
from rclab.skills import load_lexicon, profile_run, profile_traces
from rclab.tasks import read_dataset
from rclab.util import iter_ndjson
from rclab._cli._common import load_params, debug_flag, begin_manifest, finish_manifest


TAG_SKILLS_DESCRIPTION = """
    Skill frequencies (subgoal, enumeration, backtracking, verification) per domain, either for
    greedy traces of a checkpoint or for a file of traces
"""


def setup_tag_skills_subparser(parser: argparse.ArgumentParser):
    """ set up the subparser for tag-skills subcommand """
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument(
        "--checkpoint",
        default=None,
        help="checkpoint to decode traces from (requires --dataset)"
    )
    src.add_argument(
        "--traces",
        default=None,
        help='NDJSON file of {"domain": ..., "trace": ...} records'
    )
    parser.add_argument(
        "--dataset",
        default=None,
        help="dataset whose eval split is decoded"
    )
    parser.add_argument(
        "--lexicon",
        default=None,
        help="marker lexicon (.json, default: packaged lexicon)"
    )


def tag_skills_run(args: argparse.Namespace):
    """ write skills.json and skill_frequencies.csv to the output directory """
    lexicon = load_lexicon(args.lexicon)
    manifest = begin_manifest(args)
    if args.checkpoint is not None:
        if args.dataset is None:
            raise ValueError("tag-skills: --checkpoint requires --dataset")
        params = load_params(args)
        tasks = select_eval_tasks(read_dataset(args.dataset), params.eval.limit_per_domain)
        table = profile_run(load_checkpoint(args.checkpoint), tasks, max_new=params.eval.max_new,
                            lexicon=lexicon, n_proc=args.threads, debug_flag=debug_flag(args))
    else:
        table = profile_traces(((r["domain"], r["trace"]) for r in iter_ndjson(args.traces)), lexicon)
    os.makedirs(args.out_dir, exist_ok=True)
    json_path = os.path.join(args.out_dir, "skills.json")
    csv_path = os.path.join(args.out_dir, "skill_frequencies.csv")
    with open(json_path, "w") as f:
        json.dump(table.to_json(), f, indent=2, sort_keys=True)
    frame = table.to_frame()
    frame.write_csv(csv_path)
    finish_manifest(args.out_dir, manifest, [json_path, csv_path])
    print(frame)
