"""
rclab/_cli/__init__.py

    internal package defining the command-line interface for data generation, training,
    evaluation, ablations and reports
"""


from typing import Optional, List
import argparse
import sys

from rclab._cli._common import add_global_args
from rclab.model.tinylm import NonFiniteLoss
from rclab.util import debug_handler
from rclab._cli.gen_data import GEN_DATA_DESCRIPTION, setup_gen_data_subparser, gen_data_run
from rclab._cli.train import TRAIN_DESCRIPTION, setup_train_subparser, train_run_cli
from rclab._cli.evaluate import EVAL_DESCRIPTION, setup_eval_subparser, eval_run
from rclab._cli.ablate import ABLATE_DESCRIPTION, setup_ablate_subparser, ablate_run
from rclab._cli.tag_skills import TAG_SKILLS_DESCRIPTION, setup_tag_skills_subparser, tag_skills_run
from rclab._cli.report import REPORT_DESCRIPTION, setup_report_subparser, report_run
from rclab._cli.score import SCORE_DESCRIPTION, setup_score_subparser, score_run
from rclab._cli.params import PARAMS_DESCRIPTION, setup_params_subparser, params_run


#------------------------------------------------------------------------------
# top-level


_TOP_LEVEL_DESCRIPTION = """
    Reasoning curriculum laboratory: a tiny policy trained with cold-start SFT, math RL
    and joint RL on six verifiable reasoning domains
"""

# exit codes
EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2


_SUBCOMMANDS = [
    ("gen-data", "generate task datasets", GEN_DATA_DESCRIPTION, setup_gen_data_subparser),
    ("train", "train one curriculum variant", TRAIN_DESCRIPTION, setup_train_subparser),
    ("eval", "pass@1 evaluation of a checkpoint", EVAL_DESCRIPTION, setup_eval_subparser),
    ("ablate", "multi-seed variant comparison", ABLATE_DESCRIPTION, setup_ablate_subparser),
    ("tag-skills", "skill frequency tables", TAG_SKILLS_DESCRIPTION, setup_tag_skills_subparser),
    ("report", "reduce run directories into tables", REPORT_DESCRIPTION, setup_report_subparser),
    ("score", "score responses offline", SCORE_DESCRIPTION, setup_score_subparser),
    ("params", "write a parameter config", PARAMS_DESCRIPTION, setup_params_subparser),
]


def _setup_top_level_parser():
    """ set up the top-level argument parser """
    parser = argparse.ArgumentParser(
        prog="rclab",
        description=_TOP_LEVEL_DESCRIPTION
    )
    _subparsers = parser.add_subparsers(
        title="subcommands",
        required=True,
        dest="subcommand"
    )
    for name, help_, description, setup in _SUBCOMMANDS:
        sub = _subparsers.add_parser(name, help=help_, description=description)
        setup(sub)
        add_global_args(sub)
    return parser


def _run(args: argparse.Namespace):
    match args.subcommand:
        case "gen-data":
            gen_data_run(args)
        case "train":
            train_run_cli(args)
        case "eval":
            eval_run(args)
        case "ablate":
            ablate_run(args)
        case "tag-skills":
            tag_skills_run(args)
        case "report":
            report_run(args)
        case "score":
            score_run(args)
        case "params":
            params_run(args)


def _to_stderr(line: str):
    print(line, file=sys.stderr, flush=True)


def main(argv: Optional[List[str]] = None) -> int :
    """
    CLI entry point, returns the exit code: 0 success, 1 I/O failure or diverged training,
    2 invalid flags or invalid configuration
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _setup_top_level_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags and 0 after --help
        return EXIT_USAGE if e.code else EXIT_OK
    args.argv = argv
    try:
        _run(args)
    except OSError as e:
        print(f"rclab {args.subcommand}: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except NonFiniteLoss as e:
        debug_handler("textcb", _to_stderr, f"rclab {args.subcommand}: training diverged: {e}")
        return EXIT_IO
    except ValueError as e:
        print(f"rclab {args.subcommand}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK
