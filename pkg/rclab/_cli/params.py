"""
rclab/_cli/params.py

    define CLI for params top-level subcommand
"""


import argparse

from rclab._cli._common import load_params


PARAMS_DESCRIPTION = """
    Write the default parameters (or --config merged over them) to a YAML config
"""


def setup_params_subparser(parser: argparse.ArgumentParser):
    """ set up the subparser for params subcommand """
    parser.add_argument(
        "OUTPUT",
        help="config file to write (.yaml)"
    )
    parser.add_argument(
        "--changed-only",
        dest="include_unchanged",
        default=True,
        action="store_false",
        help="only write parameters that differ from the defaults"
    )


def params_run(args: argparse.Namespace):
    """ write a parameter config """
    load_params(args).write_config(args.OUTPUT, include_unchanged=args.include_unchanged)
