"""
rclab/_cli/score.py

    define CLI for score top-level subcommand
"""


import argparse
import sys
import json

from rclab.reward import score_records
from rclab.util import iter_ndjson, dumps_canonical


SCORE_DESCRIPTION = """
    Score NDJSON {"response", "spec"} records with the verifiable reward, one result line per record
"""


def setup_score_subparser(parser: argparse.ArgumentParser):
    """ set up the subparser for score subcommand """
    parser.add_argument(
        "INPUT",
        nargs="?",
        default="-",
        help="NDJSON records (default: stdin)"
    )
    parser.add_argument(
        "--output",
        default=None,
        help="write results here instead of stdout"
    )


def score_run(args: argparse.Namespace):
    """ score records from a file or stdin """
    if args.INPUT == "-":
        records = [json.loads(line) for line in sys.stdin if line.strip()]
    else:
        records = list(iter_ndjson(args.INPUT))
    lines = [dumps_canonical(r) for r in score_records(records)]
    if args.output is None:
        for line in lines:
            print(line)
    else:
        with open(args.output, "w") as f:
            f.writelines(line + "\n" for line in lines)
