"""
rclab/__main__.py

    package main
"""


import sys

from rclab._cli import main


if __name__ == "__main__":
    sys.exit(main())
