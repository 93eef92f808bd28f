#!/usr/bin/env python3

"""
Main entry point for the frequency-domain FWI engine.

Subcommands: make-model, simulate, compare-solvers, invert. See `python main.py -h`.
"""

import sys

from app.api.cli import run
from app.utils.logger import setup_logger

logger = setup_logger("main")


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
