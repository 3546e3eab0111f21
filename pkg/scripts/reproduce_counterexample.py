#!/usr/bin/env python3
"""Run the counterexample study; see `blo reproduce counterexample --help` for options."""

import sys

from blo.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "counterexample"] + sys.argv[1:]))
