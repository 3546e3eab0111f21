#!/usr/bin/env python3
"""Run the multimin study; see `blo reproduce multimin --help` for options."""

import sys

from blo.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "multimin"] + sys.argv[1:]))
