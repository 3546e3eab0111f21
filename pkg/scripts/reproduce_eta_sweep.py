#!/usr/bin/env python3
"""Run the eta-sweep study; see `blo reproduce eta-sweep --help` for options."""

import sys

from blo.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "eta-sweep"] + sys.argv[1:]))
