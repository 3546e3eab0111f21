#!/usr/bin/env python3
"""Run the dimension-scaling study; see `blo reproduce dimension-scaling --help` for options."""

import sys

from blo.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "dimension-scaling"] + sys.argv[1:]))
