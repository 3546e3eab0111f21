#!/usr/bin/env python3
"""Run the hypercleaning study; see `blo reproduce hypercleaning --help` for options."""

import sys

from blo.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "hypercleaning"] + sys.argv[1:]))
