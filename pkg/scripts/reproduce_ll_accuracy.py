#!/usr/bin/env python3
"""Run the ll-accuracy study; see `blo reproduce ll-accuracy --help` for options."""

import sys

from blo.cli import main

if __name__ == "__main__":
    sys.exit(main(["reproduce", "ll-accuracy"] + sys.argv[1:]))
