#!/usr/bin/env python3
"""Run every study into results/<study>.  Exits nonzero if any check fails."""

import sys

from blo.experiments import STUDIES, reproduce


def main() -> int:
    worst = 0
    for study in STUDIES:
        code = reproduce(study, f"results/{study}")
        print(f"{study}: {'ok' if code == 0 else 'FAILED'}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
