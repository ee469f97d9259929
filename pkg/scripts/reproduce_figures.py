"""Regenerate the example scalars and path figures.

The Brownian realizations behind the reference figures are unknown, so the
paths here match them in shape only. Output goes to ``figures/`` by default.

    python3 scripts/reproduce_figures.py [--out DIR] [--steps N] [--epsilon EPS]
"""
import sys

from flashsim.cli import main

if __name__ == "__main__":
    sys.exit(main(["figures", *sys.argv[1:]]))
