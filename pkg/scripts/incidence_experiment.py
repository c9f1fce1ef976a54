#!/usr/bin/env python3
"""Grid-incidence singular triplet experiment.

The oriented edge-node incidence matrix of the 8x8 grid graph (112x64) is the
desk-scale rectangular test case: A^T A is the grid-graph Laplacian, so the
singular values are known analytically and error columns come for free.

    python3 scripts/incidence_experiment.py
    python3 scripts/incidence_experiment.py --mode minimal --nb 2
    python3 scripts/incidence_experiment.py --k 16

Any svdamg flag may be appended; later flags win.
"""

import sys

from svdamg.cli import main

DEFAULTS = [
    "--problem", "incidence", "--k", "8", "--mode", "dominant",
    "--nb", "4", "--reference", "analytic", "--out", "incidence_conv.csv",
]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
