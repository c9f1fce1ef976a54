#!/usr/bin/env python3
"""Finite-difference Laplacian eigenpair experiment.

Runs the 32x32 five-point stencil problem with the standard parameter set
(theta 0.06, 8 boot vectors, 6 test vectors, 15 setup + 30 solve cycles) and
writes the per-cycle convergence history to CSV. Relative errors against the
analytic eigenvalues are included via --reference analytic.

    python3 scripts/fd_experiment.py                    # minimal eigenpairs
    python3 scripts/fd_experiment.py --mode dominant    # dominant eigenpairs
    python3 scripts/fd_experiment.py --k 64 --out big.csv

Any svdamg flag may be appended; later flags win.
"""

import sys

from svdamg.cli import main

DEFAULTS = [
    "--problem", "fd", "--k", "32", "--mode", "minimal",
    "--nb", "8", "--nt", "6", "--theta", "0.06",
    "--mu-t", "8", "--mu-b", "4", "--mult", "15", "--add", "30",
    "--seed", "1", "--reference", "analytic", "--out", "fd_conv.csv",
]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS + sys.argv[1:]))
