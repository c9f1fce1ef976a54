#!/usr/bin/env python3
"""Term-document dominant singular triplet experiment.

Ingests a Matrix Market term-document matrix (for instance the 5735x1033
MEDLINE collection) and computes its 8 dominant singular triplets with the
sparse-data parameter set: theta 0.03, 14 test vectors, 3 setup + 30 solve
cycles. The matrix file is not bundled; pass its path as the first argument
or via SVDAMG_MEDLINE.

    python3 scripts/termdoc_experiment.py data/medline.mtx
    python3 scripts/termdoc_experiment.py data/medline.mtx --nb 16

Any svdamg flag may be appended; later flags win.
"""

import os
import sys

from svdamg.cli import main

DEFAULTS = [
    "--mode", "dominant", "--nb", "8", "--nt", "14", "--theta", "0.03",
    "--mu-t", "1", "--mu-b", "4", "--mult", "3", "--add", "30",
    "--out", "termdoc_conv.csv",
]

if __name__ == "__main__":
    argv = sys.argv[1:]
    if argv and not argv[0].startswith("-"):
        matrix, rest = argv[0], argv[1:]
    else:
        matrix, rest = os.environ.get("SVDAMG_MEDLINE"), argv
    if not matrix:
        print("usage: termdoc_experiment.py MATRIX.mtx [svdamg flags...]",
              file=sys.stderr)
        sys.exit(2)
    sys.exit(main(["--matrix", matrix] + DEFAULTS + rest))
