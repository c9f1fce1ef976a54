"""Bootstrap algebraic multigrid for extremal singular triplets and eigenpairs.

The solver computes a few dominant or minimal singular triplets of a sparse
rectangular matrix (or extremal eigenpairs of a sparse symmetric matrix) with
a two-phase multilevel method: a multiplicative bootstrap setup phase that
builds the coarse hierarchy while improving the triplets, followed by an
additive correction phase on the frozen hierarchy with collective Ritz
refinement.
"""

from .cycles import SolverConfig, solve
from .gsvd import TripletSet

__all__ = ["SolverConfig", "TripletSet", "solve"]
