"""Strength of connection, C/F splitting, and interpolation sparsity patterns.

The splitting side of the hierarchy is driven by a strength operator N:
A A^T for the row space and A^T A for the column space of a rectangular A,
or A itself for square/symmetric problems.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .sparskit import SparseMat, sparse_matmul, transpose

KINDS = ("rectangular", "square", "symmetric")


@dataclass(frozen=True)
class StrengthGraph:
    """Directed strong-influence graph of a square strength operator.

    influenced_by[i] lists the points j that strongly influence point i,
    i.e. |n_ij| >= theta * sum_k |n_ik| (the sum includes the diagonal,
    the candidate j != i). influences is the reverse adjacency.
    """

    n: int
    influenced_by: list[np.ndarray]
    influences: list[np.ndarray]


@dataclass(frozen=True)
class Splitting:
    """C/F partition of one side with per-F-point interpolatory sets.

    coarse_index maps a C-point's fine index to its coarse index; cpoints is
    sorted ascending so coarse ordering follows fine ordering.
    """

    n: int
    cpoints: np.ndarray
    fpoints: np.ndarray
    coarse_index: dict[int, int] = field(repr=False)
    interp_sets: dict[int, np.ndarray] = field(repr=False)

    @property
    def n_coarse(self) -> int:
        return len(self.cpoints)


def strength_graph(N: SparseMat, theta: float) -> StrengthGraph:
    """Build the strong-influence graph of N with threshold theta."""
    if N.nrows != N.ncols:
        raise ValueError(f"strength_graph needs a square operator, got {N.nrows}x{N.ncols}")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"strength threshold must lie in (0, 1), got {theta}")
    n = N.nrows
    indptr, idx, vals = N.row_offsets, N.col_indices, np.abs(N.values)
    rowsum = np.zeros(n)
    np.add.at(rowsum, np.repeat(np.arange(n), np.diff(indptr)), vals)
    influenced_by: list[np.ndarray] = []
    influences_build: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        cols = idx[lo:hi]
        strong = cols[(vals[lo:hi] >= theta * rowsum[i]) & (cols != i)]
        influenced_by.append(strong)
        for j in strong:
            influences_build[j].append(i)
    influences = [np.asarray(lst, dtype=np.int64) for lst in influences_build]
    return StrengthGraph(n=n, influenced_by=influenced_by, influences=influences)


def rs_one_pass(S: StrengthGraph) -> Splitting:
    """One-pass Ruge-Stueben splitting.

    Starts from lambda_i = |influences(i)|, repeatedly promotes the
    highest-lambda undecided point to C (ties by smallest index), turns the
    points it strongly influences into F-points, and increments lambda for
    undecided points that strongly influence a new F-point. Isolated points
    fall out with lambda = 0 and end up as C-points.
    """
    n = S.n
    UNDECIDED, CPOINT, FPOINT = 0, 1, 2
    state = np.full(n, UNDECIDED, dtype=np.int8)
    lam = np.array([len(S.influences[i]) for i in range(n)], dtype=np.int64)
    heap = [(-lam[i], i) for i in range(n)]
    heapq.heapify(heap)
    while heap:
        neg, i = heapq.heappop(heap)
        if state[i] != UNDECIDED or lam[i] != -neg:
            continue
        state[i] = CPOINT
        for j in S.influences[i]:
            if state[j] != UNDECIDED:
                continue
            state[j] = FPOINT
            for k in S.influenced_by[j]:
                if state[k] == UNDECIDED:
                    lam[k] += 1
                    heapq.heappush(heap, (-lam[k], k))
    cpoints = np.flatnonzero(state == CPOINT)
    fpoints = np.flatnonzero(state == FPOINT)
    return _with_interp_sets(S, cpoints, fpoints)


def _with_interp_sets(S: StrengthGraph, cpoints: np.ndarray, fpoints: np.ndarray) -> Splitting:
    """Attach interpolatory sets; F-points with no strong C-neighbour become C."""
    is_c = np.zeros(S.n, dtype=bool)
    is_c[cpoints] = True
    promote = [i for i in fpoints if not is_c[S.influenced_by[i]].any()]
    if promote:
        is_c[promote] = True
        cpoints = np.flatnonzero(is_c)
        fpoints = np.setdiff1d(fpoints, promote, assume_unique=True)
    interp_sets = {int(i): S.influenced_by[i][is_c[S.influenced_by[i]]] for i in fpoints}
    coarse_index = {int(c): k for k, c in enumerate(cpoints)}
    return Splitting(n=S.n, cpoints=cpoints, fpoints=fpoints,
                     coarse_index=coarse_index, interp_sets=interp_sets)


def interpolatory_sets(S: StrengthGraph, split: Splitting) -> Splitting:
    """Recompute interpolatory sets for an existing C/F partition."""
    return _with_interp_sets(S, split.cpoints, split.fpoints)


def _pattern_rows(split: Splitting) -> list[np.ndarray]:
    """Per-fine-row coarse column indices: unit row for C-points, the mapped
    interpolatory set for F-points."""
    rows: list[np.ndarray] = []
    for i in range(split.n):
        if i in split.coarse_index:
            rows.append(np.array([split.coarse_index[i]], dtype=np.int64))
        else:
            cols = np.array(sorted(split.coarse_index[int(j)] for j in split.interp_sets[i]),
                            dtype=np.int64)
            rows.append(cols)
    return rows


@dataclass(frozen=True)
class LevelAnalysis:
    """Patterns plus the strength operators they were derived from."""

    pattern_p: list[np.ndarray]
    pattern_q: list[np.ndarray]
    split_u: Splitting
    split_v: Splitting
    strength_u: SparseMat
    strength_v: SparseMat


def analyze_level(A: SparseMat, theta: float, kind: str) -> LevelAnalysis:
    """Coarsen both sides of A and return patterns with the strength operators.

    rectangular: row side from A A^T, column side from A^T A (independent
    splittings). square: one splitting from A shared by rows and columns.
    symmetric: like square with the column side aliasing the row side.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}, expected one of {KINDS}")
    if kind in ("square", "symmetric"):
        if A.nrows != A.ncols:
            raise ValueError(f"{kind} kind needs a square matrix, got {A.nrows}x{A.ncols}")
        split = rs_one_pass(strength_graph(A, theta))
        rows = _pattern_rows(split)
        return LevelAnalysis(pattern_p=rows, pattern_q=rows, split_u=split,
                             split_v=split, strength_u=A, strength_v=A)
    n_u = sparse_matmul(A, transpose(A))
    n_v = sparse_matmul(transpose(A), A)
    split_u = rs_one_pass(strength_graph(n_u, theta))
    split_v = rs_one_pass(strength_graph(n_v, theta))
    return LevelAnalysis(pattern_p=_pattern_rows(split_u), pattern_q=_pattern_rows(split_v),
                         split_u=split_u, split_v=split_v,
                         strength_u=n_u, strength_v=n_v)


def build_patterns(A: SparseMat, theta: float, kind: str):
    """Return (pattern_P, pattern_Q, split_u, split_v) for one coarsening step."""
    res = analyze_level(A, theta, kind)
    return res.pattern_p, res.pattern_q, res.split_u, res.split_v
