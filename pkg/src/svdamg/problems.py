"""Test-problem generators and Matrix Market I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.spatial

from .sparskit import SparseMat

# Magnitude of the seeded jitter applied when triangulation hits a degeneracy.
JITTER = 1e-9


@dataclass(frozen=True)
class ProblemSpec:
    """What to solve: a named generator or a matrix file."""

    problem: str | None = None       # "fd" | "graph" | "incidence"
    path: str | None = None          # Matrix Market file instead of a generator
    k: int = 32
    n: int = 1024
    seed: int = 0
    shift: float = 0.0


def fd_laplacian(k: int) -> SparseMat:
    """Five-point finite-difference Laplacian on a k x k interior grid.

    Dirichlet boundary, unit scaling: diagonal 4, off-diagonals -1,
    size k^2 x k^2.
    """
    if k < 1:
        raise ValueError("fd_laplacian needs k >= 1")
    one = sp.diags([-np.ones(k - 1), 2 * np.ones(k), -np.ones(k - 1)], [-1, 0, 1])
    eye = sp.eye(k)
    return SparseMat(sp.kron(eye, one) + sp.kron(one, eye))


def fd_eigenvalues(k: int, n_b: int, mode: str) -> np.ndarray:
    """Extremal analytic eigenvalues 4 - 2cos(p pi/(k+1)) - 2cos(q pi/(k+1)).

    Returned in mode order: ascending for minimal, descending for dominant.
    """
    p = np.arange(1, k + 1)
    lam1 = 2.0 - 2.0 * np.cos(p * np.pi / (k + 1))
    lam = (lam1[:, None] + lam1[None, :]).ravel()
    lam.sort()
    if mode == "dominant":
        return lam[::-1][:n_b].copy()
    return lam[:n_b].copy()


def grid_incidence(k: int) -> SparseMat:
    """Oriented edge-node incidence matrix of the k x k grid graph.

    2k(k-1) edges (horizontal row-major, then vertical row-major) by k^2
    nodes; each row holds +1 and -1. A^T A is the grid-graph Laplacian.
    """
    if k < 2:
        raise ValueError("grid_incidence needs k >= 2")
    rows, cols, vals = [], [], []
    edge = 0

    def node(r, c):
        return r * k + c

    for r in range(k):
        for c in range(k - 1):
            rows += [edge, edge]
            cols += [node(r, c), node(r, c + 1)]
            vals += [1.0, -1.0]
            edge += 1
    for r in range(k - 1):
        for c in range(k):
            rows += [edge, edge]
            cols += [node(r, c), node(r + 1, c)]
            vals += [1.0, -1.0]
            edge += 1
    return SparseMat.from_coo(2 * k * (k - 1), k * k, rows, cols, vals)


def grid_incidence_singular_values(k: int, n_b: int, mode: str) -> np.ndarray:
    """Analytic singular values of grid_incidence(k): sqrt of the grid-graph
    Laplacian eigenvalues (2 - 2cos(p pi/k)) + (2 - 2cos(q pi/k))."""
    p = np.arange(k)
    lam1 = 2.0 - 2.0 * np.cos(p * np.pi / k)
    lam = (lam1[:, None] + lam1[None, :]).ravel()
    lam.sort()
    sig = np.sqrt(np.maximum(lam, 0.0))
    if mode == "dominant":
        return sig[::-1][:n_b].copy()
    return sig[:n_b].copy()


def delaunay_points(n: int, seed: int) -> np.ndarray:
    """n seeded uniform points in the unit square."""
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(n, 2))


def graph_laplacian_from_points(points: np.ndarray, shift: float = 0.0,
                                seed: int = 0) -> SparseMat:
    """Graph Laplacian of the Delaunay triangulation of the given points,
    plus shift * I. Near-degenerate inputs are retried with seeded jitter."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n < 3:
        raise ValueError("need at least 3 points for a triangulation")
    rng = np.random.default_rng(seed)
    for attempt in range(4):
        try:
            tri = scipy.spatial.Delaunay(pts)
            break
        except scipy.spatial.QhullError:
            if attempt == 3:
                raise
            pts = pts + rng.uniform(-JITTER, JITTER, size=pts.shape)
    simpl = tri.simplices
    edges = np.vstack([simpl[:, [0, 1]], simpl[:, [1, 2]], simpl[:, [0, 2]]])
    edges.sort(axis=1)
    edges = np.unique(edges, axis=0)
    i, j = edges[:, 0], edges[:, 1]
    adj = sp.coo_matrix((np.ones(len(edges)), (i, j)), shape=(n, n))
    adj = adj + adj.T
    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = sp.diags(deg) - adj
    if shift:
        lap = lap + shift * sp.eye(n)
    return SparseMat(lap)


def delaunay_graph_laplacian(n: int, seed: int, shift: float = 0.0) -> SparseMat:
    """Shifted graph Laplacian of the Delaunay triangulation of n seeded
    uniform points in the unit square."""
    return graph_laplacian_from_points(delaunay_points(n, seed), shift, seed)


def load_problem(spec: ProblemSpec) -> SparseMat:
    """Materialize the matrix a ProblemSpec describes."""
    if (spec.problem is None) == (spec.path is None):
        raise ValueError("exactly one of problem or path must be given")
    if spec.path is not None:
        return read_matrix_market(spec.path)
    if spec.problem == "fd":
        return fd_laplacian(spec.k)
    if spec.problem == "graph":
        return delaunay_graph_laplacian(spec.n, spec.seed, spec.shift)
    if spec.problem == "incidence":
        return grid_incidence(spec.k)
    raise ValueError(f"unknown problem {spec.problem!r}")


def read_matrix_market(path: str) -> SparseMat:
    """Read a coordinate Matrix Market file (real/integer/pattern, general).

    Duplicate entries are summed; indices are 1-based in the file. Complex or
    Hermitian/symmetric qualifiers are rejected by name.
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline()
        tokens = header.strip().lower().split()
        if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
            raise ValueError(f"{path}: malformed Matrix Market header: {header.strip()!r}")
        layout, field, symmetry = tokens[2], tokens[3], tokens[4]
        if layout != "coordinate":
            raise ValueError(f"{path}: unsupported layout {layout!r} (only coordinate)")
        if field not in ("real", "integer", "pattern"):
            raise ValueError(f"{path}: unsupported field {field!r} (complex data not supported)")
        if symmetry != "general":
            raise ValueError(f"{path}: unsupported symmetry qualifier {symmetry!r}")
        line = fh.readline()
        while line and (line.startswith("%") or not line.strip()):
            line = fh.readline()
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}: malformed size line: {line.strip()!r}")
        nrows, ncols, nnz = (int(p) for p in parts)
        want = 2 if field == "pattern" else 3
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.ones(nnz)
        got = 0
        for line in fh:
            if not line.strip() or line.startswith("%"):
                continue
            parts = line.split()
            if len(parts) != want:
                raise ValueError(f"{path}: malformed entry line: {line.strip()!r}")
            i, j = int(parts[0]), int(parts[1])
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise ValueError(
                    f"{path}: entry ({i}, {j}) out of range for {nrows}x{ncols} matrix")
            if got >= nnz:
                raise ValueError(f"{path}: more than the declared {nnz} entries")
            rows[got] = i - 1
            cols[got] = j - 1
            if want == 3:
                vals[got] = float(parts[2])
            got += 1
        if got != nnz:
            raise ValueError(f"{path}: expected {nnz} entries, found {got}")
    return SparseMat.from_coo(nrows, ncols, rows, cols, vals)


def write_matrix_market(path: str, A: SparseMat) -> None:
    """Write a coordinate real general Matrix Market file, 17 significant digits."""
    coo = A.csr.tocoo()
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{A.nrows} {A.ncols} {A.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")
