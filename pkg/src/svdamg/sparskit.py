"""Sparse and dense linear-algebra kernels used by every other module.

Sparse matrices are CSR, wrapped in an immutable :class:`SparseMat`. Dense
matrices and vectors are plain float64 numpy arrays. All operations return
fresh arrays; nothing mutates its inputs.
"""

from __future__ import annotations

from functools import cached_property

import numba
import numpy as np
import scipy.linalg
import scipy.sparse as sp

# Relative drop tolerance applied when assembling sparse products.
DROP_TOL = 1e-14

# Singular values below this (relative to the largest) are treated as zero.
SVD_ZERO_TOL = 1e-13

# Columns whose norm falls below this after projection count as rank-deficient.
ORTH_DROP_TOL = 1e-13


class SolverError(RuntimeError):
    """Raised when the solver cannot proceed (singular fit, rank loss, ...)."""


class SparseMat:
    """Immutable CSR sparse matrix.

    Invariants: float64 values, duplicate entries summed, column indices sorted
    within each row, no stored explicit zeros. The underlying arrays are marked
    read-only after construction.
    """

    def __init__(self, matrix):
        if isinstance(matrix, SparseMat):
            self.csr = matrix.csr
            return
        if isinstance(matrix, np.ndarray):
            csr = sp.csr_matrix(np.asarray(matrix, dtype=np.float64))
        elif sp.issparse(matrix):
            csr = matrix.tocsr().astype(np.float64, copy=True)
        else:
            raise ValueError(f"cannot build SparseMat from {type(matrix).__name__}")
        csr.sum_duplicates()
        csr.sort_indices()
        csr.eliminate_zeros()
        if not np.all(np.isfinite(csr.data)):
            raise ValueError("SparseMat entries must be finite")
        for arr in (csr.data, csr.indices, csr.indptr):
            arr.setflags(write=False)
        self.csr = csr

    @classmethod
    def from_coo(cls, nrows, ncols, rows, cols, vals) -> "SparseMat":
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)))

    @classmethod
    def eye(cls, n: int) -> "SparseMat":
        return cls(sp.eye(n, format="csr"))

    @classmethod
    def from_diag(cls, d) -> "SparseMat":
        return cls(sp.diags(np.asarray(d, dtype=np.float64), format="csr"))

    @property
    def nrows(self) -> int:
        return self.csr.shape[0]

    @property
    def ncols(self) -> int:
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    @property
    def row_offsets(self) -> np.ndarray:
        return self.csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self.csr.indices

    @property
    def values(self) -> np.ndarray:
        return self.csr.data

    @cached_property
    def row_sq_norms(self) -> np.ndarray:
        out = np.zeros(self.nrows)
        np.add.at(out, np.repeat(np.arange(self.nrows), np.diff(self.row_offsets)),
                  self.values ** 2)
        out.setflags(write=False)
        return out

    @cached_property
    def frob_norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def __repr__(self) -> str:
        return f"SparseMat({self.nrows}x{self.ncols}, nnz={self.nnz})"


def _pruned(csr) -> SparseMat:
    """Wrap a scipy product, dropping entries below DROP_TOL relative to the max."""
    csr = csr.tocsr()
    if csr.nnz:
        cutoff = DROP_TOL * np.abs(csr.data).max()
        keep = np.abs(csr.data) >= cutoff
        if not keep.all():
            csr.data = np.where(keep, csr.data, 0.0)
    return SparseMat(csr)


def spmv(A: SparseMat, x: np.ndarray, transpose_flag: bool = False) -> np.ndarray:
    """Return A @ x, or A.T @ x when transpose_flag is set."""
    x = np.asarray(x, dtype=np.float64)
    expect = A.nrows if transpose_flag else A.ncols
    if x.shape != (expect,):
        raise ValueError(
            f"spmv dimension mismatch: operator is {A.nrows}x{A.ncols}, "
            f"vector has shape {x.shape} (transpose={transpose_flag})")
    mat = A.csr.T if transpose_flag else A.csr
    return np.asarray(mat @ x).ravel()


def transpose(A: SparseMat) -> SparseMat:
    return SparseMat(A.csr.T.tocsr())


def sparse_matmul(A: SparseMat, B: SparseMat) -> SparseMat:
    if A.ncols != B.nrows:
        raise ValueError(
            f"sparse_matmul dimension mismatch: {A.nrows}x{A.ncols} @ {B.nrows}x{B.ncols}")
    return _pruned(A.csr @ B.csr)


def triple_product(P: SparseMat, A: SparseMat, Q: SparseMat) -> SparseMat:
    """Galerkin-style product P.T @ A @ Q."""
    if P.nrows != A.nrows or A.ncols != Q.nrows:
        raise ValueError(
            f"triple_product dimension mismatch: P is {P.nrows}x{P.ncols}, "
            f"A is {A.nrows}x{A.ncols}, Q is {Q.nrows}x{Q.ncols}")
    return _pruned(P.csr.T @ (A.csr @ Q.csr))


def weighted_jacobi(M: SparseMat, rhs: np.ndarray, x0: np.ndarray,
                    omega: float, steps: int) -> np.ndarray:
    """Damped Jacobi iteration x <- x - omega * D^-1 (M x - rhs)."""
    if M.nrows != M.ncols:
        raise ValueError(f"weighted_jacobi needs a square operator, got {M.nrows}x{M.ncols}")
    rhs = np.asarray(rhs, dtype=np.float64)
    x = np.array(x0, dtype=np.float64, copy=True)
    if rhs.shape != (M.nrows,) or x.shape != (M.nrows,):
        raise ValueError("weighted_jacobi dimension mismatch")
    d = M.diagonal()
    if np.any(d == 0.0):
        raise ValueError(f"weighted_jacobi: zero diagonal entry at row {int(np.argmin(d != 0.0))}")
    for _ in range(steps):
        x -= omega * (spmv(M, x) - rhs) / d
    return x


@numba.njit(cache=True, nogil=True)
def _kaczmarz_rows(indptr, indices, data, rowsq, rhs, x, steps):  # pragma: no cover
    for _ in range(steps):
        for i in range(rowsq.shape[0]):
            lo = indptr[i]
            hi = indptr[i + 1]
            acc = 0.0
            for k in range(lo, hi):
                acc += data[k] * x[indices[k]]
            f = (rhs[i] - acc) / rowsq[i]
            for k in range(lo, hi):
                x[indices[k]] += f * data[k]


def kaczmarz_sweep(M: SparseMat, rhs: np.ndarray, x0: np.ndarray, steps: int) -> np.ndarray:
    """Kaczmarz row projections in ascending row order, `steps` full sweeps."""
    rhs = np.asarray(rhs, dtype=np.float64)
    x = np.array(x0, dtype=np.float64, copy=True)
    if rhs.shape != (M.nrows,) or x.shape != (M.ncols,):
        raise ValueError("kaczmarz_sweep dimension mismatch")
    rowsq = M.row_sq_norms
    if np.any(rowsq == 0.0):
        raise ValueError(
            f"kaczmarz_sweep: all-zero row {int(np.argmax(rowsq == 0.0))}")
    if steps > 0:
        _kaczmarz_rows(M.row_offsets, M.col_indices, M.values, rowsq, rhs, x, steps)
    return x


def dense_sym_generalized_eig(X: np.ndarray, Y: np.ndarray):
    """Solve X z = lam Y z for symmetric X and SPD Y.

    Returns (values ascending, vectors Y-orthonormal as columns).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != X.shape[1] or X.shape != Y.shape:
        raise ValueError(f"dense_sym_generalized_eig needs square same-shape inputs, "
                         f"got {X.shape} and {Y.shape}")
    scale = np.linalg.norm(X)
    if np.linalg.norm(X - X.T) > 1e-12 * max(scale, np.finfo(float).tiny):
        raise ValueError("dense_sym_generalized_eig: X is not symmetric")
    try:
        vals, vecs = scipy.linalg.eigh(X, Y)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise ValueError(f"dense_sym_generalized_eig: Y is not positive definite ({exc})")
    return vals, vecs


def dense_svd(D: np.ndarray):
    """Thin SVD D = U diag(S) V.T with S descending; tiny values snapped to zero."""
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2:
        raise ValueError("dense_svd needs a 2-D array")
    u, s, vh = np.linalg.svd(D, full_matrices=False)
    if s.size and s[0] > 0.0:
        s = np.where(s < SVD_ZERO_TOL * s[0], 0.0, s)
    return u, s, vh.T


def pseudo_solve_drop_smallest(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve M x = rhs through the SVD, excluding the smallest singular direction.

    The direction dropped is the right singular vector appearing last in the
    descending SVD ordering, which makes the solve well defined even when M is
    (nearly) singular in that one direction.
    """
    M = np.asarray(M, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("pseudo_solve_drop_smallest needs a square matrix")
    if rhs.shape != (M.shape[0],):
        raise ValueError("pseudo_solve_drop_smallest dimension mismatch")
    u, s, vh = np.linalg.svd(M)
    inv = np.zeros_like(s)
    head = s[:-1]
    inv[:-1] = np.divide(1.0, head, out=np.zeros_like(head), where=head > 0.0)
    return (vh.T * inv) @ (u.T @ rhs)


def b_orthonormalize(U: np.ndarray, B: SparseMat) -> np.ndarray:
    """Orthonormalize the columns of U in the B inner product.

    Modified Gram-Schmidt with one reorthogonalization pass. Columns whose
    B-norm collapses below ORTH_DROP_TOL times their original B-norm are
    dropped; the returned column count is the numerical rank.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise ValueError("b_orthonormalize needs a 2-D array of columns")
    if U.shape[0] != B.nrows or B.nrows != B.ncols:
        raise ValueError("b_orthonormalize dimension mismatch")
    kept: list[np.ndarray] = []
    kept_b: list[np.ndarray] = []
    for j in range(U.shape[1]):
        w = U[:, j].copy()
        sq = float(w @ spmv(B, w))
        if sq < 0.0:
            raise ValueError("b_orthonormalize: B is not positive definite on the input")
        orig = np.sqrt(sq)
        if orig == 0.0:
            continue
        for _ in range(2):
            for q, bq in zip(kept, kept_b):
                w -= (bq @ w) * q
        bw = spmv(B, w)
        sq = float(w @ bw)
        if sq < 0.0:
            raise ValueError("b_orthonormalize: B is not positive definite on the input")
        nrm = np.sqrt(sq)
        if nrm < ORTH_DROP_TOL * orig:
            continue
        kept.append(w / nrm)
        kept_b.append(bw / nrm)
    if not kept:
        return np.zeros((U.shape[0], 0))
    return np.column_stack(kept)
