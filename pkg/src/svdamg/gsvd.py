"""Generalized SVD with respect to SPD inner products B and C.

A triplet (sigma, u, v) satisfies A v = sigma B u and A^T u = sigma C v with
u^T B u = v^T C v = 1. Triplets are computed from the symmetric augmented
pencil X z = sigma Y z with X = [[0, A], [A^T, 0]] and Y = diag(B, C): each
genuine triplet appears as a (+sigma, -sigma) mirrored pair, and |m - n|
spurious zero modes carry all their weight in only one block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparskit import (
    SolverError,
    SparseMat,
    b_orthonormalize,
    dense_sym_generalized_eig,
    spmv,
)

# Y-normalized genuine blocks have norm 1/sqrt(2); spurious modes put (almost)
# everything in one block. Anything below this block norm counts as spurious.
SPURIOUS_BLOCK_TOL = 0.1


@dataclass
class TripletSet:
    """Approximate triplets, columns aligned with sigmas.

    Ordered descending for dominant mode, ascending for minimal. For symmetric
    problems v aliases u and sigmas are eigenvalues.
    """

    sigmas: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def n_b(self) -> int:
        return len(self.sigmas)

    def copy(self) -> "TripletSet":
        if self.v is self.u:
            u = self.u.copy()
            return TripletSet(self.sigmas.copy(), u, u)
        return TripletSet(self.sigmas.copy(), self.u.copy(), self.v.copy())


def rayleigh_quotient(A: SparseMat, B: SparseMat, C: SparseMat,
                      u: np.ndarray, v: np.ndarray) -> float:
    """u^T A v / sqrt(u^T B u * v^T C v)."""
    bu = float(u @ spmv(B, u))
    cv = float(v @ spmv(C, v))
    if bu <= 0.0 or cv <= 0.0:
        raise ValueError("rayleigh_quotient: zero or indefinite norm")
    return float(u @ spmv(A, v)) / np.sqrt(bu * cv)


def _canonical_signs(u: np.ndarray, v: np.ndarray, av: np.ndarray):
    """Flip u so its largest-magnitude entry is positive, then v to keep
    u^T A v >= 0. av must hold A @ v for the incoming v."""
    if u[np.argmax(np.abs(u))] < 0.0:
        u = -u
    if float(u @ av) < 0.0:
        v = -v
    return u, v


def augmented_eigenpairs(Ad: np.ndarray, Bd: np.ndarray, Cd: np.ndarray):
    """Full spectrum of the augmented pencil for dense blocks.

    Returns (values ascending, u-blocks as columns, v-blocks as columns) with
    Y-normalized eigenvectors.
    """
    Ad = np.asarray(Ad, dtype=np.float64)
    m, n = Ad.shape
    X = np.zeros((m + n, m + n))
    X[:m, m:] = Ad
    X[m:, :m] = Ad.T
    Y = np.zeros((m + n, m + n))
    Y[:m, :m] = Bd
    Y[m:, m:] = Cd
    vals, vecs = dense_sym_generalized_eig(X, Y)
    return vals, vecs[:m, :], vecs[m:, :]


def _select_from_blocks(vals, ublk, vblk, Bd, Cd, n_b, mode, Ad):
    """Filter the augmented spectrum down to n_b genuine triplets.

    Keeps sigma >= 0, drops spurious modes by block norm, rescales each pair to
    unit B/C norms, applies the sign convention, and returns the n_b largest
    (dominant) or smallest (minimal) surviving triplets in mode order.
    """
    sigmas, us, vs = [], [], []
    for k in range(len(vals)):
        if vals[k] < 0.0:
            continue
        u = ublk[:, k]
        v = vblk[:, k]
        nb = np.sqrt(max(float(u @ (Bd @ u)), 0.0))
        nc = np.sqrt(max(float(v @ (Cd @ v)), 0.0))
        if min(nb, nc) < SPURIOUS_BLOCK_TOL:
            continue
        u = u / nb
        v = v / nc
        u, v = _canonical_signs(u, v, Ad @ v)
        sigmas.append(float(vals[k]))
        us.append(u)
        vs.append(v)
    if len(sigmas) < n_b:
        raise SolverError(
            f"coarsest level supports only {len(sigmas)} triplets, {n_b} requested; "
            "use a larger coarsest level or smaller n_b")
    order = np.argsort(sigmas, kind="stable")
    if mode == "dominant":
        order = order[::-1]
    pick = order[:n_b]
    return TripletSet(sigmas=np.array([sigmas[k] for k in pick]),
                      u=np.column_stack([us[k] for k in pick]),
                      v=np.column_stack([vs[k] for k in pick]))


def coarsest_gsvd(A: SparseMat, B: SparseMat, C: SparseMat, n_b: int, mode: str) -> TripletSet:
    """Direct generalized SVD of the (small) coarsest-level operators."""
    Ad, Bd, Cd = A.to_dense(), B.to_dense(), C.to_dense()
    vals, ublk, vblk = augmented_eigenpairs(Ad, Bd, Cd)
    return _select_from_blocks(vals, ublk, vblk, Bd, Cd, n_b, mode, Ad)


def coarsest_eigenpairs(A: SparseMat, B: SparseMat, n_b: int, mode: str) -> TripletSet:
    """Direct solve of the symmetric pencil A x = lambda B x; v aliases u."""
    Ad, Bd = A.to_dense(), B.to_dense()
    vals, vecs = dense_sym_generalized_eig(Ad, Bd)
    if len(vals) < n_b:
        raise SolverError(
            f"coarsest level supports only {len(vals)} eigenpairs, {n_b} requested")
    idx = np.arange(len(vals))[::-1][:n_b] if mode == "dominant" else np.arange(n_b)
    sig = vals[idx].astype(np.float64)
    X = vecs[:, idx]
    cols = []
    for k in range(n_b):
        x = X[:, k]
        x = x / np.sqrt(float(x @ (Bd @ x)))
        if x[np.argmax(np.abs(x))] < 0.0:
            x = -x
        cols.append(x)
    u = np.column_stack(cols)
    return TripletSet(sigmas=sig, u=u, v=u)


def ritz_projection(A: SparseMat, B: SparseMat, C: SparseMat,
                    trip: TripletSet, mode: str) -> TripletSet:
    """Collective Ritz refinement of all triplets on their current subspaces.

    B/C-orthonormalizes the u- and v-blocks, solves the projected augmented
    pencil of size 2 n_b, and maps the selected triplets back.
    """
    n_b = trip.n_b
    uhat = b_orthonormalize(trip.u, B)
    vhat = b_orthonormalize(trip.v, C)
    if uhat.shape[1] < n_b or vhat.shape[1] < n_b:
        raise SolverError(
            f"rank loss in Ritz orthogonalization ({uhat.shape[1]}/{vhat.shape[1]} of {n_b})")
    av = A.csr @ vhat
    ga = uhat.T @ av                       # n_b x n_b
    gb = uhat.T @ (B.csr @ uhat)
    gc = vhat.T @ (C.csr @ vhat)
    vals, yblk, zblk = augmented_eigenpairs(ga, gb, gc)
    small = _select_from_blocks(vals, yblk, zblk, gb, gc, n_b, mode, ga)
    u = uhat @ small.u
    v = vhat @ small.v
    cols_u, cols_v = [], []
    for k in range(n_b):
        uk = u[:, k] / np.sqrt(float(u[:, k] @ spmv(B, u[:, k])))
        vk = v[:, k] / np.sqrt(float(v[:, k] @ spmv(C, v[:, k])))
        uk, vk = _canonical_signs(uk, vk, spmv(A, vk))
        cols_u.append(uk)
        cols_v.append(vk)
    return TripletSet(sigmas=small.sigmas.copy(),
                      u=np.column_stack(cols_u), v=np.column_stack(cols_v))


def ritz_projection_sym(A: SparseMat, B: SparseMat, trip: TripletSet, mode: str) -> TripletSet:
    """Symmetric-kind Ritz refinement: n_b x n_b pencil on the B-orthonormal span."""
    n_b = trip.n_b
    uhat = b_orthonormalize(trip.u, B)
    if uhat.shape[1] < n_b:
        raise SolverError(
            f"rank loss in Ritz orthogonalization ({uhat.shape[1]} of {n_b})")
    ga = uhat.T @ (A.csr @ uhat)
    ga = 0.5 * (ga + ga.T)
    gb = uhat.T @ (B.csr @ uhat)
    vals, vecs = dense_sym_generalized_eig(ga, gb)
    idx = np.arange(n_b)[::-1] if mode == "dominant" else np.arange(n_b)
    cols = []
    for k in idx:
        x = uhat @ vecs[:, k]
        x = x / np.sqrt(float(x @ spmv(B, x)))
        if x[np.argmax(np.abs(x))] < 0.0:
            x = -x
        cols.append(x)
    u = np.column_stack(cols)
    return TripletSet(sigmas=vals[idx].astype(np.float64), u=u, v=u)


def gsvd_reconstruct_check(A: SparseMat, B: SparseMat, C: SparseMat, trip: TripletSet):
    """Residual metrics of a full triplet set.

    Returns (relative reconstruction error of B U Sigma V^T C against A,
    max-norm of U^T B U - I, max-norm of V^T C V - I). The reconstruction is
    exact only when trip carries all min(m, n) triplets.
    """
    Ad = A.to_dense()
    bu = B.csr @ trip.u
    cv = C.csr @ trip.v
    recon = (bu * trip.sigmas) @ cv.T
    denom = max(np.linalg.norm(Ad), np.finfo(float).tiny)
    recon_err = float(np.linalg.norm(recon - Ad) / denom)
    orth_u = float(np.abs(trip.u.T @ bu - np.eye(trip.n_b)).max())
    orth_v = float(np.abs(trip.v.T @ cv - np.eye(trip.n_b)).max())
    return recon_err, orth_u, orth_v
