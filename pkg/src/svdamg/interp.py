"""Least-squares fit of interpolation operators against test and boot vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coarsen import Splitting
from .sparskit import SolverError, SparseMat

# Rayleigh quotients below this fraction of the largest are clamped before
# turning them into fit weights.
RAYLEIGH_FLOOR = 1e-12

# Normal-equation ridge, relative to the mean diagonal of the Gram matrix.
REG_SCALE = 1e-12


@dataclass
class FitRequest:
    """Inputs for fitting one interpolation operator.

    fit_vectors holds the fine-level vectors as columns (m x n_f);
    coarse_values their coarse counterparts (n_c x n_f). When smooth_operator
    is set, fit_vectors get one damped-Jacobi sweep on N x = 0 applied to
    their F-point entries before fitting.
    """

    pattern: list[np.ndarray]
    splitting: Splitting
    fit_vectors: np.ndarray
    coarse_values: np.ndarray
    weights: np.ndarray
    smooth_operator: SparseMat | None = None
    smooth_omega: float = 0.7


def ls_weights(sigmas, mode: str, converged_mask=None, downweight: float = 1.0) -> np.ndarray:
    """Fit weights from Rayleigh quotients: sigma for dominant, 1/sigma for minimal.

    Values below RAYLEIGH_FLOOR times the largest are clamped first. Entries
    flagged in converged_mask are divided by downweight.
    """
    sig = np.asarray(sigmas, dtype=np.float64)
    mx = sig.max() if sig.size else 0.0
    if mx <= 0.0:
        w = np.ones_like(sig)
    else:
        sig = np.maximum(sig, RAYLEIGH_FLOOR * mx)
        w = sig if mode == "dominant" else 1.0 / sig
        w = w.copy()
    if converged_mask is not None:
        mask = np.asarray(converged_mask, dtype=bool)
        if mask.shape != w.shape:
            raise ValueError("ls_weights: converged_mask length mismatch")
        w[mask] /= downweight
    return w


def ibamg_fpoint_smooth(fit_vectors: np.ndarray, N: SparseMat, fpoints: np.ndarray,
                        omega: float) -> np.ndarray:
    """One damped-Jacobi sweep on N x = 0, replacing entries only at F-points."""
    X = np.asarray(fit_vectors, dtype=np.float64)
    if N.nrows != N.ncols or N.nrows != X.shape[0]:
        raise ValueError("ibamg_fpoint_smooth dimension mismatch")
    d = N.diagonal()
    if np.any(d == 0.0):
        raise ValueError("ibamg_fpoint_smooth: zero diagonal in smoothing operator")
    relaxed = X - omega * (N.csr @ X) / d[:, None]
    out = X.copy()
    out[fpoints] = relaxed[fpoints]
    return out


def fit_interpolation(req: FitRequest) -> SparseMat:
    """Fit one interpolation operator row by row.

    C-point rows carry a single unit entry. Each F-point row solves a weighted
    least-squares fit of the fine values against the coarse values on its
    pattern, through ridge-regularized normal equations.
    """
    split = req.splitting
    vecs = req.fit_vectors
    if req.smooth_operator is not None:
        vecs = ibamg_fpoint_smooth(vecs, req.smooth_operator, split.fpoints, req.smooth_omega)
    vecs = np.asarray(vecs, dtype=np.float64)
    coarse = np.asarray(req.coarse_values, dtype=np.float64)
    w = np.asarray(req.weights, dtype=np.float64)
    n_f = vecs.shape[1]
    if coarse.shape != (split.n_coarse, n_f) or w.shape != (n_f,):
        raise ValueError("fit_interpolation dimension mismatch")

    rows, cols, vals = [], [], []
    for c in split.cpoints:
        rows.append(int(c))
        cols.append(split.coarse_index[int(c)])
        vals.append(1.0)
    for i in split.fpoints:
        stencil = req.pattern[int(i)]
        M = coarse[stencil, :].T                     # n_f x n_ci
        f = vecs[int(i), :]
        Mw = M * w[:, None]
        G = M.T @ Mw
        reg = REG_SCALE * np.trace(G) / len(stencil)
        G[np.diag_indices_from(G)] += reg
        try:
            p = np.linalg.solve(G, Mw.T @ f)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"interpolation fit failed at F-point {int(i)}: {exc}")
        if not np.all(np.isfinite(p)):
            raise SolverError(f"interpolation fit produced non-finite weights at F-point {int(i)}")
        rows.extend([int(i)] * len(stencil))
        cols.extend(int(cc) for cc in stencil)
        vals.extend(p.tolist())
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(split.n, split.n_coarse))
    return SparseMat(mat)
