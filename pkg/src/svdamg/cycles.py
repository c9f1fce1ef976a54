"""Two-phase multilevel driver.

Multiplicative setup phase: seeded test vectors are relaxed level by level,
interpolation operators are least-squares fitted against them (and, from the
second cycle on, against the boot triplets), coarse operators are rebuilt, and
the coarsest level is solved directly; the boot triplets ride back up through
the interpolation with relaxation and a collective Ritz refinement at the top.

Additive phase: the hierarchy is frozen and each triplet is improved by
residual-correction V-cycles with its sigma held fixed, followed by a
collective Ritz projection of all triplets after every sweep.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .coarsen import KINDS, Splitting, analyze_level
from .gsvd import (
    TripletSet,
    coarsest_eigenpairs,
    coarsest_gsvd,
    rayleigh_quotient,
    ritz_projection,
    ritz_projection_sym,
)
from .interp import FitRequest, fit_interpolation, ls_weights
from .sparskit import (
    SolverError,
    SparseMat,
    kaczmarz_sweep,
    pseudo_solve_drop_smallest,
    spmv,
    transpose,
    triple_product,
    weighted_jacobi,
)

MODES = ("dominant", "minimal")

# A coarse level with more than this fraction of the fine size stalls coarsening.
STALL_RATIO = 0.8

# Relative-error trigger for refits when an analytic reference is available.
REFERENCE_REFIT_TRIGGER = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    """All solver parameters. Defaults follow the standard experiment setup."""

    mode: str = "dominant"
    kind: str = "rectangular"
    n_b: int = 8
    n_t: int = 5
    theta: float = 0.05
    mu_t: int = 4
    mu_b: int = 4
    mu_tj: int = 1
    mu_bj: int = 1
    omega_j: float = 0.7
    n_mult: int = 10
    n_add: int = 30
    coarsest_max: int = 100
    seed: int = 0
    shift: float = 0.0
    ritz_in_setup: bool = True
    refit_tol: float = 0.0
    downweight: float = 1000.0
    rerandomize_tests: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.omega_j <= 1.0:
            raise ValueError(f"omega_j must lie in (0, 1], got {self.omega_j}")
        if self.n_b < 1 or self.n_t < 1:
            raise ValueError("n_b and n_t must be at least 1")
        if min(self.mu_t, self.mu_b, self.mu_tj, self.mu_bj) < 0:
            raise ValueError("relaxation counts must be nonnegative")
        if self.n_mult < 0 or self.n_add < 0:
            raise ValueError("cycle counts must be nonnegative")
        if self.coarsest_max < 1:
            raise ValueError("coarsest_max must be at least 1")
        if self.refit_tol < 0.0:
            raise ValueError("refit_tol must be nonnegative")
        if self.downweight <= 0.0:
            raise ValueError("downweight must be positive")


@dataclass
class Level:
    """One hierarchy level. p/q/splits map to the next-coarser level and are
    absent on the coarsest. For symmetric kind c is b, q is p, at is a."""

    a: SparseMat
    b: SparseMat
    c: SparseMat
    at: SparseMat
    depth: int
    p: SparseMat | None = None
    q: SparseMat | None = None
    split_u: Splitting | None = None
    split_v: Splitting | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.a.nrows, self.a.ncols)


@dataclass
class Hierarchy:
    levels: list[Level]
    kind: str

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> Level:
        return self.levels[0]

    @property
    def coarsest(self) -> Level:
        return self.levels[-1]


@dataclass
class TestSet:
    """Seeded test vectors as columns; v aliases u for symmetric kind."""

    u: np.ndarray
    v: np.ndarray

    @property
    def n_t(self) -> int:
        return self.u.shape[1]


@dataclass(frozen=True)
class LogEntry:
    cycle: int
    phase: str            # "mult" or "add"
    triplet: int
    sigma: float
    resid_u: float
    resid_v: float
    rel_error: float | None


@dataclass
class ConvergenceLog:
    """Append-only per-cycle, per-triplet convergence records.

    phase_seconds and level_shapes are filled by solve() for reporting: wall
    time of each phase and the operator shapes of the frozen hierarchy.
    """

    entries: list[LogEntry] = field(default_factory=list)
    phase_seconds: dict[str, float] = field(default_factory=dict)
    level_shapes: list[tuple[int, int]] = field(default_factory=list)

    def record(self, cycle: int, phase: str, finest: Level, trip: TripletSet,
               reference=None) -> None:
        for j in range(trip.n_b):
            ru, rv = triplet_residuals(finest, float(trip.sigmas[j]),
                                       trip.u[:, j], trip.v[:, j])
            rel = None
            if reference is not None:
                ref = float(reference[j])
                rel = abs(float(trip.sigmas[j]) - ref) / abs(ref)
            self.entries.append(LogEntry(cycle, phase, j, float(trip.sigmas[j]),
                                         ru, rv, rel))

    def to_csv(self) -> str:
        lines = ["cycle,phase,triplet,sigma,resid_u,resid_v,rel_error"]
        for e in self.entries:
            rel = "" if e.rel_error is None else f"{e.rel_error:.17g}"
            lines.append(f"{e.cycle},{e.phase},{e.triplet},{e.sigma:.17g},"
                         f"{e.resid_u:.17g},{e.resid_v:.17g},{rel}")
        return "\n".join(lines) + "\n"


def triplet_residuals(level: Level, sigma: float, u: np.ndarray, v: np.ndarray):
    """(||A v - sigma B u||, ||A^T u - sigma C v||) on the given level."""
    ru = np.linalg.norm(spmv(level.a, v) - sigma * spmv(level.b, u))
    rv = np.linalg.norm(spmv(level.at, u) - sigma * spmv(level.c, v))
    return float(ru), float(rv)


def _normalized(x: np.ndarray, M: SparseMat, redraw_key, shape) -> np.ndarray:
    nrm = np.sqrt(float(x @ spmv(M, x)))
    if nrm == 0.0:
        # Degenerate draw: replace from a deterministically derived stream.
        rng = np.random.default_rng(redraw_key)
        x = rng.uniform(-1.0, 1.0, size=shape)
        nrm = np.sqrt(float(x @ spmv(M, x)))
    return x / nrm


def relax_test_vectors(level: Level, ts: TestSet, cfg: SolverConfig) -> TestSet:
    """mu_t power-method sweeps per test pair with inexact inner solves.

    Dominant mode: mu_tj damped-Jacobi steps on C vbar = A^T u, C-normalize,
    then on B ubar = A v, B-normalize. Minimal mode replaces the inner solver
    with Kaczmarz sweeps on A v = 0 and A^T u = 0.
    """
    sym = ts.v is ts.u
    minimal = cfg.mode == "minimal"
    m, n = level.shape
    if sym:
        u = ts.u.copy()
        for j in range(u.shape[1]):
            x = u[:, j]
            for _ in range(cfg.mu_t):
                if minimal:
                    x = kaczmarz_sweep(level.a, np.zeros(m), x, cfg.mu_tj)
                else:
                    x = weighted_jacobi(level.b, spmv(level.a, x), x,
                                        cfg.omega_j, cfg.mu_tj)
                x = _normalized(x, level.b, (cfg.seed, level.depth, j), m)
            u[:, j] = x
        return TestSet(u, u)
    u = ts.u.copy()
    v = ts.v.copy()
    for j in range(u.shape[1]):
        uj = u[:, j]
        vj = v[:, j]
        for _ in range(cfg.mu_t):
            if minimal:
                vj = kaczmarz_sweep(level.a, np.zeros(m), vj, cfg.mu_tj)
            else:
                vj = weighted_jacobi(level.c, spmv(level.at, uj), vj,
                                     cfg.omega_j, cfg.mu_tj)
            vj = _normalized(vj, level.c, (cfg.seed, level.depth, j, 1), n)
            if minimal:
                uj = kaczmarz_sweep(level.at, np.zeros(n), uj, cfg.mu_tj)
            else:
                uj = weighted_jacobi(level.b, spmv(level.a, vj), uj,
                                     cfg.omega_j, cfg.mu_tj)
            uj = _normalized(uj, level.b, (cfg.seed, level.depth, j, 0), m)
        u[:, j] = uj
        v[:, j] = vj
    return TestSet(u, v)


def _relax_pair(level: Level, sigma: float, u: np.ndarray, v: np.ndarray,
                kappa, tau, cfg: SolverConfig, update_sigma: bool):
    """mu_b outer block-GS sweeps on one triplet; see relax_boot_triplets."""
    sym = v is u
    minimal = cfg.mode == "minimal"
    m, n = level.shape
    kap = np.zeros(m) if kappa is None else kappa
    ta = np.zeros(n) if tau is None else tau
    shifted = None
    for _ in range(cfg.mu_b):
        if sym:
            if minimal:
                # One unknown block: the pencil itself is the Kaczmarz operator.
                if shifted is None or update_sigma:
                    shifted = SparseMat(level.a.csr - sigma * level.b.csr)
                u = kaczmarz_sweep(shifted, kap, u, 1)
            else:
                if sigma == 0.0:
                    raise SolverError("dominant relaxation requires a nonzero sigma")
                u = weighted_jacobi(level.b, (spmv(level.a, u) - kap) / sigma, u,
                                    cfg.omega_j, cfg.mu_bj)
            v = u
        elif minimal:
            u = kaczmarz_sweep(level.at, sigma * spmv(level.c, v) + ta, u, 1)
            v = kaczmarz_sweep(level.a, sigma * spmv(level.b, u) + kap, v, 1)
        else:
            if sigma == 0.0:
                raise SolverError("dominant relaxation requires a nonzero sigma")
            u = weighted_jacobi(level.b, (spmv(level.a, v) - kap) / sigma, u,
                                cfg.omega_j, cfg.mu_bj)
            v = weighted_jacobi(level.c, (spmv(level.at, u) - ta) / sigma, v,
                                cfg.omega_j, cfg.mu_bj)
        if update_sigma:
            s = rayleigh_quotient(level.a, level.b, level.c, u, v)
            if s < 0.0 and not sym:
                v = -v
                s = -s
            sigma = float(s)
    return sigma, u, v


def relax_boot_triplets(level: Level, trip: TripletSet, kappa, tau,
                        cfg: SolverConfig) -> TripletSet:
    """Relax every boot triplet with mu_b outer block-GS sweeps.

    kappa/tau are per-triplet right-hand-side columns for the additive phase;
    passing None means the setup phase (zero right-hand sides) where sigma_j
    is re-evaluated by the Rayleigh quotient after each outer sweep. In the
    additive phase sigma stays fixed. Dominant inner solves are mu_bj damped
    Jacobi steps on B u = (A v - kappa)/sigma then C v = (A^T u - tau)/sigma;
    minimal mode uses one Kaczmarz sweep per block on A^T u = sigma C v + tau
    then A v = sigma B u + kappa.
    """
    sym = trip.v is trip.u
    update_sigma = kappa is None and tau is None
    sigmas = trip.sigmas.copy()
    u = trip.u.copy()
    v = u if sym else trip.v.copy()
    for j in range(trip.n_b):
        kap = None if kappa is None else kappa[:, j]
        ta = None if tau is None else tau[:, j]
        uj = u[:, j]
        vj = uj if sym else v[:, j]
        sigmas[j], uj, vj = _relax_pair(level, float(sigmas[j]), uj, vj,
                                        kap, ta, cfg, update_sigma)
        u[:, j] = uj
        if not sym:
            v[:, j] = vj
    return TripletSet(sigmas, u, v)


def _inject_testset(ts: TestSet, split_u: Splitting, split_v: Splitting) -> TestSet:
    if ts.v is ts.u:
        u = ts.u[split_u.cpoints, :].copy()
        return TestSet(u, u)
    return TestSet(ts.u[split_u.cpoints, :].copy(), ts.v[split_v.cpoints, :].copy())


def _inject_triplets(trip: TripletSet, split_u: Splitting, split_v: Splitting) -> TripletSet:
    if trip.v is trip.u:
        u = trip.u[split_u.cpoints, :].copy()
        return TripletSet(trip.sigmas.copy(), u, u)
    return TripletSet(trip.sigmas.copy(), trip.u[split_u.cpoints, :].copy(),
                      trip.v[split_v.cpoints, :].copy())


def _fit_weights(level: Level, ts: TestSet, boot: TripletSet | None,
                 cfg: SolverConfig, refit_mask) -> np.ndarray:
    """Rayleigh-quotient weights for the combined [test, boot] fit block."""
    rq = np.array([rayleigh_quotient(level.a, level.b, level.c, ts.u[:, k], ts.v[:, k])
                   for k in range(ts.n_t)])
    rq = np.abs(rq)
    if boot is not None:
        sig = np.concatenate([rq, np.abs(boot.sigmas)])
    else:
        sig = rq
    mask = None
    if refit_mask is not None:
        if boot is None:
            raise SolverError("refit sweep requires boot triplets")
        mask = np.concatenate([np.ones(ts.n_t, dtype=bool), refit_mask])
    return ls_weights(sig, cfg.mode, mask, cfg.downweight)


def _build_next_level(level: Level, ts: TestSet, boot: TripletSet | None,
                      cfg: SolverConfig, refit_mask=None) -> Level | None:
    """Coarsen one level: fit P/Q, install them on `level`, return the bare
    next-coarser level. Returns None when coarsening stalls."""
    sym = cfg.kind == "symmetric"
    analysis = analyze_level(level.a, cfg.theta, cfg.kind)
    m, n = level.shape
    if (analysis.split_u.n_coarse > STALL_RATIO * m
            or analysis.split_v.n_coarse > STALL_RATIO * n):
        return None
    widest = max((len(analysis.pattern_p[int(i)]) for i in analysis.split_u.fpoints),
                 default=0)
    if not sym:
        widest = max(widest, max((len(analysis.pattern_q[int(i)])
                                  for i in analysis.split_v.fpoints), default=0))
    if widest > cfg.n_t + cfg.n_b:
        raise SolverError(
            f"interpolation stencil of size {widest} exceeds the {cfg.n_t + cfg.n_b} "
            f"fit vectors on level {level.depth}; restart with a larger n_t")

    weights = _fit_weights(level, ts, boot, cfg, refit_mask)
    fit_u = ts.u if boot is None else np.hstack([ts.u, boot.u])
    smooth_u = analysis.strength_u if cfg.mode == "minimal" else None
    p = fit_interpolation(FitRequest(
        pattern=analysis.pattern_p, splitting=analysis.split_u, fit_vectors=fit_u,
        coarse_values=fit_u[analysis.split_u.cpoints, :], weights=weights,
        smooth_operator=smooth_u, smooth_omega=cfg.omega_j))
    if sym:
        q = p
    else:
        fit_v = ts.v if boot is None else np.hstack([ts.v, boot.v])
        smooth_v = analysis.strength_v if cfg.mode == "minimal" else None
        q = fit_interpolation(FitRequest(
            pattern=analysis.pattern_q, splitting=analysis.split_v, fit_vectors=fit_v,
            coarse_values=fit_v[analysis.split_v.cpoints, :], weights=weights,
            smooth_operator=smooth_v, smooth_omega=cfg.omega_j))

    a_c = triple_product(p, level.a, q)
    b_c = triple_product(p, level.b, p)
    c_c = b_c if sym else triple_product(q, level.c, q)
    at_c = a_c if sym else transpose(a_c)
    level.p, level.q = p, q
    level.split_u, level.split_v = analysis.split_u, analysis.split_v
    return Level(a=a_c, b=b_c, c=c_c, at=at_c, depth=level.depth + 1)


def _downward_sweep(finest: Level, ts: TestSet, trip: TripletSet | None,
                    cfg: SolverConfig, refit_mask=None, trace=None):
    """Relax-fit-restrict from the finest level to the coarsest.

    Rebuilds the level list from the finest operators. The boot triplets (when
    given) are relaxed and injected downwards as working copies steering the
    fits; they are not returned. Returns (levels, ts per level).
    """
    levels = [Level(a=finest.a, b=finest.b, c=finest.c, at=finest.at, depth=0)]
    ts_list: list[TestSet] = []
    boot = None if trip is None else trip.copy()
    while max(levels[-1].shape) > cfg.coarsest_max:
        lvl = levels[-1]
        ts = relax_test_vectors(lvl, ts, cfg)
        if boot is not None:
            boot = relax_boot_triplets(lvl, boot, None, None, cfg)
        nxt = _build_next_level(lvl, ts, boot, cfg, refit_mask)
        if nxt is None:
            break
        if trace is not None:
            trace("coarsen", level=lvl.depth, fine_shape=lvl.shape, coarse_shape=nxt.shape)
        ts_list.append(ts)
        ts = _inject_testset(ts, lvl.split_u, lvl.split_v)
        if boot is not None:
            boot = _inject_triplets(boot, lvl.split_u, lvl.split_v)
        levels.append(nxt)
    ts_list.append(ts)
    return levels, ts_list


def multiplicative_cycle(h: Hierarchy, ts_list: list[TestSet], trip: TripletSet | None,
                         cfg: SolverConfig, first_cycle: bool, trace=None):
    """One setup V-cycle: downward relax/fit/restrict, direct coarsest solve,
    upward interpolate + relax with Rayleigh updates, optional Ritz at the top.

    Returns (new hierarchy, ts per level, boot triplets).
    """
    sym = cfg.kind == "symmetric"
    levels, ts_out = _downward_sweep(h.finest, ts_list[0],
                                     None if first_cycle else trip, cfg, trace=trace)
    coarsest = levels[-1]
    if sym:
        boot = coarsest_eigenpairs(coarsest.a, coarsest.b, cfg.n_b, cfg.mode)
    else:
        boot = coarsest_gsvd(coarsest.a, coarsest.b, coarsest.c, cfg.n_b, cfg.mode)
    if trace is not None:
        trace("coarsest_solve", level=coarsest.depth, sigmas=boot.sigmas.copy())
    for lvl in reversed(levels[:-1]):
        coarse = boot
        u = lvl.p.csr @ coarse.u
        v = u if sym else lvl.q.csr @ coarse.v
        boot = TripletSet(coarse.sigmas.copy(), u, v)
        if trace is not None:
            trace("interpolate", level=lvl.depth, trip=boot.copy(),
                  coarse=coarse.copy(), level_obj=lvl)
        boot = relax_boot_triplets(lvl, boot, None, None, cfg)
    if cfg.ritz_in_setup:
        top = levels[0]
        if sym:
            boot = ritz_projection_sym(top.a, top.b, boot, cfg.mode)
        else:
            boot = ritz_projection(top.a, top.b, top.c, boot, cfg.mode)
    return Hierarchy(levels, cfg.kind), ts_out, boot


def _vcycle_residual(level: Level, sigma: float, u, v, kap, ta):
    r = kap - (spmv(level.a, v) - sigma * spmv(level.b, u))
    s = ta - (spmv(level.at, u) - sigma * spmv(level.c, v))
    return r, s


def additive_vcycle(h: Hierarchy, j: int, sigma: float, u: np.ndarray,
                    v: np.ndarray, cfg: SolverConfig):
    """One correction V-cycle for triplet j with sigma held fixed.

    Downward: relax, restrict residuals (zero coarse initial guess). Coarsest:
    correction from the augmented-system pseudo-inverse that drops the
    smallest singular direction. Upward: add interpolated corrections, relax.
    """
    sym = h.kind == "symmetric"
    last = len(h.levels) - 1
    us = [u.copy()]
    vs = [us[0] if sym else v.copy()]
    kaps = [np.zeros(h.levels[0].a.nrows)]
    taus = [kaps[0] if sym else np.zeros(h.levels[0].a.ncols)]
    for ell in range(last):
        lvl = h.levels[ell]
        ucol = us[ell][:, None]
        one = TripletSet(np.array([sigma]), ucol,
                         ucol if sym else vs[ell][:, None])
        relaxed = relax_boot_triplets(lvl, one, kaps[ell][:, None], taus[ell][:, None], cfg)
        us[ell] = relaxed.u[:, 0]
        vs[ell] = us[ell] if sym else relaxed.v[:, 0]
        r, s = _vcycle_residual(lvl, sigma, us[ell], vs[ell], kaps[ell], taus[ell])
        kaps.append(spmv(lvl.p, r, transpose_flag=True))
        taus.append(kaps[-1] if sym else spmv(lvl.q, s, transpose_flag=True))
        nxt = h.levels[ell + 1]
        us.append(np.zeros(nxt.a.nrows))
        vs.append(us[-1] if sym else np.zeros(nxt.a.ncols))

    lvl = h.levels[last]
    r, s = _vcycle_residual(lvl, sigma, us[last], vs[last], kaps[last], taus[last])
    if sym:
        mat = lvl.a.to_dense() - sigma * lvl.b.to_dense()
        us[last] = us[last] + pseudo_solve_drop_smallest(mat, r)
        vs[last] = us[last]
    else:
        m, n = lvl.shape
        mat = np.zeros((m + n, m + n))
        mat[:m, :m] = -sigma * lvl.b.to_dense()
        mat[:m, m:] = lvl.a.to_dense()
        mat[m:, :m] = lvl.a.to_dense().T
        mat[m:, m:] = -sigma * lvl.c.to_dense()
        z = pseudo_solve_drop_smallest(mat, np.concatenate([r, s]))
        us[last] = us[last] + z[:m]
        vs[last] = vs[last] + z[m:]

    for ell in range(last - 1, -1, -1):
        lvl = h.levels[ell]
        us[ell] = us[ell] + spmv(lvl.p, us[ell + 1])
        vs[ell] = us[ell] if sym else vs[ell] + spmv(lvl.q, vs[ell + 1])
        ucol = us[ell][:, None]
        one = TripletSet(np.array([sigma]), ucol,
                         ucol if sym else vs[ell][:, None])
        relaxed = relax_boot_triplets(lvl, one, kaps[ell][:, None], taus[ell][:, None], cfg)
        us[ell] = relaxed.u[:, 0]
        vs[ell] = us[ell] if sym else relaxed.v[:, 0]
    return us[0], vs[0]


def additive_iteration(h: Hierarchy, trip: TripletSet, cfg: SolverConfig,
                       log: ConvergenceLog | None = None, cycle: int = 0,
                       reference=None, threads: int = 1) -> TripletSet:
    """One additive sweep: a V-cycle per triplet, then collective Ritz."""
    sym = h.kind == "symmetric"

    def work(j: int):
        return additive_vcycle(h, j, float(trip.sigmas[j]), trip.u[:, j],
                               trip.v[:, j], cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(trip.n_b)))
    else:
        results = [work(j) for j in range(trip.n_b)]
    u = np.column_stack([r[0] for r in results])
    v = u if sym else np.column_stack([r[1] for r in results])
    out = TripletSet(trip.sigmas.copy(), u, v)
    top = h.finest
    if sym:
        out = ritz_projection_sym(top.a, top.b, out, cfg.mode)
    else:
        out = ritz_projection(top.a, top.b, top.c, out, cfg.mode)
    if log is not None:
        log.record(cycle, "add", top, out, reference)
    return out


def refit_lagging(h: Hierarchy, trip: TripletSet, ts_list: list[TestSet],
                  cfg: SolverConfig, converged_mask) -> Hierarchy:
    """Rebuild the hierarchy with converged boot vectors and all test vectors
    downweighted in the fits (one downward setup sweep; triplets unchanged).

    ts_list is updated in place with the test vectors relaxed by the sweep.
    """
    mask = np.asarray(converged_mask, dtype=bool)
    if mask.shape != (trip.n_b,):
        raise ValueError("refit_lagging: converged_mask must have one flag per triplet")
    levels, ts_out = _downward_sweep(h.finest, ts_list[0], trip, cfg, refit_mask=mask)
    ts_list[:] = ts_out
    return Hierarchy(levels, cfg.kind)


def _draw_test_vectors(rng, level: Level, cfg: SolverConfig) -> TestSet:
    sym = cfg.kind == "symmetric"
    m, n = level.shape

    def draw(rows, M):
        cols = []
        for _ in range(cfg.n_t):
            x = rng.uniform(-1.0, 1.0, size=rows)
            nrm = np.sqrt(float(x @ spmv(M, x)))
            while nrm == 0.0:
                x = rng.uniform(-1.0, 1.0, size=rows)
                nrm = np.sqrt(float(x @ spmv(M, x)))
            cols.append(x / nrm)
        return np.column_stack(cols)

    u = draw(m, level.b)
    if sym:
        return TestSet(u, u)
    return TestSet(u, draw(n, level.c))


def _mode_sorted(trip: TripletSet, mode: str) -> TripletSet:
    order = np.argsort(trip.sigmas, kind="stable")
    if mode == "dominant":
        order = order[::-1]
    if np.array_equal(order, np.arange(trip.n_b)):
        return trip
    u = trip.u[:, order]
    v = u if trip.v is trip.u else trip.v[:, order]
    return TripletSet(trip.sigmas[order].copy(), u, v)


def solve(A, cfg: SolverConfig, reference=None, trace=None, threads: int = 1):
    """Run the full two-phase solver on A.

    reference, when given, must hold one analytic value per requested triplet
    in mode order; relative errors are then logged and refits (if enabled)
    trigger on the reference error instead of the residual. Returns
    (TripletSet, ConvergenceLog).
    """
    A = A if isinstance(A, SparseMat) else SparseMat(A)
    if cfg.n_mult < 1:
        raise ValueError("solve needs n_mult >= 1 to build a hierarchy")
    if reference is not None and len(reference) != cfg.n_b:
        raise ValueError("reference must hold one value per requested triplet")
    sym = cfg.kind == "symmetric"
    if cfg.kind in ("square", "symmetric") and A.nrows != A.ncols:
        raise ValueError(f"{cfg.kind} kind needs a square matrix, got {A.nrows}x{A.ncols}")
    if cfg.shift != 0.0:
        if not sym:
            raise ValueError("shift is only meaningful for symmetric kind")
        A = SparseMat(A.csr + cfg.shift * sp.eye(A.nrows, format="csr"))
    if sym:
        asym = SparseMat(A.csr - A.csr.T)
        tol = 1e-12 * max(np.abs(A.values).max(initial=0.0), np.finfo(float).tiny)
        if asym.nnz and np.abs(asym.values).max() > tol:
            raise ValueError("symmetric kind needs a symmetric matrix")

    at = A if sym else transpose(A)
    b = SparseMat.eye(A.nrows)
    c = b if sym else SparseMat.eye(A.ncols)
    finest = Level(a=A, b=b, c=c, at=at, depth=0)
    h = Hierarchy([finest], cfg.kind)

    rng = np.random.default_rng(cfg.seed)
    ts_list = [_draw_test_vectors(rng, finest, cfg)]
    log = ConvergenceLog()
    trip: TripletSet | None = None
    tic = time.perf_counter()
    for cyc in range(1, cfg.n_mult + 1):
        if cfg.rerandomize_tests and cyc > 1:
            ts_list[0] = _draw_test_vectors(rng, finest, cfg)
        h, ts_list, trip = multiplicative_cycle(h, ts_list, trip, cfg,
                                                first_cycle=(cyc == 1), trace=trace)
        log.record(cyc, "mult", h.finest, trip, reference)
    log.phase_seconds["mult"] = time.perf_counter() - tic
    log.level_shapes = [lvl.shape for lvl in h.levels]

    anorm = A.frob_norm
    converged = np.zeros(cfg.n_b, dtype=bool)
    tic = time.perf_counter()
    for cyc in range(1, cfg.n_add + 1):
        trip = additive_iteration(h, trip, cfg, log, cyc, reference, threads)
        if cfg.refit_tol > 0.0:
            mask = _converged_mask(h.finest, trip, cfg, anorm, reference)
            if np.any(mask & ~converged):
                h = refit_lagging(h, trip, ts_list, cfg, mask)
                converged = mask
    log.phase_seconds["add"] = time.perf_counter() - tic
    return _mode_sorted(trip, cfg.mode), log


def _converged_mask(finest: Level, trip: TripletSet, cfg: SolverConfig,
                    anorm: float, reference) -> np.ndarray:
    mask = np.zeros(trip.n_b, dtype=bool)
    for j in range(trip.n_b):
        if reference is not None:
            ref = float(reference[j])
            mask[j] = abs(float(trip.sigmas[j]) - ref) <= REFERENCE_REFIT_TRIGGER * abs(ref)
        else:
            ru, rv = triplet_residuals(finest, float(trip.sigmas[j]),
                                       trip.u[:, j], trip.v[:, j])
            mask[j] = (ru + rv) <= cfg.refit_tol * anorm
    return mask
