"""Command-line front end: build or load a matrix, run the solver, report.

The report (matrix summary, hierarchy shapes, phase timings, final triplet
table) goes to stdout. With --out the per-cycle convergence history is written
as CSV; --out - sends the CSV to stdout and the report to stderr instead.
Reruns with identical arguments produce byte-identical CSV output. The
SVDAMG_SEED environment variable overrides --seed when set.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .cycles import ConvergenceLog, SolverConfig, solve
from .problems import (
    ProblemSpec,
    fd_eigenvalues,
    grid_incidence_singular_values,
    load_problem,
)
from .sparskit import SolverError

DEFAULT_KINDS = {"fd": "symmetric", "graph": "symmetric", "incidence": "rectangular"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="svdamg",
        description="Multilevel bootstrap solver for extremal singular triplets of "
                    "sparse matrices and extremal eigenpairs of symmetric matrices.")
    src = p.add_argument_group("problem selection")
    src.add_argument("--problem", choices=("fd", "graph", "incidence"),
                     help="built-in problem generator")
    src.add_argument("--matrix", metavar="PATH",
                     help="coordinate Matrix Market file to load instead")
    src.add_argument("--k", type=int, default=32,
                     help="grid parameter for fd/incidence (default 32)")
    src.add_argument("--n", type=int, default=1024,
                     help="vertex count for the graph problem (default 1024)")

    run = p.add_argument_group("solver parameters")
    run.add_argument("--mode", choices=("dominant", "minimal"), default="dominant",
                     help="which end of the spectrum to target (default dominant)")
    run.add_argument("--kind", choices=("rectangular", "square", "symmetric"),
                     help="matrix kind; defaults to the problem's natural kind, "
                          "rectangular for --matrix")
    run.add_argument("--nb", type=int, default=8,
                     help="number of triplets to compute (default 8)")
    run.add_argument("--nt", type=int, default=5,
                     help="number of test vectors (default 5)")
    run.add_argument("--theta", type=float, default=0.05,
                     help="coarsening strength threshold (default 0.05)")
    run.add_argument("--mu-t", type=int, default=4,
                     help="test-vector relaxation sweeps per level (default 4)")
    run.add_argument("--mu-b", type=int, default=4,
                     help="boot-triplet relaxation sweeps per level (default 4)")
    run.add_argument("--mu-tj", type=int, default=1,
                     help="inner solver steps per test half-step (default 1)")
    run.add_argument("--mu-bj", type=int, default=1,
                     help="inner solver steps per boot block (default 1)")
    run.add_argument("--omega-j", type=float, default=0.7,
                     help="Jacobi damping factor (default 0.7)")
    run.add_argument("--mult", type=int, default=10,
                     help="multiplicative setup cycles (default 10)")
    run.add_argument("--add", type=int, default=30,
                     help="additive correction sweeps (default 30)")
    run.add_argument("--coarsest-max", type=int, default=100,
                     help="largest dimension allowed on the coarsest level (default 100)")
    run.add_argument("--seed", type=int, default=0,
                     help="random seed for test vectors (default 0)")
    run.add_argument("--shift", type=float, default=0.0,
                     help="diagonal shift added to symmetric matrices (default 0)")
    run.add_argument("--refit-tol", type=float, default=0.0,
                     help="enable hierarchy refits once a triplet's residual sum "
                          "drops below this multiple of ||A||_F (default off)")
    run.add_argument("--downweight", type=float, default=1000.0,
                     help="weight divisor for converged vectors in refits (default 1000)")
    run.add_argument("--no-setup-ritz", action="store_true",
                     help="skip the Ritz projection at the end of setup cycles")
    run.add_argument("--rerandomize-tests", action="store_true",
                     help="draw fresh test vectors before every setup cycle")

    out = p.add_argument_group("execution and output")
    out.add_argument("--threads", type=int, default=1,
                     help="worker threads for additive V-cycles (default 1)")
    out.add_argument("--out", metavar="PATH",
                     help="write per-cycle CSV history to PATH, or - for stdout")
    out.add_argument("--reference", metavar="ANALYTIC|PATH",
                     help="'analytic' for the closed-form values (fd/incidence), or a "
                          "file of reference values in mode order, one per line")
    return p


def _resolve_seed(args) -> int:
    env = os.environ.get("SVDAMG_SEED")
    if env is None:
        return args.seed
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"SVDAMG_SEED must be an integer, got {env!r}") from None


def _resolve_kind(args) -> str:
    if args.kind:
        return args.kind
    if args.problem:
        return DEFAULT_KINDS[args.problem]
    return "rectangular"


def _resolve_reference(args, cfg: SolverConfig):
    if args.reference is None:
        return None
    if args.reference.lower() == "analytic":
        if args.problem == "fd":
            return fd_eigenvalues(args.k, cfg.n_b, cfg.mode) + cfg.shift
        if args.problem == "incidence":
            return grid_incidence_singular_values(args.k, cfg.n_b, cfg.mode)
        raise ValueError("analytic reference is only available for --problem fd "
                         "and --problem incidence")
    vals = np.loadtxt(args.reference, dtype=float, ndmin=1)
    if vals.size < cfg.n_b:
        raise ValueError(f"reference file {args.reference} holds {vals.size} "
                         f"values, need {cfg.n_b}")
    return vals[:cfg.n_b]


def _label(args, seed: int) -> str:
    if args.matrix:
        return args.matrix
    if args.problem == "fd":
        return f"fd(k={args.k})"
    if args.problem == "graph":
        return f"graph(n={args.n}, seed={seed})"
    return f"incidence(k={args.k})"


def format_report(label: str, shape: tuple[int, int], nnz: int,
                  cfg: SolverConfig, log: ConvergenceLog) -> str:
    lines = [
        f"matrix: {label}  {shape[0]}x{shape[1]}  nnz {nnz}",
        f"config: mode={cfg.mode} kind={cfg.kind} n_b={cfg.n_b} n_t={cfg.n_t} "
        f"theta={cfg.theta:g} cycles={cfg.n_mult}+{cfg.n_add} seed={cfg.seed}",
    ]
    if log.level_shapes:
        lines.append("hierarchy: "
                     + " -> ".join(f"{m}x{n}" for m, n in log.level_shapes))
    mult_s = log.phase_seconds.get("mult", 0.0)
    add_s = log.phase_seconds.get("add", 0.0)
    lines.append(f"setup phase: {cfg.n_mult} cycles in {mult_s:.2f} s | "
                 f"additive phase: {cfg.n_add} sweeps in {add_s:.2f} s")
    lines.append(f"{'triplet':>7}  {'sigma':>22}  {'resid_u':>10}  "
                 f"{'resid_v':>10}  {'rel_error':>10}")
    for e in log.entries[-cfg.n_b:]:
        rel = "-" if e.rel_error is None else f"{e.rel_error:.4e}"
        lines.append(f"{e.triplet:>7}  {e.sigma:>22.15e}  {e.resid_u:>10.4e}  "
                     f"{e.resid_v:>10.4e}  {rel:>10}")
    return "\n".join(lines) + "\n"


def _run(args) -> None:
    if (args.problem is None) == (args.matrix is None):
        raise ValueError("give exactly one of --problem or --matrix")
    if args.threads < 1:
        raise ValueError("--threads must be at least 1")
    seed = _resolve_seed(args)
    cfg = SolverConfig(
        mode=args.mode, kind=_resolve_kind(args), n_b=args.nb, n_t=args.nt,
        theta=args.theta, mu_t=args.mu_t, mu_b=args.mu_b, mu_tj=args.mu_tj,
        mu_bj=args.mu_bj, omega_j=args.omega_j, n_mult=args.mult, n_add=args.add,
        coarsest_max=args.coarsest_max, seed=seed, shift=args.shift,
        ritz_in_setup=not args.no_setup_ritz, refit_tol=args.refit_tol,
        downweight=args.downweight, rerandomize_tests=args.rerandomize_tests)
    # The shift is applied inside the solver, not baked into the matrix.
    spec = ProblemSpec(problem=args.problem, path=args.matrix, k=args.k,
                       n=args.n, seed=seed, shift=0.0)
    A = load_problem(spec)
    reference = _resolve_reference(args, cfg)
    _, log = solve(A, cfg, reference=reference, threads=args.threads)
    report = format_report(_label(args, seed), (A.nrows, A.ncols), A.nnz, cfg, log)
    if args.out == "-":
        sys.stdout.write(log.to_csv())
        sys.stderr.write(report)
        return
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="") as fh:
            fh.write(log.to_csv())
    sys.stdout.write(report)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except (SolverError, ValueError, OSError) as exc:
        print(f"svdamg: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
