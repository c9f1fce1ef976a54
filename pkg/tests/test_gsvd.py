"""Generalized SVD, Rayleigh quotient, and Ritz projection tests."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from svdamg.gsvd import (
    TripletSet,
    augmented_eigenpairs,
    coarsest_eigenpairs,
    coarsest_gsvd,
    gsvd_reconstruct_check,
    rayleigh_quotient,
    ritz_projection,
    ritz_projection_sym,
)
from svdamg.sparskit import SolverError, SparseMat, dense_svd

from conftest import rand_sparse, rand_spd


class TestRayleighQuotient:
    def test_diagonal_pick(self):
        A = SparseMat(np.diag([5.0, 1.0]))
        I = SparseMat.eye(2)
        e1 = np.array([1.0, 0.0])
        assert rayleigh_quotient(A, I, I, e1, e1) == pytest.approx(5.0)

    def test_scale_invariant(self, rng):
        A = rand_sparse(rng, 4, 3)
        B, C = rand_spd(rng, 4), rand_spd(rng, 3)
        u, v = rng.standard_normal(4), rng.standard_normal(3)
        base = rayleigh_quotient(A, B, C, u, v)
        assert rayleigh_quotient(A, B, C, 3.7 * u, v) == pytest.approx(base, rel=1e-13)

    def test_hand_1x1(self):
        A = SparseMat(np.array([[2.0]]))
        B = SparseMat(np.array([[4.0]]))
        C = SparseMat(np.array([[1.0]]))
        val = rayleigh_quotient(A, B, C, np.array([0.5]), np.array([1.0]))
        assert val == pytest.approx(1.0)

    def test_zero_norm_rejected(self):
        A = SparseMat.eye(2)
        with pytest.raises(ValueError):
            rayleigh_quotient(A, A, A, np.zeros(2), np.ones(2))


class TestAugmentedEigenpairs:
    def test_mirrored_pairs_square(self, rng):
        Ad = rng.standard_normal((4, 4))
        Bd, Cd = np.eye(4), np.eye(4)
        vals, ublk, vblk = augmented_eigenpairs(Ad, Bd, Cd)
        assert len(vals) == 8
        assert np.all(np.diff(vals) >= -1e-12)
        # m = n: the spectrum is symmetric about zero.
        assert np.allclose(vals, -vals[::-1], atol=1e-10)

    def test_block_norms_are_half(self, rng):
        Ad = rng.standard_normal((3, 3))
        Bd, Cd = np.eye(3), np.eye(3)
        vals, ublk, vblk = augmented_eigenpairs(Ad, Bd, Cd)
        for j in range(len(vals)):
            bu = ublk[:, j] @ Bd @ ublk[:, j]
            cv = vblk[:, j] @ Cd @ vblk[:, j]
            assert bu + cv == pytest.approx(1.0, abs=1e-10)
            if abs(vals[j]) > 1e-8:
                assert bu == pytest.approx(0.5, abs=1e-8)

    def test_rectangular_spurious_count(self, rng):
        m, n = 5, 2
        Ad = rng.standard_normal((m, n))
        vals, ublk, vblk = augmented_eigenpairs(Ad, np.eye(m), np.eye(n))
        spurious = 0
        for j in range(len(vals)):
            bu = np.sqrt(ublk[:, j] @ ublk[:, j])
            cv = np.sqrt(vblk[:, j] @ vblk[:, j])
            if min(bu, cv) < 0.1:
                spurious += 1
        assert spurious == m - n


class TestCoarsestGsvd:
    def test_diagonal_identity_case(self):
        A = SparseMat(np.diag([3.0, 1.0]))
        I = SparseMat.eye(2)
        trip = coarsest_gsvd(A, I, I, 2, "dominant")
        assert np.allclose(trip.sigmas, [3.0, 1.0], atol=1e-12)
        assert np.allclose(np.abs(trip.u), np.eye(2), atol=1e-10)
        assert np.allclose(np.abs(trip.v), np.eye(2), atol=1e-10)

    def test_hand_1x1_weighted(self):
        A = SparseMat(np.array([[2.0]]))
        B = SparseMat(np.array([[4.0]]))
        C = SparseMat(np.array([[1.0]]))
        trip = coarsest_gsvd(A, B, C, 1, "dominant")
        assert trip.sigmas[0] == pytest.approx(1.0)
        assert abs(trip.u[0, 0]) == pytest.approx(0.5)
        assert abs(trip.v[0, 0]) == pytest.approx(1.0)

    def test_tall_column_discards_spurious(self):
        A = SparseMat(np.array([[1.0], [0.0]]))
        trip = coarsest_gsvd(A, SparseMat.eye(2), SparseMat.eye(1), 1, "dominant")
        assert trip.sigmas[0] == pytest.approx(1.0)
        assert np.allclose(np.abs(trip.u[:, 0]), [1.0, 0.0], atol=1e-10)
        assert abs(trip.v[0, 0]) == pytest.approx(1.0)

    def test_normalization_and_sign(self, rng):
        A = rand_sparse(rng, 6, 4)
        B, C = rand_spd(rng, 6), rand_spd(rng, 4)
        trip = coarsest_gsvd(A, B, C, 4, "dominant")
        for j in range(4):
            u, v = trip.u[:, j], trip.v[:, j]
            assert u @ B.to_dense() @ u == pytest.approx(1.0, abs=1e-10)
            assert v @ C.to_dense() @ v == pytest.approx(1.0, abs=1e-10)
            assert u[np.argmax(np.abs(u))] > 0
            assert u @ A.to_dense() @ v >= -1e-12

    def test_triplet_residuals_small(self, rng):
        A = rand_sparse(rng, 7, 5)
        B, C = rand_spd(rng, 7), rand_spd(rng, 5)
        trip = coarsest_gsvd(A, B, C, 5, "minimal")
        Ad, Bd, Cd = A.to_dense(), B.to_dense(), C.to_dense()
        for j in range(5):
            s, u, v = trip.sigmas[j], trip.u[:, j], trip.v[:, j]
            r = np.linalg.norm(Ad @ v - s * Bd @ u)
            t = np.linalg.norm(Ad.T @ u - s * Cd @ v)
            assert r + t <= 1e-9 * A.frob_norm

    def test_mode_ordering(self, rng):
        A = rand_sparse(rng, 6, 6)
        B, C = rand_spd(rng, 6), rand_spd(rng, 6)
        dom = coarsest_gsvd(A, B, C, 3, "dominant")
        mnl = coarsest_gsvd(A, B, C, 3, "minimal")
        assert np.all(np.diff(dom.sigmas) <= 1e-12)
        assert np.all(np.diff(mnl.sigmas) >= -1e-12)
        assert mnl.sigmas[0] <= dom.sigmas[-1] + 1e-12

    def test_matches_dense_svd_identity_weights(self, rng):
        A = rand_sparse(rng, 10, 7, density=0.6)
        trip = coarsest_gsvd(A, SparseMat.eye(10), SparseMat.eye(7), 7, "dominant")
        _, s, _ = dense_svd(A.to_dense())
        assert np.allclose(trip.sigmas, s, atol=1e-10)

    def test_too_few_triplets_rejected(self):
        A = SparseMat(np.array([[1.0], [0.0]]))
        with pytest.raises(SolverError):
            coarsest_gsvd(A, SparseMat.eye(2), SparseMat.eye(1), 2, "dominant")


class TestCoarsestEigenpairs:
    def test_diagonal_spectrum(self):
        A = SparseMat(np.diag([4.0, -1.0, 2.0]))
        trip = coarsest_eigenpairs(A, SparseMat.eye(3), 2, "minimal")
        assert np.allclose(trip.sigmas, [-1.0, 2.0], atol=1e-12)
        assert trip.v is trip.u

    def test_weighted_pencil(self):
        # A u = lambda B u with A = diag(2, 8), B = diag(1, 4): lambdas (2, 2).
        A = SparseMat(np.diag([2.0, 8.0]))
        B = SparseMat(np.diag([1.0, 4.0]))
        trip = coarsest_eigenpairs(A, B, 2, "dominant")
        assert np.allclose(trip.sigmas, [2.0, 2.0], atol=1e-12)


class TestGsvdReconstruct:
    def test_exact_identity_case(self):
        A = SparseMat(np.diag([3.0, 1.0]))
        I = SparseMat.eye(2)
        trip = coarsest_gsvd(A, I, I, 2, "dominant")
        recon, orth_u, orth_v = gsvd_reconstruct_check(A, I, I, trip)
        assert recon <= 1e-12
        assert orth_u <= 1e-12 and orth_v <= 1e-12

    def test_roundtrip_weighted(self, rng):
        A = rand_sparse(rng, 8, 5, density=0.7)
        B, C = rand_spd(rng, 8), rand_spd(rng, 5)
        trip = coarsest_gsvd(A, B, C, 5, "dominant")
        recon, orth_u, orth_v = gsvd_reconstruct_check(A, B, C, trip)
        assert recon <= 1e-9
        assert orth_u <= 1e-9 and orth_v <= 1e-9

    def test_perturbation_detected(self, rng):
        A = rand_sparse(rng, 8, 5, density=0.7)
        B, C = rand_spd(rng, 8), rand_spd(rng, 5)
        trip = coarsest_gsvd(A, B, C, 5, "dominant")
        bad = TripletSet(trip.sigmas.copy(), trip.u, trip.v)
        bad.sigmas[0] += 1e-3
        assert gsvd_reconstruct_check(A, B, C, bad)[0] >= 1e-4

    def test_dimension_mismatch(self):
        A = SparseMat.eye(3)
        trip = coarsest_gsvd(A, SparseMat.eye(3), SparseMat.eye(3), 3, "dominant")
        with pytest.raises(ValueError):
            gsvd_reconstruct_check(SparseMat.eye(4), SparseMat.eye(4),
                                   SparseMat.eye(4), trip)


class TestRitzProjection:
    def test_fixed_point_on_invariant_span(self):
        A = SparseMat(np.diag([3.0, 2.0, 1.0]))
        I = SparseMat.eye(3)
        trip = TripletSet(np.array([2.9, 2.1]),
                          np.eye(3)[:, :2].copy(), np.eye(3)[:, :2].copy())
        out = ritz_projection(A, I, I, trip, "dominant")
        assert np.allclose(out.sigmas, [3.0, 2.0], atol=1e-12)

    def test_single_vector_reduces_to_rayleigh(self, rng):
        A = rand_sparse(rng, 5, 4)
        B, C = rand_spd(rng, 5), rand_spd(rng, 4)
        u = rng.standard_normal(5)
        v = rng.standard_normal(4)
        trip = TripletSet(np.array([1.0]), u[:, None].copy(), v[:, None].copy())
        out = ritz_projection(A, B, C, trip, "dominant")
        rq = rayleigh_quotient(A, B, C, u, v)
        assert out.sigmas[0] == pytest.approx(abs(rq), abs=1e-10)

    def test_output_orthonormal(self, rng):
        A = rand_sparse(rng, 8, 6)
        B, C = rand_spd(rng, 8), rand_spd(rng, 6)
        trip = TripletSet(np.ones(3), rng.standard_normal((8, 3)),
                          rng.standard_normal((6, 3)))
        out = ritz_projection(A, B, C, trip, "dominant")
        gu = out.u.T @ B.to_dense() @ out.u
        gv = out.v.T @ C.to_dense() @ out.v
        assert np.max(np.abs(gu - np.eye(3))) <= 1e-10
        assert np.max(np.abs(gv - np.eye(3))) <= 1e-10

    def test_exact_on_full_space(self, rng):
        # A full-dimensional Ritz space recovers the true triplets.
        A = rand_sparse(rng, 4, 4, density=0.8)
        B, C = rand_spd(rng, 4), rand_spd(rng, 4)
        exact = coarsest_gsvd(A, B, C, 4, "minimal")
        trip = TripletSet(np.ones(4), rng.standard_normal((4, 4)),
                          rng.standard_normal((4, 4)))
        out = ritz_projection(A, B, C, trip, "minimal")
        assert np.allclose(out.sigmas, exact.sigmas, atol=1e-9)

    def test_rank_loss_rejected(self, rng):
        A = rand_sparse(rng, 5, 5)
        B, C = rand_spd(rng, 5), rand_spd(rng, 5)
        u = rng.standard_normal(5)
        U = np.column_stack([u, 2.0 * u])
        trip = TripletSet(np.ones(2), U, rng.standard_normal((5, 2)))
        with pytest.raises(SolverError):
            ritz_projection(A, B, C, trip, "dominant")

    def test_symmetric_variant_fixed_point(self):
        A = SparseMat(np.diag([-2.0, 1.0, 5.0]))
        I = SparseMat.eye(3)
        trip = TripletSet(np.array([-1.9, 1.2]),
                          np.eye(3)[:, :2].copy(), np.eye(3)[:, :2].copy())
        out = ritz_projection_sym(A, I, trip, "minimal")
        assert np.allclose(out.sigmas, [-2.0, 1.0], atol=1e-12)
        assert out.v is out.u


@given(st.integers(0, 2**31 - 1))
def test_gsvd_matches_whitened_svd(seed):
    # Triplets of (A, B, C) map to the plain SVD of B^{-1/2} A C^{-1/2}.
    rng = np.random.default_rng(seed)
    m, n = 6, 4
    A = rand_sparse(rng, m, n, density=0.7)
    B, C = rand_spd(rng, m), rand_spd(rng, n)
    trip = coarsest_gsvd(A, B, C, n, "dominant")

    def inv_sqrt(Md):
        w, Q = np.linalg.eigh(Md)
        return Q @ np.diag(1.0 / np.sqrt(w)) @ Q.T

    W = inv_sqrt(B.to_dense()) @ A.to_dense() @ inv_sqrt(C.to_dense())
    ref = np.linalg.svd(W, compute_uv=False)
    assert np.allclose(trip.sigmas, ref[:n], atol=1e-9)
