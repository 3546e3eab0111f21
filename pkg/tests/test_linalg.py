import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blo.errors import DivergenceError, NonPositiveCurvatureError
from blo.linalg import (LinearOperator, cg_solve, diagonal_operator,
                        gaussian_vector, identity_operator, matrix_operator,
                        neumann_apply, power_iteration_lmax)


def random_spd(dim, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eigs = rng.uniform(0.5, 5.0, size=dim)
    return q @ np.diag(eigs) @ q.T


class TestCgSolve:
    def test_identity(self):
        res = cg_solve(identity_operator(2), np.array([3.0, -1.0]), tol=1e-10)
        np.testing.assert_allclose(res.x, [3.0, -1.0])
        assert res.iterations == 1
        assert res.converged

    def test_diagonal(self):
        res = cg_solve(diagonal_operator(np.array([2.0, 4.0])), np.array([2.0, 4.0]))
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-9)
        assert res.iterations <= 2

    def test_zero_rhs(self):
        res = cg_solve(diagonal_operator(np.array([2.0, 4.0])), np.zeros(2))
        np.testing.assert_array_equal(res.x, np.zeros(2))
        assert res.iterations == 0
        assert res.converged

    def test_matches_dense_solve(self):
        a = random_spd(12, seed=3)
        b = np.random.default_rng(4).standard_normal(12)
        res = cg_solve(matrix_operator(a), b, tol=1e-12)
        np.testing.assert_allclose(res.x, np.linalg.solve(a, b), atol=1e-8)

    def test_indefinite_raises(self):
        op = diagonal_operator(np.array([1.0, -1.0]))
        with pytest.raises(NonPositiveCurvatureError):
            cg_solve(op, np.array([0.0, 1.0]))

    def test_exactly_singular_raises(self):
        op = diagonal_operator(np.array([1.0, 0.0]))
        with pytest.raises(NonPositiveCurvatureError):
            cg_solve(op, np.array([1.0, 1.0]))

    def test_max_iter_returns_unconverged(self):
        a = random_spd(30, seed=5)
        b = np.ones(30)
        res = cg_solve(matrix_operator(a), b, tol=1e-14, max_iter=2)
        assert not res.converged
        assert res.iterations == 2

    @settings(max_examples=25, deadline=None)
    @given(dim=st.integers(2, 50), seed=st.integers(0, 10_000))
    def test_pd_converges_within_dim_iterations(self, dim, seed):
        a = random_spd(dim, seed)
        b = np.random.default_rng(seed + 1).standard_normal(dim)
        res = cg_solve(matrix_operator(a), b, tol=1e-8)
        assert res.converged
        assert res.iterations <= dim


class TestNeumannApply:
    def test_single_term_identity(self):
        out = neumann_apply(identity_operator(2), np.array([1.0, 0.0]), 1.0, 0)
        np.testing.assert_allclose(out, [1.0, 0.0])

    def test_two_terms_by_hand(self):
        # 0.5 * (1 + 0.5) * b
        out = neumann_apply(identity_operator(2), np.array([1.0, 0.0]), 0.5, 1)
        np.testing.assert_allclose(out, [0.75, 0.0])

    def test_series_limit_inverts_identity(self):
        out = neumann_apply(identity_operator(2), np.array([1.0, 0.0]), 0.5, 50)
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-10)

    def test_telescoping(self):
        # M+1 terms == M terms + step * (I - step*A)^{M+1} b
        a = random_spd(6, seed=9)
        op = matrix_operator(a)
        b = np.random.default_rng(10).standard_normal(6)
        step = 0.9 / np.linalg.eigvalsh(a).max()
        for m in (0, 1, 5, 13):
            lhs = neumann_apply(op, b, step, m + 1)
            tail = np.linalg.matrix_power(np.eye(6) - step * a, m + 1) @ b
            rhs = neumann_apply(op, b, step, m) + step * tail
            np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(dim=st.integers(2, 20), seed=st.integers(0, 10_000))
    def test_agrees_with_cg_at_large_truncation(self, dim, seed):
        a = random_spd(dim, seed)
        op = matrix_operator(a)
        b = np.random.default_rng(seed + 1).standard_normal(dim)
        step = 0.9 / np.linalg.eigvalsh(a).max()
        ns = neumann_apply(op, b, step, 10_000)
        cg = cg_solve(op, b, tol=1e-12).x
        assert np.linalg.norm(ns - cg) <= 1e-6 * np.linalg.norm(b)

    def test_divergent_accumulation_raises(self):
        op = diagonal_operator(np.array([1.0]))
        with np.errstate(over="ignore"), pytest.raises(DivergenceError):
            neumann_apply(op, np.array([1.0]), 1e9, 400)

    def test_validation(self):
        op = identity_operator(1)
        with pytest.raises(ValueError):
            neumann_apply(op, np.ones(1), 0.0, 3)
        with pytest.raises(ValueError):
            neumann_apply(op, np.ones(1), 0.5, -1)


class TestPowerIteration:
    def test_identity(self):
        assert power_iteration_lmax(identity_operator(5)) == pytest.approx(1.0, abs=1e-8)

    def test_known_spectrum(self):
        op = diagonal_operator(np.array([1.0, 10.0]))
        assert power_iteration_lmax(op, iters=100) == pytest.approx(10.0, abs=1e-6)

    def test_zero_operator(self):
        op = LinearOperator(3, lambda v: np.zeros(3))
        assert power_iteration_lmax(op) == 0.0

    def test_matches_eigvalsh(self):
        # spectrum needs a genuine top gap for fast power convergence
        rng = np.random.default_rng(21)
        q, _ = np.linalg.qr(rng.standard_normal((20, 20)))
        a = q @ np.diag(np.concatenate([[8.0], rng.uniform(0.5, 5.0, 19)])) @ q.T
        est = power_iteration_lmax(matrix_operator(a), iters=500)
        assert est == pytest.approx(np.linalg.eigvalsh(a).max(), rel=1e-6)

    def test_deterministic(self):
        a = random_spd(8, seed=2)
        op = matrix_operator(a)
        assert power_iteration_lmax(op, seed=4) == power_iteration_lmax(op, seed=4)


class TestGaussianVector:
    def test_deterministic(self):
        np.testing.assert_array_equal(gaussian_vector(3, 7), gaussian_vector(3, 7))

    def test_mean_near_zero_at_scale(self):
        v = gaussian_vector(100_000, 1)
        assert abs(v.mean()) < 0.02

    def test_scalar_shape(self):
        v = gaussian_vector(1, 0)
        assert v.shape == (1,)
        assert np.isfinite(v[0])

    def test_dim_validation(self):
        with pytest.raises(ValueError):
            gaussian_vector(0, 0)


class TestOperators:
    def test_matrix_operator_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            matrix_operator(np.ones((2, 3)))

    def test_call_forwards_to_apply(self):
        op = diagonal_operator(np.array([2.0, 3.0]))
        np.testing.assert_allclose(op(np.ones(2)), [2.0, 3.0])
