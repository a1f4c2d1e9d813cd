import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcplan.batch import (
    block_lanes,
    broadcast_block,
    cholesky_factor,
    cholesky_factor_scalar,
    cholesky_solve,
    cholesky_solve_scalar,
    damped_step,
    damped_step_scalar,
    lanes_from_env,
    make_block,
    select_mode,
)


def random_spd(rng, k, n, cond=1e3):
    A = np.empty((k, k, n))
    for i in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
        ev = np.exp(rng.uniform(0, math.log(cond), k))
        A[:, :, i] = (Q * ev) @ Q.T
    return A


class TestBlocks:
    def test_soa_layout(self):
        Q = make_block([np.arange(3.0), np.arange(3.0) + 10])
        assert Q.shape == (3, 2)
        assert Q.flags.c_contiguous
        np.testing.assert_array_equal(Q[1], [1, 11])
        np.testing.assert_array_equal(block_lanes(Q)[1], [10, 11, 12])

    def test_broadcast(self):
        Q = broadcast_block(np.array([1.0, 2.0]), 4)
        assert Q.shape == (2, 4) and np.all(Q[1] == 2)

    def test_lanes_env(self, monkeypatch):
        monkeypatch.delenv("MCPLAN_LANES", raising=False)
        assert lanes_from_env() == 8
        monkeypatch.setenv("MCPLAN_LANES", "16")
        assert lanes_from_env() == 16
        monkeypatch.setenv("MCPLAN_LANES", "3")
        with pytest.raises(ValueError):
            lanes_from_env()


class TestCholesky:
    def test_identity(self):
        for k in (1, 3, 6):
            L, bad = cholesky_factor(np.repeat(np.eye(k)[:, :, None], 4, axis=2))
            np.testing.assert_array_equal(L, np.repeat(np.eye(k)[:, :, None], 4, axis=2))
            assert not bad.any()

    def test_two_by_two(self):
        A = np.array([[4.0, 2.0], [2.0, 3.0]])[:, :, None]
        L, bad = cholesky_factor(A)
        np.testing.assert_allclose(L[:, :, 0], [[2, 0], [1, math.sqrt(2)]], atol=1e-15)
        # independent check: L L^T reproduces A
        np.testing.assert_allclose(L[:, :, 0] @ L[:, :, 0].T, A[:, :, 0], atol=1e-14)
        x = cholesky_solve(L, np.array([[2.0], [1.0]]))
        np.testing.assert_allclose(x[:, 0], np.linalg.inv(A[:, :, 0]) @ [2, 1], atol=1e-15)
        np.testing.assert_allclose(x[:, 0], [0.5, 0.0], atol=1e-15)

    def test_identity_solve(self, rng):
        v = rng.standard_normal((5, 3))
        L, _ = cholesky_factor(np.repeat(np.eye(5)[:, :, None], 3, axis=2))
        np.testing.assert_array_equal(cholesky_solve(L, v), v)

    def test_singular_lane_flagged(self, rng):
        A = random_spd(rng, 3, 8)
        A[:, :, 3] = 0.0
        A[0, 0, 3] = 1.0  # second pivot is zero
        L, bad = cholesky_factor(A)
        assert bad.tolist() == [i == 3 for i in range(8)]
        assert np.all(np.isfinite(L))
        for i in (0, 1, 7):
            np.testing.assert_allclose(L[:, :, i] @ L[:, :, i].T, A[:, :, i], atol=1e-9 * np.abs(A[:, :, i]).max())

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 6, 7])
    def test_residual_thousand_systems(self, k):
        rng = np.random.default_rng(k)
        A = random_spd(rng, k, 1000)
        b = rng.standard_normal((k, 1000))
        L, bad = cholesky_factor(A)
        assert not bad.any()
        x = cholesky_solve(L, b)
        r = np.einsum("ijn,jn->in", A, x) - b
        assert np.all(np.linalg.norm(r, axis=0) <= 1e-8 * np.linalg.norm(b, axis=0))
        LLt = np.einsum("ikn,jkn->ijn", L, L)
        assert np.all(np.abs(LLt - A).max(axis=(0, 1)) <= 1e-9 * np.abs(A).max(axis=(0, 1)))

    def test_identical_lanes_bitwise(self, rng):
        A = np.repeat(random_spd(rng, 4, 1), 8, axis=2)
        b = np.repeat(rng.standard_normal((4, 1)), 8, axis=1)
        L, _ = cholesky_factor(A)
        x = cholesky_solve(L, b)
        assert all(np.array_equal(x[:, 0], x[:, i]) for i in range(8))

    @given(st.integers(1, 7), st.integers(0, 10_000))
    def test_scalar_equivalence(self, k, seed):
        rng = np.random.default_rng(seed)
        A = random_spd(rng, k, 4)
        b = rng.standard_normal((k, 4))
        L, _ = cholesky_factor(A)
        x = cholesky_solve(L, b)
        for i in range(4):
            Ls, _ = cholesky_factor_scalar(A[:, :, i])
            np.testing.assert_allclose(L[:, :, i], Ls, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(x[:, i], cholesky_solve_scalar(Ls, b[:, i]), rtol=1e-12, atol=1e-12)


class TestDampedStep:
    def test_zero_residual(self, rng):
        J = rng.standard_normal((3, 7, 4))
        dq, _ = damped_step(J, np.zeros((3, 4)))
        np.testing.assert_array_equal(dq, 0)

    def test_scalar_least_squares(self):
        J = np.zeros((1, 5, 1))
        J[0, 2, 0] = 1.0
        dq, _ = damped_step(J, np.array([[0.7]]), lam=1e-14)
        np.testing.assert_allclose(dq[:, 0], [0, 0, 0.7, 0, 0], atol=1e-12)

    def test_inner_outer_against_pseudoinverse(self, rng):
        J = rng.standard_normal((3, 7, 16))
        r = rng.standard_normal((3, 16))
        lam = 1e-6
        inner, _ = damped_step(J, r, lam, 1.0, "inner")
        outer, _ = damped_step(J, r, lam, 1.0, "outer")
        for i in range(16):
            Ji = J[:, :, i]
            oracle = Ji.T @ np.linalg.solve(Ji @ Ji.T + lam * np.eye(3), r[:, i])
            for dq in (inner, outer):
                assert np.linalg.norm(dq[:, i] - oracle) <= 1e-6 * np.linalg.norm(oracle)
            # and the damped step approaches the dense pseudoinverse as lam -> 0
            undamped = np.linalg.pinv(Ji) @ r[:, i]
            assert np.linalg.norm(inner[:, i] - undamped) <= 1e-3 * np.linalg.norm(undamped)

    def test_modes_agree_small_lambda(self, rng):
        J = rng.standard_normal((2, 6, 32))
        r = rng.standard_normal((2, 32))
        a, _ = damped_step(J, r, 1e-9, 1.0, "inner")
        b, _ = damped_step(J, r, 1e-9, 1.0, "outer")
        assert np.all(np.linalg.norm(a - b, axis=0) <= 1e-6 * np.linalg.norm(a, axis=0))

    def test_alpha_scales(self, rng):
        J = rng.standard_normal((2, 4, 3))
        r = rng.standard_normal((2, 3))
        a, _ = damped_step(J, r, 1e-8, 1.0)
        b, _ = damped_step(J, r, 1e-8, 0.5)
        np.testing.assert_allclose(b, 0.5 * a)

    def test_mode_rule(self):
        assert select_mode(3, 7) == "inner"
        assert select_mode(7, 7) == "outer"
        assert select_mode(2, 7, "outer") == "outer"
        with pytest.raises(ValueError):
            select_mode(2, 7, "sideways")

    @given(st.integers(0, 10_000), st.sampled_from(["inner", "outer"]))
    def test_lane_permutation_bitwise(self, seed, mode):
        rng = np.random.default_rng(seed)
        J = rng.standard_normal((3, 7, 8))
        r = rng.standard_normal((3, 8))
        perm = rng.permutation(8)
        a, _ = damped_step(J, r, 1e-8, 1.0, mode)
        b, _ = damped_step(J[:, :, perm], r[:, perm], 1e-8, 1.0, mode)
        assert np.array_equal(a[:, perm], b)

    @given(st.integers(0, 10_000))
    def test_scalar_reference(self, seed):
        rng = np.random.default_rng(seed)
        J = rng.standard_normal((3, 7, 4))
        r = rng.standard_normal((3, 4))
        dq, _ = damped_step(J, r, 1e-4)
        for i in range(4):
            ref, _ = damped_step_scalar(J[:, :, i], r[:, i], 1e-4)
            np.testing.assert_allclose(dq[:, i], ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("k", [1, 3, 6, 7, 14])
def test_compiled_solver_matches_numpy(k):
    from mcplan._kernels import chol_solve_inplace

    rng = np.random.default_rng(100 + k)
    A = random_spd(rng, k, 50)
    b = rng.standard_normal((k, 50))
    x_np = cholesky_solve(cholesky_factor(A)[0], b)
    x, L = np.empty(k), np.empty((k, k))
    for i in range(50):
        assert not chol_solve_inplace(A[:, :, i].copy(), k, b[:, i].copy(), x, L)
        np.testing.assert_allclose(x, x_np[:, i], rtol=1e-10, atol=1e-12)
