import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcplan.lie import (
    NEAR_PI,
    TAYLOR_THRESHOLD,
    RigidTransform,
    compose,
    exp_so3,
    exp_so3_batch,
    log_so3,
    log_so3_batch,
    matrix_to_rpy,
    pose_error,
    rot_z,
    rpy_to_matrix,
    skew,
    vee,
)

from .conftest import random_rotation

unit = st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3
)


def _axis(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def mp_exp(w):
    """Rodrigues in 50-digit arithmetic, term-by-term series near zero."""
    mpmath.mp.dps = 50
    w = [mpmath.mpf(float(x)) for x in w]
    th2 = sum(x * x for x in w)
    th = mpmath.sqrt(th2)
    if th < mpmath.mpf("1e-3"):
        a = sum((-1) ** k * th2**k / mpmath.factorial(2 * k + 1) for k in range(12))
        b = sum((-1) ** k * th2**k / mpmath.factorial(2 * k + 2) for k in range(12))
    else:
        a, b = mpmath.sin(th) / th, (1 - mpmath.cos(th)) / th2
    K = mpmath.matrix([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    return mpmath.eye(3) + a * K + b * K * K


class TestRigidTransform:
    def test_identity_composition(self, rng):
        T = RigidTransform(random_rotation(rng), rng.standard_normal(3))
        I = RigidTransform.identity()
        for A in (compose(I, T), compose(T, I)):
            np.testing.assert_array_equal(A.rotation, T.rotation)
            np.testing.assert_array_equal(A.translation, T.translation)

    def test_inverse(self, rng):
        T = RigidTransform(random_rotation(rng), rng.standard_normal(3))
        E = T @ T.inverse()
        np.testing.assert_allclose(E.rotation, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(E.translation, 0, atol=1e-9)
        E = T.inverse() @ T
        np.testing.assert_allclose(E.as_matrix(), np.eye(4), atol=1e-9)

    def test_collinear_translations_add(self):
        T = RigidTransform.from_translation([1, 0, 0]) @ RigidTransform.from_translation([2, 0, 0])
        np.testing.assert_allclose(T.translation, [3, 0, 0])

    @given(st.integers(0, 2**32 - 1))
    def test_associative_and_orthonormal(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (RigidTransform(random_rotation(rng), rng.standard_normal(3)) for _ in range(3))
        lhs, rhs = (a @ b) @ c, a @ (b @ c)
        np.testing.assert_allclose(lhs.as_matrix(), rhs.as_matrix(), atol=1e-9)
        R = lhs.rotation
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(R) - 1) < 1e-9

    def test_matrix_and_dict_round_trip(self, rng):
        T = RigidTransform.from_xyz_rpy([0.1, -0.2, 0.3], [0.3, -0.4, 2.0])
        np.testing.assert_allclose(RigidTransform.from_matrix(T.as_matrix()).as_matrix(), T.as_matrix())
        back = RigidTransform.from_dict(T.to_dict())
        np.testing.assert_allclose(back.as_matrix(), T.as_matrix(), atol=1e-12)
        assert RigidTransform.from_dict(None).as_matrix().tolist() == np.eye(4).tolist()

    def test_apply(self):
        T = RigidTransform(rot_z(math.pi / 2), [1, 0, 0])
        np.testing.assert_allclose(T.apply([1, 0, 0]), [1, 1, 0], atol=1e-15)


class TestRpy:
    @given(st.floats(-3, 3), st.floats(-1.5, 1.5), st.floats(-3, 3))
    def test_round_trip(self, r, p, y):
        np.testing.assert_allclose(matrix_to_rpy(rpy_to_matrix([r, p, y])), [r, p, y], atol=1e-9)

    def test_skew_vee(self):
        v = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(vee(skew(v)), v)
        np.testing.assert_allclose(skew(v) @ [4, 5, 6], np.cross(v, [4, 5, 6]))


class TestExpLog:
    def test_identity(self):
        np.testing.assert_array_equal(log_so3(np.eye(3)), np.zeros(3))
        np.testing.assert_array_equal(exp_so3(np.zeros(3)), np.eye(3))

    def test_quarter_turn_about_z(self):
        np.testing.assert_allclose(log_so3(rot_z(math.pi / 2)), [0, 0, math.pi / 2], atol=1e-15)

    def test_half_turn_about_z(self):
        np.testing.assert_allclose(exp_so3([0, 0, math.pi]), np.diag([-1.0, -1.0, 1.0]), atol=1e-15)

    def test_tiny_angle_against_extended_precision(self, rng):
        for _ in range(20):
            axis = _axis(rng.standard_normal(3))
            w = axis * 1e-9
            R = np.array(mp_exp(w).tolist(), dtype=float)
            np.testing.assert_allclose(log_so3(R), w, rtol=0, atol=1e-12)

    @given(unit, st.floats(1e-8, math.pi - 1e-3))
    def test_exp_matches_extended_precision(self, v, theta):
        w = _axis(v) * theta
        np.testing.assert_allclose(exp_so3(w), np.array(mp_exp(w).tolist(), dtype=float), atol=1e-14)

    def test_round_trip_ten_thousand(self):
        rng = np.random.default_rng(7)
        theta = rng.uniform(1e-12, math.pi - 0.05, 10_000)
        axes = rng.standard_normal((3, 10_000))
        axes /= np.linalg.norm(axes, axis=0)
        R = exp_so3_batch(axes * theta)
        back = exp_so3_batch(log_so3_batch(R))
        assert np.abs(back - R).max() <= 1e-9

    @given(unit, st.floats(1e-6, math.pi - 1e-4))
    def test_norm_is_arccos_of_trace(self, v, theta):
        R = exp_so3(_axis(v) * theta)
        c = np.clip((np.trace(R) - 1) / 2, -1, 1)
        assert abs(np.linalg.norm(log_so3(R)) - math.acos(c)) < 1e-9 or theta < 1e-4

    def test_angle_in_range(self, rng):
        for _ in range(200):
            w = log_so3(random_rotation(rng))
            assert 0 <= np.linalg.norm(w) <= math.pi + 1e-12

    def test_continuous_across_taylor_threshold(self, rng):
        for _ in range(100):
            axis = _axis(rng.standard_normal(3))
            below = log_so3(exp_so3(axis * TAYLOR_THRESHOLD * (1 - 1e-9)))
            above = log_so3(exp_so3(axis * TAYLOR_THRESHOLD * (1 + 1e-9)))
            assert np.abs(below - above).max() < 1e-10

    def test_near_pi_branch(self, rng):
        for eps in (0.0, 1e-9, NEAR_PI / 2, 2 * NEAR_PI, 1e-4):
            axis = _axis(rng.standard_normal(3))
            R = exp_so3(axis * (math.pi - eps))
            w = log_so3(R)
            assert np.all(np.isfinite(w))
            np.testing.assert_allclose(exp_so3(w), R, atol=1e-9)

    def test_batch_matches_scalar(self, rng):
        W = rng.standard_normal((3, 64)) * rng.uniform(0, 3, 64)
        W[:, 0] = 0
        W[:, 1] = [0, 0, 1e-7]
        R = exp_so3_batch(W)
        L = log_so3_batch(R)
        for i in range(W.shape[1]):
            np.testing.assert_allclose(R[:, :, i], exp_so3(W[:, i]), atol=1e-15)
            np.testing.assert_allclose(L[:, i], log_so3(R[:, :, i]), atol=1e-14)

    def test_batch_near_pi_lane(self):
        R = np.stack([np.eye(3), exp_so3([0, math.pi, 0])], axis=-1)
        np.testing.assert_allclose(log_so3_batch(R)[:, 1], [0, math.pi, 0], atol=1e-12)

    def test_pose_error(self):
        T = RigidTransform(rot_z(0.3), [1, 2, 3])
        np.testing.assert_allclose(pose_error(T), [1, 2, 3, 0, 0, 0.3], atol=1e-15)


@pytest.mark.parametrize("theta", [1e-12, 1e-6, 0.5, 2.0, math.pi - 0.05])
def test_round_trip_specific_angles(theta, rng):
    R = exp_so3(_axis(rng.standard_normal(3)) * theta)
    assert np.abs(exp_so3(log_so3(R)) - R).max() <= 1e-9
