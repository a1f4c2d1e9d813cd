import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcplan.constraints import AffineConstraint, Constraint, ConstraintSet, TSRConstraint
from mcplan.projection import CAPPED, CONVERGED, DIVERGED, ProjectionParams, Projector, project_all, project_any

from .conftest import planar_chain, random_q

EXACT = ProjectionParams(lam=1e-12)


def hyperplane(a, b=0.0):
    return AffineConstraint(np.atleast_2d(a), np.atleast_1d(b))


def closed_form(A, b, Q):
    """Least-norm projection of every column onto ``A q = b``."""
    A = np.atleast_2d(A)
    return Q - A.T @ np.linalg.solve(A @ A.T, A @ Q - np.asarray(b, dtype=float)[:, None])


class Circle(Constraint):
    """Numpy-only kind: ``|q[:2]| = radius``."""

    kind = "circle"
    dim = 1

    def __init__(self, radius, dof=2):
        self.radius, self.dof = radius, dof

    def residual(self, Q):
        return (np.hypot(Q[0], Q[1]) - self.radius)[None]

    def residual_and_jacobian(self, Q):
        n = np.hypot(Q[0], Q[1])
        J = np.zeros((1,) + Q.shape)
        J[0, 0], J[0, 1] = Q[0] / n, Q[1] / n
        return self.residual(Q), J


class TestDescentStep:
    def test_on_manifold_step_is_zero(self, rng):
        cset = ConstraintSet([hyperplane([1.0, 2.0, -1.0], 0.5)])
        Q = closed_form([[1, 2, -1]], [0.5], rng.standard_normal((3, 8)))
        delta, singular = Projector(cset, params=EXACT).descent_step(Q)
        assert np.abs(delta).max() < 1e-12 and not singular.any()

    def test_single_linear_step_is_orthogonal_projection(self, rng):
        a = rng.standard_normal(5)
        cset = ConstraintSet([hyperplane(a, 0.3)])
        Q = rng.standard_normal((5, 8))
        delta, _ = Projector(cset, params=EXACT).descent_step(Q)
        expected = -np.outer(a, a @ Q - 0.3) / (a @ a)
        np.testing.assert_allclose(delta, expected, atol=1e-10)

    def test_cycle_composes_individual_steps(self, rng):
        a, b = hyperplane(rng.standard_normal(4), 0.2), hyperplane(rng.standard_normal(4), -0.1)
        Q = rng.standard_normal((4, 8))
        both, _ = Projector(ConstraintSet([a, b]), params=EXACT).descent_step(Q)
        da, _ = Projector(ConstraintSet([a]), params=EXACT).descent_step(Q)
        db, _ = Projector(ConstraintSet([b]), params=EXACT).descent_step(Q + da)
        np.testing.assert_allclose(both, da + db, atol=1e-12)
        ba, _ = Projector(ConstraintSet([b, a]), params=EXACT).descent_step(Q)
        assert np.abs(both - ba).max() > 1e-6  # order matters

    def test_compiled_matches_numpy(self, rng):
        cset = ConstraintSet([hyperplane(rng.standard_normal(6), 0.1), hyperplane(rng.standard_normal(6), 0.4)])
        Q = rng.standard_normal((6, 16))
        a, _ = Projector(cset, params=EXACT, compiled=True).descent_step(Q)
        b, _ = Projector(cset, params=EXACT, compiled=False).descent_step(Q)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestAffineFamily:
    def test_already_on_manifold(self):
        cset = ConstraintSet([hyperplane([1.0, 0.0])])
        Q = np.array([[0.0, 0.0], [1.0, -2.0]])
        out = project_all(cset, Q)
        assert out.all_converged and out.iterations.tolist() == [0, 0]
        np.testing.assert_array_equal(out.block, Q)

    def test_coordinate_hyperplane(self):
        cset = ConstraintSet([hyperplane([1.0, 0.0])])
        Q = np.array([[0.5, -0.3, 2.0, -7.0], [0.1, 0.2, -0.4, 3.0]])
        out = project_all(cset, Q, EXACT)
        assert out.all_converged
        np.testing.assert_allclose(out.block[0], 0, atol=1e-4)
        np.testing.assert_array_equal(out.block[1], Q[1])

    @given(st.integers(0, 2**31), st.integers(2, 9))
    def test_random_hyperplane_closed_form(self, seed, d):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal(d), rng.normal()
        Q = 3 * rng.standard_normal((d, 8))
        out = project_all(ConstraintSet([hyperplane(a, b)]), Q, EXACT)
        assert out.all_converged and out.iterations.max() <= 3
        np.testing.assert_allclose(out.block, closed_form(a, [b], Q), atol=1e-6)

    @given(st.integers(0, 2**31))
    def test_two_orthogonal_hyperplanes(self, seed):
        rng = np.random.default_rng(seed)
        U, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        a, c = U[:, 0], U[:, 1]
        bs = rng.normal(size=2)
        Q = rng.standard_normal((5, 8))
        out = project_all(ConstraintSet([hyperplane(a, bs[0]), hyperplane(c, bs[1])]), Q, EXACT)
        assert out.all_converged and out.iterations.max() <= 6
        np.testing.assert_allclose(out.block, closed_form(U.T, bs, Q), atol=1e-6)

    def test_stacked_rows_least_norm(self, rng):
        A, b = rng.standard_normal((3, 7)), rng.standard_normal(3)
        Q = rng.standard_normal((7, 16))
        out = project_all(ConstraintSet([AffineConstraint(A, b)]), Q, EXACT)
        assert out.all_converged
        np.testing.assert_allclose(out.block, closed_form(A, b, Q), atol=1e-6)

    def test_cyclic_reaches_oblique_intersection(self):
        # two lines at 30 degrees; alternating projection contracts by cos^2 per cycle
        s = np.sin(np.pi / 6)
        cset = ConstraintSet([hyperplane([0.0, 1.0, 0.0]), hyperplane([-s, np.cos(np.pi / 6), 0.0])])
        Q = np.array([[1.0, -2.0, 0.5, 3.0], [0.5, 1.0, -1.0, 0.0], [0.3, 0.3, 0.3, 0.3]])
        out = project_all(cset, Q, EXACT)
        assert out.all_converged and out.iterations.max() <= 64
        assert out.iterations.max() > 3  # genuinely cyclic, not one-shot
        np.testing.assert_allclose(out.block[:2], 0, atol=1e-3)
        for c in cset.constraints:
            assert np.abs(c.residual(out.block)).max() <= 1e-4

    def test_cyclic_curve_and_line(self):
        cset = ConstraintSet([Circle(1.0, dof=3), hyperplane([1.0, -1.0, 0.0])])
        Q = np.array([[2.0, 0.3, -1.5, 0.1], [0.1, 1.4, -0.2, 0.05], [0.0, 1.0, 2.0, 3.0]])
        out = project_all(cset, Q, ProjectionParams(max_iterations=64))
        assert out.all_converged
        for c in cset.constraints:
            assert np.abs(c.residual(out.block)).max() <= 1e-4
        np.testing.assert_allclose(np.abs(out.block[:2]), np.sqrt(0.5), atol=1e-3)

    def test_monotone_residual(self, rng):
        a = rng.standard_normal(4)
        cset = ConstraintSet([hyperplane(a, 1.0)])
        proj = Projector(cset, params=ProjectionParams(alpha=0.3))
        Q = 5 * rng.standard_normal((4, 8))
        prev = np.abs(cset.residual(Q)).max(axis=0)
        for _ in range(20):
            delta, _ = proj.descent_step(Q)
            Q = Q + delta
            cur = np.abs(cset.residual(Q)).max(axis=0)
            assert np.all(cur <= prev + 1e-12)
            prev = cur


class TestStatuses:
    def test_zero_gradient_caps(self):
        # flat residual: no descent direction, lanes hit the iteration cap
        class Flat(Constraint):
            kind, dim, dof = "flat", 1, 2

            def residual(self, Q):
                return np.ones((1, Q.shape[1]))

            def residual_and_jacobian(self, Q):
                return self.residual(Q), np.zeros((1,) + Q.shape)

        cset = ConstraintSet([Flat()], dof=2)
        out = project_all(cset, np.zeros((2, 4)), ProjectionParams(max_iterations=5))
        assert set(out.status.tolist()) <= {CAPPED, DIVERGED}
        assert project_any(cset, np.zeros((2, 4)), ProjectionParams(max_iterations=5)) is None

    def test_step_guard_diverges(self):
        cset = ConstraintSet([hyperplane([1.0, 0.0])])
        Q = np.array([[0.05, 10.0], [0.0, 0.0]])
        out = project_all(cset, Q, ProjectionParams(max_step_distance=1.0))
        assert out.status.tolist() == [CONVERGED, DIVERGED]
        assert out.status_names() == ["converged", "diverged"]

    def test_params_validation(self):
        for bad in ({"epsilon": 0}, {"max_iterations": 0}, {"max_step_distance": -1}, {"mode": "x"}):
            with pytest.raises(ValueError):
                ProjectionParams(**bad)
        p = ProjectionParams(max_step_distance=0.5)
        assert ProjectionParams.from_dict(p.to_dict()) == p

    def test_compiled_refuses_unknown_kinds(self):
        with pytest.raises(ValueError):
            Projector(ConstraintSet([Circle(1.0)], dof=2), compiled=True)


class TestProjectAny:
    def test_lane_on_manifold_returned_first(self):
        cset = ConstraintSet([hyperplane([1.0, 0.0])])
        Q = np.array([[0.3, 0.0, 0.5, 0.0], [1.0, 2.0, 3.0, 4.0]])
        lane, q, _ = project_any(cset, Q)
        assert lane == 1
        np.testing.assert_array_equal(q, [0.0, 2.0])

    def test_nearest_seed_wins(self):
        # fixed-alpha linear descent: iterations grow with distance
        cset = ConstraintSet([hyperplane([1.0, 0.0])])
        Q = np.array([[4.0, 2.0, 0.02, 1.0], [0.0, 0.0, 0.0, 0.0]])
        lane, q, _ = project_any(cset, Q, ProjectionParams(alpha=0.5))
        assert lane == 2 and abs(q[0]) <= 1e-4

    def test_tie_breaks_on_lowest_index(self):
        cset = ConstraintSet([hyperplane([1.0, 0.0])])
        Q = np.array([[0.5, 0.5, 0.5], [0.0, 1.0, 2.0]])
        assert project_any(cset, Q, EXACT)[0] == 0


class TestSoundnessAndIsolation:
    def test_converged_lanes_pass_scalar_check(self, rng):
        m = planar_chain(4)
        c = TSRConstraint(m, "tip", None, None, [[1.5, 1.5], [0.5, 0.5], [None, None], [None, None], [None, None],
                                                  [None, None]])
        cset = ConstraintSet([c])
        Q = random_q(m, rng, 16)
        out = Projector(cset, m).project_all(Q)
        assert out.converged.sum() >= 8
        for i in np.flatnonzero(out.converged):
            assert np.abs(c.residual_scalar(out.block[:, i])).max() <= 1e-4

    @pytest.mark.parametrize("compiled", [True, False])
    def test_single_lane_replay_bitwise(self, rng, compiled):
        m = planar_chain(4)
        c = TSRConstraint(m, "tip", None, None, [[1.5, 1.5], [0.5, 0.5]] + [[None, None]] * 4)
        proj = Projector(ConstraintSet([c]), m, compiled=compiled)
        Q = random_q(m, rng, 8)
        out = proj.project_all(Q)
        for i in range(8):
            one = proj.project_all(Q[:, i : i + 1])
            assert one.status[0] == out.status[i] and one.iterations[0] == out.iterations[i]
            assert np.array_equal(one.block[:, 0], out.block[:, i])

    @given(st.integers(0, 2**31))
    def test_permutation_bitwise(self, seed):
        from mcplan.kinematics import cached_robot
        from mcplan.problems import line_plane_constraint

        rng = np.random.default_rng(seed)
        m = cached_robot("panda7")
        cset = ConstraintSet([line_plane_constraint(m, "PPO", [0.5, 0.0, 0.4], 0.0)])
        proj = Projector(cset, m)
        Q = random_q(m, rng, 8, shrink=0.5)
        perm = rng.permutation(8)
        a, b = proj.project_all(Q), proj.project_all(Q[:, perm])
        assert np.array_equal(a.block[:, perm], b.block)
        assert np.array_equal(a.status[perm], b.status)
