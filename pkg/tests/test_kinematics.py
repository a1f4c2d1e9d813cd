import copy
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from mcplan.kinematics import ROBOT_NAMES, KinematicModel, cached_robot, load_robot, robot_dict

from .conftest import planar_chain, random_q


def oracle_fk(data: dict, q: np.ndarray) -> dict[str, np.ndarray]:
    """Naive chain of 4x4 products straight from the robot JSON (scipy rotations)."""

    def hom(R, t):
        M = np.eye(4)
        M[:3, :3], M[:3, 3] = R, t
        return M

    poses = {}
    children = {j["child"] for j in data["joints"]}
    for link in data["links"]:
        if link["name"] not in children:
            poses[link["name"]] = np.eye(4)
    qi = 0
    pending = list(data["joints"])
    values = {}
    for j in data["joints"]:
        if j.get("kind", "revolute") != "fixed":
            values[j["name"]] = q[qi]
            qi += 1
    while pending:
        j = pending.pop(0)
        if j["parent"] not in poses:
            pending.append(j)
            continue
        o = j.get("origin", {})
        origin = hom(Rotation.from_euler("xyz", o.get("rpy", [0, 0, 0])).as_matrix(), o.get("xyz", [0, 0, 0]))
        kind = j.get("kind", "revolute")
        axis = np.asarray(j.get("axis", [0, 0, 1]), dtype=float)
        if kind == "revolute":
            motion = hom(Rotation.from_rotvec(axis * values[j["name"]]).as_matrix(), np.zeros(3))
        elif kind == "prismatic":
            motion = hom(np.eye(3), axis * values[j["name"]])
        else:
            motion = np.eye(4)
        poses[j["child"]] = poses[j["parent"]] @ origin @ motion
    return poses


class TestForwardKinematics:
    def test_straight_chain(self):
        m = planar_chain(3)
        np.testing.assert_allclose(m.frame_pose(np.zeros(3), "tip").translation, [3, 0, 0], atol=1e-15)

    def test_two_link_right_angle(self):
        m = planar_chain(2)
        np.testing.assert_allclose(m.frame_pose([math.pi / 2, 0], "tip").translation, [0, 2, 0], atol=1e-15)

    @pytest.mark.parametrize("name", ["panda7", "dual_arm14"])
    def test_against_matrix_chain_oracle(self, name, rng):
        data = robot_dict(name)
        m = cached_robot(name)
        for _ in range(20):
            q = random_q(m, rng)
            ref = oracle_fk(data, q)
            got = m.link_poses(q)
            for link, M in ref.items():
                np.testing.assert_allclose(got[link].as_matrix(), M, atol=1e-12)

    def test_floating_base_matches_oracle(self, rng):
        m = cached_robot("legged_chain")
        data = robot_dict("legged_chain")
        for _ in range(10):
            q = random_q(m, rng)
            x, y, z, roll, pitch, yaw = q[:6]
            base = np.eye(4)
            base[:3, :3] = Rotation.from_euler("xyz", [roll, pitch, yaw]).as_matrix()
            base[:3, 3] = [x, y, z]
            ref = oracle_fk(data, q[6:])
            got = m.link_poses(q)
            for link, M in ref.items():
                np.testing.assert_allclose(got[link].as_matrix(), base @ M, atol=1e-12)

    def test_dimension_rejected(self):
        m = cached_robot("panda7")
        with pytest.raises(ValueError):
            m.forward_kinematics(np.zeros(6))
        with pytest.raises(ValueError):
            m.batch_fk(np.zeros((6, 4)))

    def test_unknown_frame(self):
        with pytest.raises(KeyError):
            cached_robot("panda7").frame_pose(np.zeros(7), "nose")

    def test_fixed_identity_joint_invariance(self, rng):
        data = robot_dict("panda7")
        extra = copy.deepcopy(data)
        j3 = next(j for j in extra["joints"] if j["child"] == "link3")
        extra["links"].append({"name": "spacer"})
        extra["joints"].append({"name": "spacer_joint", "parent": j3["parent"], "child": "spacer", "kind": "fixed",
                                "origin": {"xyz": [0, 0, 0], "rpy": [0, 0, 0]}})
        j3["parent"] = "spacer"
        a, b = KinematicModel.from_dict(data), KinematicModel.from_dict(extra)
        assert a.dof == b.dof
        for _ in range(10):
            q = random_q(a, rng)
            np.testing.assert_allclose(a.frame_pose(q, "tcp").as_matrix(), b.frame_pose(q, "tcp").as_matrix(),
                                       atol=1e-14)

    def test_declaration_order_indices(self):
        m = cached_robot("dual_arm14")
        names = [j.name for j, i in sorted(zip(m.joints, m.q_index), key=lambda t: t[1]) if i >= 0]
        assert names[:7] == [f"left_joint{i}" for i in range(1, 8)]
        assert names[7:] == [f"right_joint{i}" for i in range(1, 8)]


class TestBatchKinematics:
    @pytest.mark.parametrize("name", ROBOT_NAMES)
    def test_batch_matches_scalar(self, name, rng):
        m = cached_robot(name)
        Q = random_q(m, rng, 8)
        P = m.batch_fk(Q)
        for i in range(8):
            ref = m.forward_kinematics(Q[:, i])
            for li, T in enumerate(ref):
                np.testing.assert_allclose(P.T[li, i], T.as_matrix(), atol=1e-12)

    def test_thousand_random_blocks(self):
        m = cached_robot("panda7")
        rng = np.random.default_rng(3)
        li = m.frame_link("tcp")[0]
        for _ in range(1000):
            Q = random_q(m, rng, 4)
            R, t = m.batch_frame_pose(Q, "tcp")
            k = rng.integers(4)
            ref = m.frame_pose(Q[:, k], "tcp")
            assert np.abs(t[:, k] - ref.translation).max() <= 1e-12
            assert np.abs(R[:, :, k] - ref.rotation).max() <= 1e-12
        assert li >= 0

    def test_identical_lanes_bitwise(self, rng):
        m = cached_robot("panda7")
        Q = np.repeat(random_q(m, rng)[:, None], 8, axis=1)
        for T in (m.batch_fk(Q).T, m.compiled_fk(Q).transpose(0, 3, 1, 2)):
            assert all(np.array_equal(T[:, 0], T[:, i]) for i in range(8))

    def test_requested_frames_only(self, rng):
        m = cached_robot("panda7")
        out = m.batch_forward_kinematics(random_q(m, rng, 8), ["tcp"])
        assert list(out) == ["tcp"]
        R, t = out["tcp"]
        assert R.shape == (3, 3, 8) and t.shape == (3, 8)

    def test_compiled_matches_numpy(self, rng):
        for name in ROBOT_NAMES:
            m = cached_robot(name)
            Q = random_q(m, rng, 8)
            np.testing.assert_allclose(m.compiled_fk(Q).transpose(0, 3, 1, 2), m.batch_fk(Q).T[:, :, :3, :],
                                       atol=1e-12)


def fd_frame_jacobian(m, q, frame, h=1e-6):
    J = np.zeros((6, m.dof))
    for i in range(m.dof):
        e = np.zeros(m.dof)
        e[i] = h
        A, B = m.frame_pose(q + e, frame), m.frame_pose(q - e, frame)
        J[:3, i] = (A.translation - B.translation) / (2 * h)
        dR = (A.rotation - B.rotation) / (2 * h)
        W = dR @ m.frame_pose(q, frame).rotation.T
        J[3:, i] = [W[2, 1], W[0, 2], W[1, 0]]
    return J


class TestJacobians:
    def test_prismatic_column(self):
        m = KinematicModel.from_dict({
            "joints": [{"name": "slide", "parent": "base", "child": "carriage", "kind": "prismatic", "axis": [0, 0, 1],
                        "limits": [-1, 1]}],
            "links": [{"name": "base"}, {"name": "carriage", "mass": 1.0}],
            "frames": [{"name": "tip", "link": "carriage", "offset": [0.3, 0, 0]}],
        })
        for q in (-0.5, 0.0, 0.7):
            np.testing.assert_allclose(m.geometric_jacobian([q], "tip")[:, 0], [0, 0, 1, 0, 0, 0])

    def test_revolute_about_z(self):
        r = 0.8
        m = planar_chain(1, length=r)
        np.testing.assert_allclose(m.geometric_jacobian([0.0], "tip")[:, 0], [0, r, 0, 0, 0, 1], atol=1e-15)

    @pytest.mark.parametrize("name,frame", [("panda7", "tcp"), ("panda7_marker", "marker_tip"),
                                            ("dual_arm14", "right_tcp"), ("legged_chain", None)])
    def test_finite_difference(self, name, frame, rng):
        m = cached_robot(name)
        frame = frame or next(iter(m.frames))
        for _ in range(10):
            q = random_q(m, rng)
            J = m.geometric_jacobian(q, frame)
            ref = fd_frame_jacobian(m, q, frame)
            np.testing.assert_allclose(J[:3], ref[:3], atol=1e-5 * max(1.0, np.abs(ref[:3]).max()))
            np.testing.assert_allclose(J[3:], ref[3:], atol=1e-6)

    def test_batch_jacobian_matches_scalar(self, rng):
        m = cached_robot("dual_arm14")
        Q = random_q(m, rng, 8)
        J = m.batch_geometric_jacobian(Q, "left_tcp")
        for i in range(8):
            np.testing.assert_allclose(J[:, :, i], m.geometric_jacobian(Q[:, i], "left_tcp"), atol=1e-12)

    def test_non_ancestor_columns_exactly_zero(self, rng):
        m = cached_robot("dual_arm14")
        q = random_q(m, rng)
        J = m.geometric_jacobian(q, "left_tcp")
        assert np.all(J[:, 7:] == 0.0)
        Jb = m.batch_geometric_jacobian(q[:, None], "left_tcp")
        assert np.all(Jb[:, 7:] == 0.0)


class TestCenterOfMass:
    def test_single_link_at_origin(self):
        m = KinematicModel.from_dict({"joints": [], "links": [{"name": "body", "mass": 1.0}]})
        np.testing.assert_array_equal(m.center_of_mass(np.zeros(0)), [0, 0, 0])

    def test_symmetric_point_masses(self):
        m = KinematicModel.from_dict({
            "joints": [
                {"name": "a", "parent": "base", "child": "left", "kind": "fixed", "origin": {"xyz": [1, 0, 0]}},
                {"name": "b", "parent": "base", "child": "right", "kind": "fixed", "origin": {"xyz": [-1, 0, 0]}},
            ],
            "links": [{"name": "base"}, {"name": "left", "mass": 2.0}, {"name": "right", "mass": 2.0}],
        })
        np.testing.assert_allclose(m.center_of_mass(np.zeros(0)), [0, 0, 0], atol=1e-15)

    def test_zero_mass_rejected(self):
        m = planar_chain(2, masses=[0.0, 0.0])
        with pytest.raises(ValueError):
            m.center_of_mass(np.zeros(2))
        with pytest.raises(ValueError):
            KinematicModel.from_dict({"joints": [], "links": [{"name": "ghost"}], "require_mass": True})

    @given(st.integers(0, 2**31))
    def test_five_link_fd_jacobian(self, seed):
        rng = np.random.default_rng(seed)
        m = planar_chain(5, masses=rng.uniform(0.1, 2.0, 5))
        q = rng.uniform(-3, 3, 5)
        h = 1e-6
        ref = np.stack([(m.center_of_mass(q + h * e) - m.center_of_mass(q - h * e)) / (2 * h) for e in np.eye(5)], 1)
        np.testing.assert_allclose(m.com_jacobian(q), ref, atol=1e-5)

    def test_batch_com(self, rng):
        m = cached_robot("legged_chain")
        Q = random_q(m, rng, 8)
        com, J = m.batch_center_of_mass(Q, with_jacobian=True)
        for i in range(8):
            np.testing.assert_allclose(com[:, i], m.center_of_mass(Q[:, i]), atol=1e-12)
            np.testing.assert_allclose(J[:, :, i], m.com_jacobian(Q[:, i]), atol=1e-12)


class TestModelLoading:
    def test_shipped_robots(self):
        for name in ROBOT_NAMES:
            m = load_robot(name)
            assert m.dof == {"panda7": 7, "panda7_marker": 7, "dual_arm14": 14, "legged_chain": m.dof}[name]
            for f in m.frames:
                m.frame_link(f)
        assert cached_robot("legged_chain").floating_base

    def test_bad_specs(self):
        base = {"name": "x", "links": [{"name": "a"}, {"name": "b"}]}
        with pytest.raises(ValueError):
            KinematicModel.from_dict({**base, "joints": [{"name": "j", "parent": "a", "child": "b", "limits": [1, -1]}]})
        with pytest.raises(ValueError):
            KinematicModel.from_dict({**base, "joints": [{"name": "j", "parent": "a", "child": "b", "kind": "ball"}]})
        with pytest.raises(ValueError):
            KinematicModel.from_dict({"links": [{"name": "a", "spheres": [{"center": [0, 0, 0], "radius": 0}]}],
                                      "joints": []})
        with pytest.raises(ValueError):
            KinematicModel.from_dict({"links": [{"name": "a", "mass": -1}], "joints": []})

    def test_sphere_centers_batch(self, rng):
        m = cached_robot("panda7")
        Q = random_q(m, rng, 4)
        C = m.batch_sphere_centers(Q)
        for i in range(4):
            np.testing.assert_allclose(C[:, :, i], m.sphere_centers(Q[:, i]), atol=1e-12)
