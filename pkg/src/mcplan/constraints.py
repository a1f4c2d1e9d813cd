"""Constraint residuals ``F(q)`` and their Jacobians, batch and scalar.

Every constraint exposes

* ``residual(Q)``: ``(k, n)`` for a ``(d, n)`` configuration block,
* ``jacobian(Q)``: ``(k, d, n)``,
* ``residual_scalar(q)`` / ``jacobian_scalar(q)``: single-configuration
  reference versions built on the scalar FK path.

Pose-error constraints (TSR, relative pose) produce the six displacement
components ``[t; log(R)]`` of a pose error and clamp each one into its bound
interval; components left unbounded on both sides are dropped from the
residual altogether.
"""

from __future__ import annotations

import math

import numpy as np

from .kinematics import KinematicModel
from .lie import RigidTransform, TAYLOR_THRESHOLD, log_so3, log_so3_batch

FD_STEP = 1e-6
ORIENTATION_JACOBIAN = "analytic"


def _bounds_array(bounds) -> np.ndarray:
    if bounds is None:
        return np.zeros((6, 2))
    out = np.empty((6, 2))
    for i, (lo, hi) in enumerate(bounds):
        out[i, 0] = -np.inf if lo is None else float(lo)
        out[i, 1] = np.inf if hi is None else float(hi)
    if np.any(out[:, 0] > out[:, 1]):
        raise ValueError(f"bounds must satisfy lo <= hi, got {out.tolist()}")
    return out


def _bounds_json(bounds: np.ndarray) -> list:
    return [[None if np.isinf(lo) else float(lo), None if np.isinf(hi) else float(hi)] for lo, hi in bounds]


def clamp_excess(v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Signed distance of ``v`` outside ``[lo, hi]``; zero inside."""
    return np.maximum(0.0, v - hi) + np.minimum(0.0, v - lo)


def _clamp_rows_active(v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # One-sided at the boundary: a component sitting on lo or hi keeps its row.
    return (v >= hi) | (v <= lo)


def tsr_displacement(T0_w: RigidTransform, Tw_e: RigidTransform, pose: RigidTransform) -> np.ndarray:
    """``[t; log(R)]`` of ``(T0_w)^-1 * pose * (Tw_e)^-1``."""
    err = T0_w.inverse() @ pose @ Tw_e.inverse()
    return np.concatenate([err.translation, log_so3(err.rotation)])


def tsr_residual(T0_w: RigidTransform, Tw_e: RigidTransform, bounds, pose: RigidTransform) -> np.ndarray:
    """Full 6-vector TSR residual of an end-effector pose (zero inside the bounds)."""
    b = _bounds_array(bounds)
    return clamp_excess(tsr_displacement(T0_w, Tw_e, pose), b[:, 0], b[:, 1])


def inv_right_jacobian_so3(phi: np.ndarray) -> np.ndarray:
    """``Jr^{-1}(phi)`` per lane for ``phi`` of shape ``(3, n)``; returns ``(3, 3, n)``.

    Maps body angular velocity of a rotation to the rate of its log.
    """
    theta2 = np.einsum("in,in->n", phi, phi)
    theta = np.sqrt(theta2)
    small = theta < TAYLOR_THRESHOLD
    ts = np.where(small, 1.0, theta)
    coef = np.where(
        small,
        1.0 / 12.0 + theta2 / 720.0,
        1.0 / (ts * ts) - (1.0 + np.cos(ts)) / (2.0 * ts * np.sin(np.where(small, 1.0, ts))),
    )
    x, y, z = phi
    zero = np.zeros_like(x)
    K = np.array([[zero, -z, y], [z, zero, -x], [-y, x, zero]])
    KK = np.einsum("ikn,kjn->ijn", K, K)
    eye = np.eye(3)[:, :, None]
    return eye + 0.5 * K + coef * KK


class Constraint:
    """Base class: a residual ``F(q)`` in ``R^k`` with Jacobian ``(k, d)``."""

    kind = "abstract"
    dim = 0
    tolerance: float | None = None
    dof: int = 0

    def residual(self, Q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, Q: np.ndarray) -> np.ndarray:
        return self.residual_and_jacobian(Q)[1]

    def residual_and_jacobian(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.residual(Q), self.jacobian(Q)

    def residual_scalar(self, q: np.ndarray) -> np.ndarray:
        return self.residual(np.asarray(q, dtype=float)[:, None])[:, 0]

    def jacobian_scalar(self, q: np.ndarray) -> np.ndarray:
        return fd_jacobian_scalar(self.residual_scalar, q)

    def to_dict(self) -> dict:
        raise NotImplementedError


def fd_jacobian_scalar(fn, q: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` at ``q``."""
    q = np.asarray(q, dtype=float)
    f0 = fn(q)
    J = np.zeros((f0.shape[0], q.shape[0]))
    for j in range(q.shape[0]):
        e = np.zeros_like(q)
        e[j] = h
        J[:, j] = (fn(q + e) - fn(q - e)) / (2 * h)
    return J


def fd_jacobian_batch(fn, Q: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Lane-parallel central differences: all ``2 d`` perturbations of all lanes
    go through ``fn`` as one ``(d, 2 d n)`` block."""
    d, n = Q.shape
    E = np.eye(d) * h
    Qp = np.concatenate([Q[:, None, :] + E[:, :, None], Q[:, None, :] - E[:, :, None]], axis=1)
    F = fn(Qp.reshape(d, 2 * d * n))
    F = F.reshape(F.shape[0], 2 * d, n)
    return (F[:, :d] - F[:, d:]) / (2 * h)


class AffineConstraint(Constraint):
    """``A q - b`` with a constant Jacobian ``A``."""

    kind = "affine"

    def __init__(self, A, b, tolerance: float | None = None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b row counts differ")
        self.dim, self.dof = self.A.shape
        self.tolerance = tolerance

    def residual(self, Q):
        return self.A @ Q - self.b[:, None]

    def residual_and_jacobian(self, Q):
        n = Q.shape[1]
        return self.residual(Q), np.repeat(self.A[:, :, None], n, axis=2)

    def residual_scalar(self, q):
        return self.A @ q - self.b

    def jacobian_scalar(self, q):
        return self.A.copy()

    def to_dict(self):
        return {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist(), "tolerance": self.tolerance}


class _PoseErrorConstraint(Constraint):
    """Shared machinery for constraints whose residual is a clamped pose error."""

    def __init__(self, model: KinematicModel, bounds, tolerance, orientation_jacobian):
        self.model = model
        self.dof = model.dof
        self.bounds = _bounds_array(bounds)
        self.active = np.flatnonzero(~(np.isneginf(self.bounds[:, 0]) & np.isposinf(self.bounds[:, 1])))
        self.dim = int(self.active.size)
        self.lo = self.bounds[self.active, 0][:, None]
        self.hi = self.bounds[self.active, 1][:, None]
        self.tolerance = tolerance
        self.orientation_jacobian = orientation_jacobian or ORIENTATION_JACOBIAN
        self._pos_rows = [i for i, a in enumerate(self.active) if a < 3]
        self._rot_rows = [i for i, a in enumerate(self.active) if a >= 3]
        self._rot_comp = [a - 3 for a in self.active if a >= 3]

    def _error_transforms(self, Q: np.ndarray):
        """Pose errors ``(n, 4, 4)`` plus whatever the Jacobian needs."""
        raise NotImplementedError

    def displacement(self, Q: np.ndarray) -> np.ndarray:
        """Unclamped 6-row displacement ``[t; log R]`` per lane."""
        E = self._error_transforms(Q)[0]
        return np.concatenate([E[:, :3, 3].T, log_so3_batch(E[:, :3, :3].transpose(1, 2, 0))])

    def _log_rows(self, Q: np.ndarray) -> np.ndarray:
        E = self._error_transforms(Q)[0]
        return log_so3_batch(E[:, :3, :3].transpose(1, 2, 0))[self._rot_comp]

    def residual(self, Q):
        E = self._error_transforms(Q)[0]
        return self._clamped(E)[0]

    def _clamped(self, E):
        rows = []
        if self._pos_rows:
            rows.append(E[:, :3, 3].T[self.active[self._pos_rows]])
        if self._rot_rows:
            rows.append(log_so3_batch(E[:, :3, :3].transpose(1, 2, 0))[self._rot_comp])
        v = np.concatenate(rows) if rows else np.zeros((0, E.shape[0]))
        return clamp_excess(v, self.lo, self.hi), v

    def residual_and_jacobian(self, Q):
        E, aux = self._error_transforms(Q, with_aux=True)
        r, v = self._clamped(E)
        d, n = Q.shape
        J = np.zeros((self.dim, d, n))
        if self._pos_rows:
            J[self._pos_rows] = self._position_jacobian(E, aux)[self.active[self._pos_rows]]
        if self._rot_rows:
            if self.orientation_jacobian == "fd":
                J[self._rot_rows] = fd_jacobian_batch(self._log_rows, Q)
            else:
                phi = log_so3_batch(E[:, :3, :3].transpose(1, 2, 0))
                Jr_inv = inv_right_jacobian_so3(phi)
                w_body = self._body_angular_jacobian(E, aux)  # (3, d, n)
                J[self._rot_rows] = np.einsum("ikn,kjn->ijn", Jr_inv, w_body)[self._rot_comp]
        J *= _clamp_rows_active(v, self.lo, self.hi)[:, None, :]
        return r, J

    # scalar reference path
    def _error_scalar(self, q) -> RigidTransform:
        raise NotImplementedError

    def residual_scalar(self, q):
        err = self._error_scalar(np.asarray(q, dtype=float))
        disp = np.concatenate([err.translation, log_so3(err.rotation)])[self.active]
        return clamp_excess(disp, self.lo[:, 0], self.hi[:, 0])

    def _displacement_scalar(self, q):
        err = self._error_scalar(np.asarray(q, dtype=float))
        return np.concatenate([err.translation, log_so3(err.rotation)])[self.active]

    def jacobian_scalar(self, q):
        q = np.asarray(q, dtype=float)
        v = self._displacement_scalar(q)
        J = fd_jacobian_scalar(self._displacement_scalar, q)
        if self._pos_rows:
            J[self._pos_rows] = self._position_jacobian_scalar(q)[self.active[self._pos_rows]]
        mask = _clamp_rows_active(v, self.lo[:, 0], self.hi[:, 0])
        return J * mask[:, None]


class TSRConstraint(_PoseErrorConstraint):
    """Task Space Region on a named frame.

    The error transform is ``(T0_w)^-1 * T_frame(q) * (Tw_e)^-1``; its
    displacement components are clamped into ``bounds`` (6 intervals, meters
    then radians, ``None``/inf for unbounded).
    """

    kind = "tsr"

    def __init__(self, model, frame, T0_w=None, Tw_e=None, bounds=None, tolerance=None, orientation_jacobian=None):
        super().__init__(model, bounds, tolerance, orientation_jacobian)
        self.frame = frame
        self.link, self.offset = model.frame_link(frame)
        self.T0_w = T0_w or RigidTransform.identity()
        self.Tw_e = Tw_e or RigidTransform.identity()
        self._A = self.T0_w.inverse().as_matrix()
        # Fold the frame offset and (Tw_e)^-1 into one link-fixed transform.
        self._B = (self.offset @ self.Tw_e.inverse()).as_matrix()

    def _error_transforms(self, Q, with_aux=False):
        poses = self.model.batch_fk(Q, (self.link,))
        W = poses.T[self.link] @ self._B  # world pose of the displaced frame
        E = self._A @ W
        return (E, (poses, W)) if with_aux else (E, None)

    def _position_jacobian(self, E, aux):
        poses, W = aux
        Jp = self.model.batch_point_jacobian(poses, self.link, W[:, :3, 3])
        return np.einsum("ik,kjn->ijn", self._A[:3, :3], Jp)

    def _body_angular_jacobian(self, E, aux):
        poses, W = aux
        J = self.model.batch_point_jacobian(poses, self.link, W[:, :3, 3], angular=True)[3:]
        # world angular velocity -> body frame of the error rotation: W_R^T w
        return np.einsum("nki,kjn->ijn", W[:, :3, :3], J)

    def _error_scalar(self, q):
        return self.T0_w.inverse() @ self.model.frame_pose(q, self.frame) @ self.Tw_e.inverse()

    def _position_jacobian_scalar(self, q):
        link_name = self.model.links[self.link].name
        local = (self.offset @ self.Tw_e.inverse()).translation
        _, Jp = self.model.point_jacobian(q, link_name, local)
        return np.vstack([self.T0_w.rotation.T @ Jp, np.zeros((3, q.shape[0]))])

    def to_dict(self):
        return {
            "kind": self.kind,
            "frame": self.frame,
            "T0_w": self.T0_w.to_dict(),
            "Tw_e": self.Tw_e.to_dict(),
            "bounds": _bounds_json(self.bounds),
            "tolerance": self.tolerance,
        }


class RelativePoseConstraint(_PoseErrorConstraint):
    """Fixed relative pose between two frames: ``T_ref^-1 (T_a^-1 T_b)``."""

    kind = "relative_pose"

    def __init__(self, model, frame_a, frame_b, T_ref=None, bounds=None, tolerance=None, orientation_jacobian=None):
        super().__init__(model, bounds, tolerance, orientation_jacobian)
        self.frame_a, self.frame_b = frame_a, frame_b
        self.link_a, self.off_a = model.frame_link(frame_a)
        self.link_b, self.off_b = model.frame_link(frame_b)
        self.T_ref = T_ref or RigidTransform.identity()
        self._ref_inv = self.T_ref.inverse().as_matrix()
        self._Oa = self.off_a.as_matrix()
        self._Ob = self.off_b.as_matrix()

    def _error_transforms(self, Q, with_aux=False):
        poses = self.model.batch_fk(Q, (self.link_a, self.link_b))
        Ta = poses.T[self.link_a] @ self._Oa
        Tb = poses.T[self.link_b] @ self._Ob
        Ra_T = Ta[:, :3, :3].transpose(0, 2, 1)
        rel = np.empty_like(Ta)
        rel[:, :3, :3] = Ra_T @ Tb[:, :3, :3]
        rel[:, :3, 3] = np.einsum("nij,nj->ni", Ra_T, Tb[:, :3, 3] - Ta[:, :3, 3])
        rel[:, 3] = (0.0, 0.0, 0.0, 1.0)
        E = self._ref_inv @ rel
        return (E, (poses, Ta, Tb)) if with_aux else (E, None)

    def _position_jacobian(self, E, aux):
        poses, Ta, Tb = aux
        pb = Tb[:, :3, 3]
        # d/dq [R_a^T (p_b - p_a)] = R_a^T (J_b(p_b) - J_a(p_b)): p_b moving with
        # link b minus p_b carried rigidly by link a.
        Jd = self.model.batch_point_jacobian(poses, self.link_b, pb) - self.model.batch_point_jacobian(
            poses, self.link_a, pb
        )
        M = self._ref_inv[:3, :3] @ Ta[:, :3, :3].transpose(0, 2, 1)  # (n, 3, 3)
        return np.einsum("nik,kjn->ijn", M, Jd)

    def _body_angular_jacobian(self, E, aux):
        poses, Ta, Tb = aux
        wa = self.model.batch_point_jacobian(poses, self.link_a, Ta[:, :3, 3], angular=True)[3:]
        wb = self.model.batch_point_jacobian(poses, self.link_b, Tb[:, :3, 3], angular=True)[3:]
        # R_err = R_ref^T R_a^T R_b; body rate = R_b^T (w_b - w_a)
        return np.einsum("nki,kjn->ijn", Tb[:, :3, :3], wb - wa)

    def _error_scalar(self, q):
        Ta = self.model.frame_pose(q, self.frame_a)
        Tb = self.model.frame_pose(q, self.frame_b)
        return self.T_ref.inverse() @ (Ta.inverse() @ Tb)

    def _position_jacobian_scalar(self, q):
        pb = self.model.frame_pose(q, self.frame_b).translation
        Ta = self.model.frame_pose(q, self.frame_a)
        poses = self.model.forward_kinematics(q)
        Jd = (
            self.model._scalar_point_jacobian(poses, self.link_b, pb)[:3]
            - self.model._scalar_point_jacobian(poses, self.link_a, pb)[:3]
        )
        return np.vstack([self.T_ref.rotation.T @ Ta.rotation.T @ Jd, np.zeros((3, q.shape[0]))])

    def to_dict(self):
        return {
            "kind": self.kind,
            "frame_a": self.frame_a,
            "frame_b": self.frame_b,
            "T_ref": self.T_ref.to_dict(),
            "bounds": _bounds_json(self.bounds),
            "tolerance": self.tolerance,
        }


class ClosedLinkConstraint(Constraint):
    """Fixed distance between two link-attached points: ``|p_a - p_b| - length``."""

    kind = "closed_link"
    dim = 1

    def __init__(self, model, point_a, point_b, length, tolerance=None):
        if length < 0:
            raise ValueError("closed-link length must be non-negative")
        self.model = model
        self.dof = model.dof
        self.frame_a, local_a = point_a
        self.frame_b, local_b = point_b
        self.local_a = np.asarray(local_a, dtype=float)
        self.local_b = np.asarray(local_b, dtype=float)
        self.length = float(length)
        self.tolerance = tolerance
        la, oa = model.frame_link(self.frame_a)
        lb, ob = model.frame_link(self.frame_b)
        self.link_a, self.link_b = la, lb
        self._pa_link = oa.apply(self.local_a)  # point in link coordinates
        self._pb_link = ob.apply(self.local_b)
        self.rigid = la == lb

    def _points(self, Q):
        poses = self.model.batch_fk(Q, (self.link_a, self.link_b))
        Ta, Tb = poses.T[self.link_a], poses.T[self.link_b]
        pa = Ta[:, :3, :3] @ self._pa_link + Ta[:, :3, 3]
        pb = Tb[:, :3, :3] @ self._pb_link + Tb[:, :3, 3]
        return poses, pa, pb

    def residual(self, Q):
        _, pa, pb = self._points(Q)
        return (np.linalg.norm(pa - pb, axis=1) - self.length)[None, :]

    def residual_and_jacobian(self, Q):
        poses, pa, pb = self._points(Q)
        diff = pa - pb
        dist = np.linalg.norm(diff, axis=1)
        r = (dist - self.length)[None, :]
        d, n = Q.shape
        if self.rigid:
            return r, np.zeros((1, d, n))
        u = diff / np.where(dist > 1e-12, dist, np.inf)[:, None]
        Jd = self.model.batch_point_jacobian(poses, self.link_a, pa) - self.model.batch_point_jacobian(
            poses, self.link_b, pb
        )
        return r, np.einsum("ni,ijn->jn", u, Jd)[None]

    def residual_scalar(self, q):
        poses = self.model.forward_kinematics(q)
        pa = poses[self.link_a].apply(self._pa_link)
        pb = poses[self.link_b].apply(self._pb_link)
        return np.array([np.linalg.norm(pa - pb) - self.length])

    def jacobian_scalar(self, q):
        if self.rigid:
            return np.zeros((1, self.dof))
        poses = self.model.forward_kinematics(q)
        pa = poses[self.link_a].apply(self._pa_link)
        pb = poses[self.link_b].apply(self._pb_link)
        diff = pa - pb
        dist = np.linalg.norm(diff)
        if dist <= 1e-12:
            return np.zeros((1, self.dof))
        Ja = self.model._scalar_point_jacobian(poses, self.link_a, pa)[:3]
        Jb = self.model._scalar_point_jacobian(poses, self.link_b, pb)[:3]
        return ((diff / dist) @ (Ja - Jb))[None]

    def to_dict(self):
        return {
            "kind": self.kind,
            "point_a": {"frame": self.frame_a, "local": self.local_a.tolist()},
            "point_b": {"frame": self.frame_b, "local": self.local_b.tolist()},
            "length": self.length,
            "tolerance": self.tolerance,
        }


def validate_polygon(vertices, tol: float = 1e-9) -> np.ndarray:
    P = np.asarray(vertices, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] < 3:
        raise ValueError("support polygon needs at least 3 two-dimensional vertices")
    e = np.roll(P, -1, axis=0) - P
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    if np.any(cross < -tol):
        raise ValueError("support polygon must be convex and counterclockwise")
    return P


def nearest_point_in_polygon(p, vertices) -> np.ndarray:
    """Closest point of a convex CCW polygon to ``p`` (``p`` itself if inside)."""
    P = np.asarray(vertices, dtype=float)
    p = np.asarray(p, dtype=float)
    m = len(P)
    inside = True
    for i in range(m):
        a, b = P[i], P[(i + 1) % m]
        if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < 0:
            inside = False
            break
    if inside:
        return p.copy()
    best, best_d = None, math.inf
    for i in range(m):
        a, b = P[i], P[(i + 1) % m]
        e = b - a
        t = min(1.0, max(0.0, float((p - a) @ e) / float(e @ e)))
        c = a + t * e
        dist = float((p - c) @ (p - c))
        if dist < best_d:
            best, best_d = c, dist
    return best


def nearest_point_in_polygon_batch(p: np.ndarray, vertices: np.ndarray):
    """Lane-parallel nearest point; ``p`` is ``(2, n)``.

    Returns ``(nearest (2, n), inside (n,), t (n,), edge (n,))`` where ``t`` is
    the clamped segment parameter of the winning edge.
    """
    P = np.asarray(vertices, dtype=float)
    A = P[:, :, None]  # (m, 2, 1)
    E = (np.roll(P, -1, axis=0) - P)[:, :, None]
    rel = p[None] - A  # (m, 2, n)
    cross = E[:, 0] * rel[:, 1] - E[:, 1] * rel[:, 0]
    inside = np.all(cross >= 0.0, axis=0)
    t = np.clip(np.einsum("min,min->mn", rel, np.broadcast_to(E, rel.shape)) / np.sum(E * E, axis=1), 0.0, 1.0)
    C = A + t[:, None, :] * E  # (m, 2, n)
    dist = np.sum((p[None] - C) ** 2, axis=1)
    edge = np.argmin(dist, axis=0)
    lanes = np.arange(p.shape[1])
    nearest = np.where(inside[None], p, C[edge, :, lanes].T)
    return nearest, inside, t[edge, lanes], edge


class ComPolygonConstraint(Constraint):
    """Keep the ground projection of the center of mass inside a convex polygon."""

    kind = "com_polygon"
    dim = 2

    def __init__(self, model, vertices, tolerance=None):
        if model.total_mass <= 0:
            raise ValueError("center-of-mass constraint needs a model with mass")
        self.model = model
        self.dof = model.dof
        self.vertices = validate_polygon(vertices)
        self._edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        self.tolerance = tolerance

    def residual(self, Q):
        com = self.model.batch_center_of_mass(Q)
        xy = com[:2]
        nearest = nearest_point_in_polygon_batch(xy, self.vertices)[0]
        return xy - nearest

    def residual_and_jacobian(self, Q):
        com, Jc = self.model.batch_center_of_mass(Q, with_jacobian=True)
        xy = com[:2]
        nearest, inside, t, edge = nearest_point_in_polygon_batch(xy, self.vertices)
        r = xy - nearest
        # Edge interior: only the normal component moves -> n n^T; vertex: identity.
        e = self._edges[edge].T  # (2, n)
        e = e / np.linalg.norm(e, axis=0)
        on_edge = (t > 0.0) & (t < 1.0)
        P = np.eye(2)[:, :, None] - np.where(on_edge, 1.0, 0.0) * np.einsum("in,jn->ijn", e, e)
        P = P * (~inside)
        return r, np.einsum("ikn,kjn->ijn", P, Jc[:2])

    def residual_scalar(self, q):
        xy = self.model.center_of_mass(q)[:2]
        return xy - nearest_point_in_polygon(xy, self.vertices)

    def jacobian_scalar(self, q):
        return fd_jacobian_scalar(self.residual_scalar, q)

    def to_dict(self):
        return {"kind": self.kind, "vertices": self.vertices.tolist(), "tolerance": self.tolerance}


class ConstraintSet:
    """Ordered constraints (the cyclic projection order) with tolerance ``epsilon``."""

    def __init__(self, constraints=(), epsilon: float = 1e-4, dof: int | None = None):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.constraints = list(constraints)
        self.epsilon = float(epsilon)
        self.dim = sum(c.dim for c in self.constraints)
        dofs = {c.dof for c in self.constraints}
        if dof is not None:
            dofs.add(dof)
        if len(dofs) > 1:
            raise ValueError(f"constraints disagree on configuration dimension: {sorted(dofs)}")
        self.dof = dofs.pop() if dofs else dof
        if self.dof is not None and self.constraints and self.dim >= self.dof:
            raise ValueError(f"total residual dimension {self.dim} leaves no manifold in R^{self.dof}")

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def tolerances(self) -> list[float]:
        return [c.tolerance if c.tolerance is not None else self.epsilon for c in self.constraints]

    def residuals(self, Q: np.ndarray) -> list[np.ndarray]:
        return [c.residual(Q) for c in self.constraints]

    def residual(self, Q: np.ndarray) -> np.ndarray:
        if not self.constraints:
            return np.zeros((0, Q.shape[1]))
        return np.concatenate(self.residuals(Q))

    def jacobian(self, Q: np.ndarray) -> np.ndarray:
        d, n = Q.shape
        if not self.constraints:
            return np.zeros((0, d, n))
        return np.concatenate([c.jacobian(Q) for c in self.constraints])

    def violation(self, Q: np.ndarray) -> np.ndarray:
        """Per-lane ``max_i ||F_i||_inf / eps_i`` (<= 1 means satisfied)."""
        out = np.zeros(Q.shape[1])
        for c, tol, r in zip(self.constraints, self.tolerances(), self.residuals(Q)):
            if r.shape[0]:
                out = np.maximum(out, np.abs(r).max(axis=0) / tol)
        return out

    def max_residual(self, Q: np.ndarray) -> np.ndarray:
        """Per-lane largest absolute residual entry across constraints."""
        r = self.residual(Q)
        return np.abs(r).max(axis=0) if r.shape[0] else np.zeros(Q.shape[1])

    def satisfied(self, Q: np.ndarray) -> np.ndarray:
        ok = np.ones(Q.shape[1], dtype=bool)
        for tol, r in zip(self.tolerances(), self.residuals(Q)):
            if r.shape[0]:
                ok &= np.abs(r).max(axis=0) <= tol
        return ok

    def satisfied_scalar(self, q: np.ndarray) -> bool:
        return all(
            (np.abs(c.residual_scalar(q)).max() if c.dim else 0.0) <= tol
            for c, tol in zip(self.constraints, self.tolerances())
        )

    def residual_scalar(self, q: np.ndarray) -> np.ndarray:
        if not self.constraints:
            return np.zeros(0)
        return np.concatenate([c.residual_scalar(q) for c in self.constraints])

    def to_list(self) -> list[dict]:
        return [c.to_dict() for c in self.constraints]


def evaluate(constraint, Q: np.ndarray) -> np.ndarray:
    """Residual block ``(k, n)`` of a constraint or a constraint set."""
    return constraint.residual(Q)


def jacobian(constraint, Q: np.ndarray) -> np.ndarray:
    """Jacobian block ``(k, d, n)`` of a constraint or a constraint set."""
    return constraint.jacobian(Q)


def _transform(data):
    return RigidTransform.from_dict(data) if data is not None else RigidTransform.identity()


def constraint_from_dict(data: dict, model: KinematicModel | None) -> Constraint:
    kind = data["kind"]
    tol = data.get("tolerance")
    if kind == "tsr":
        return TSRConstraint(model, data["frame"], _transform(data.get("T0_w")), _transform(data.get("Tw_e")),
                             data.get("bounds"), tol)
    if kind == "relative_pose":
        return RelativePoseConstraint(model, data["frame_a"], data["frame_b"], _transform(data.get("T_ref")),
                                      data.get("bounds"), tol)
    if kind == "closed_link":
        a, b = data["point_a"], data["point_b"]
        return ClosedLinkConstraint(model, (a["frame"], a.get("local", (0, 0, 0))),
                                    (b["frame"], b.get("local", (0, 0, 0))), data["length"], tol)
    if kind == "com_polygon":
        return ComPolygonConstraint(model, data["vertices"], tol)
    if kind == "affine":
        return AffineConstraint(data["A"], data["b"], tol)
    raise ValueError(f"unknown constraint kind {kind!r}")


def constraint_set_from_list(items, model: KinematicModel | None, epsilon: float = 1e-4) -> ConstraintSet:
    return ConstraintSet([constraint_from_dict(d, model) for d in items], epsilon,
                         dof=model.dof if model is not None else None)
