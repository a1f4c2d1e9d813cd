"""SO(3)/SE(3) helpers: rigid transforms and the regularized log/exp maps.

Scalar routines take ``(3, 3)`` rotations and ``(3,)`` vectors.  Batch
routines (suffix ``_batch``) keep lanes on the last axis: rotations are
``(3, 3, n)`` and vectors ``(3, n)``, so entry ``(i, j)`` of every lane is
contiguous in memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this angle 1/sinc and friends switch to their Taylor expansions.
TAYLOR_THRESHOLD = 1e-4
# Within this distance of pi the axis is read off the symmetric part instead.
NEAR_PI = 1e-6


def skew(v) -> np.ndarray:
    """Hat operator: 3-vector to skew-symmetric matrix."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S: np.ndarray) -> np.ndarray:
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_to_matrix(rpy) -> np.ndarray:
    """Fixed-axis roll/pitch/yaw: R = Rz(yaw) Ry(pitch) Rx(roll)."""
    r, p, y = rpy
    return rot_z(y) @ rot_y(p) @ rot_x(r)


def matrix_to_rpy(R: np.ndarray) -> np.ndarray:
    pitch = math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0]))
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def exp_so3(w) -> np.ndarray:
    """Rodrigues' formula with series coefficients near zero."""
    w = np.asarray(w, dtype=float)
    theta2 = float(w @ w)
    theta = math.sqrt(theta2)
    if theta < TAYLOR_THRESHOLD:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    K = skew(w)
    return np.eye(3) + a * K + b * (K @ K)


def log_so3(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to axis-angle vector with angle in [0, pi].

    The angle comes from ``atan2`` of the skew and trace parts, which keeps
    full relative precision for tiny rotations.  Below ``TAYLOR_THRESHOLD``
    the reciprocal sinc is replaced by ``1 + theta^2 / 6``.
    """
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = math.sqrt(float(w @ w))
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    theta = math.atan2(s, c)
    if theta < TAYLOR_THRESHOLD:
        return (1.0 + theta * theta / 6.0) * w
    if math.pi - theta < NEAR_PI:
        return theta * _axis_near_pi(R, w)
    return (theta / s) * w


def _axis_near_pi(R: np.ndarray, w: np.ndarray) -> np.ndarray:
    # sym((R + I) / 2) = u u^T + O((pi - theta)^2); the skew part would leak O(pi - theta).
    B = 0.25 * (R + R.T) + 0.5 * np.eye(3)
    j = int(np.argmax(np.diag(B)))
    u = B[:, j] / math.sqrt(max(B[j, j], 1e-300))
    u = u / np.linalg.norm(u)
    if float(u @ w) < 0.0:
        u = -u
    return u


def rotation_angle(R: np.ndarray) -> float:
    return float(np.linalg.norm(log_so3(R)))


def exp_so3_batch(w: np.ndarray) -> np.ndarray:
    """Lane-parallel Rodrigues: ``(3, n)`` -> ``(3, 3, n)``."""
    theta2 = np.einsum("in,in->n", w, w)
    theta = np.sqrt(theta2)
    small = theta < TAYLOR_THRESHOLD
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    K = skew_batch(w)
    KK = matmul_batch(K, K)
    n = w.shape[1]
    eye = np.broadcast_to(np.eye(3)[:, :, None], (3, 3, n))
    return eye + a * K + b * KK


def log_so3_batch(R: np.ndarray) -> np.ndarray:
    """Lane-parallel log map ``(3, 3, n)`` -> ``(3, n)``; branch-free select."""
    w = 0.5 * np.stack([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = np.sqrt(np.einsum("in,in->n", w, w))
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    theta = np.arctan2(s, c)
    small = theta < TAYLOR_THRESHOLD
    near_pi = (np.pi - theta) < NEAR_PI
    scale = np.where(small, 1.0 + theta * theta / 6.0, theta / np.where(small, 1.0, s))
    out = scale * w
    if near_pi.any():
        for lane in np.flatnonzero(near_pi):
            out[:, lane] = theta[lane] * _axis_near_pi(R[:, :, lane], w[:, lane])
    return out


def skew_batch(w: np.ndarray) -> np.ndarray:
    z = np.zeros_like(w[0])
    return np.stack(
        [
            np.stack([z, -w[2], w[1]]),
            np.stack([w[2], z, -w[0]]),
            np.stack([-w[1], w[0], z]),
        ]
    )


def matmul_batch(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``(a, b, n) @ (b, c, n)`` per lane."""
    return np.einsum("ikn,kjn->ijn", A, B)


def matvec_batch(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("ikn,kn->in", A, v)


def cross_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product along axis 0; broadcasts over trailing axes."""
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


@dataclass(frozen=True)
class RigidTransform:
    """An SE(3) pose as a rotation matrix plus translation (meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_xyz_rpy(cls, xyz=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)) -> RigidTransform:
        return cls(rpy_to_matrix(rpy), np.asarray(xyz, dtype=float))

    @classmethod
    def from_translation(cls, xyz) -> RigidTransform:
        return cls(np.eye(3), np.asarray(xyz, dtype=float))

    @classmethod
    def from_matrix(cls, M: np.ndarray) -> RigidTransform:
        return cls(M[:3, :3], M[:3, 3])

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def compose(self, other: RigidTransform) -> RigidTransform:
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    __matmul__ = compose

    def inverse(self) -> RigidTransform:
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def apply(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def to_dict(self) -> dict:
        return {
            "xyz": [float(x) for x in self.translation],
            "rpy": [float(x) for x in matrix_to_rpy(self.rotation)],
        }

    @classmethod
    def from_dict(cls, data: dict | None) -> RigidTransform:
        if data is None:
            return cls.identity()
        return cls.from_xyz_rpy(data.get("xyz", (0.0, 0.0, 0.0)), data.get("rpy", (0.0, 0.0, 0.0)))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


def pose_error(T: RigidTransform) -> np.ndarray:
    """Stack ``[t; log(R)]`` into the 6-vector displacement of a pose error."""
    return np.concatenate([T.translation, log_so3(T.rotation)])
