"""Scenes of primitive obstacles and batch validity checking.

A configuration is valid when every joint lies within its limits (inclusive)
and no robot collision sphere overlaps an obstacle or a sphere on a
self-collision-listed link.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .kinematics import KinematicModel
from .lie import RigidTransform


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")

    def packed(self):
        return K.O_SPHERE, self.center, np.eye(3), np.array([self.radius, 0.0, 0.0]), self.radius

    def scaled(self, f: float) -> Sphere:
        return Sphere(self.center, self.radius * f)

    def to_dict(self):
        return {"type": "sphere", "center": self.center.tolist(), "radius": float(self.radius)}


@dataclass(frozen=True)
class AxisAlignedBox:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=float).reshape(3)
        hi = np.asarray(self.max, dtype=float).reshape(3)
        if np.any(hi <= lo):
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def center(self):
        return 0.5 * (self.min + self.max)

    @property
    def half_extents(self):
        return 0.5 * (self.max - self.min)

    @property
    def rotation(self):
        return np.eye(3)

    def packed(self):
        h = self.half_extents
        return K.O_BOX, self.center, np.eye(3), h, float(np.linalg.norm(h))

    def scaled(self, f: float) -> AxisAlignedBox:
        c, h = self.center, self.half_extents * f
        return AxisAlignedBox(c - h, c + h)

    def to_dict(self):
        return {"type": "aabb", "min": self.min.tolist(), "max": self.max.tolist()}


@dataclass(frozen=True)
class OrientedBox:
    pose: RigidTransform
    half_extents: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(h <= 0):
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "half_extents", h)

    @property
    def center(self):
        return self.pose.translation

    @property
    def rotation(self):
        return self.pose.rotation

    def packed(self):
        h = self.half_extents
        return K.O_BOX, self.center, self.rotation, h, float(np.linalg.norm(h))

    def scaled(self, f: float) -> OrientedBox:
        return OrientedBox(self.pose, self.half_extents * f)

    def to_dict(self):
        return {"type": "obb", "pose": self.pose.to_dict(), "half_extents": self.half_extents.tolist()}


def obstacle_from_dict(d: dict):
    kind = d["type"]
    if kind == "sphere":
        return Sphere(d["center"], float(d["radius"]))
    if kind == "aabb":
        return AxisAlignedBox(d["min"], d["max"])
    if kind == "obb":
        return OrientedBox(RigidTransform.from_dict(d["pose"]), d["half_extents"])
    raise ValueError(f"unknown obstacle type {kind!r}")


@dataclass
class Scene:
    obstacles: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict | None) -> Scene:
        return cls([obstacle_from_dict(o) for o in (data or {}).get("obstacles", [])])

    @classmethod
    def from_json(cls, path) -> Scene:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"obstacles": [o.to_dict() for o in self.obstacles]}

    def scaled(self, f: float) -> Scene:
        return Scene([o.scaled(f) for o in self.obstacles])

    def __len__(self):
        return len(self.obstacles)


# -- scalar oracle ---------------------------------------------------------


def distance_sphere_box(c, r: float, box) -> float:
    """Clearance between a sphere surface and a box (negative when penetrating)."""
    p = box.rotation.T @ (np.asarray(c, dtype=float) - box.center)
    e = np.abs(p) - box.half_extents
    outside = math.sqrt(float(np.sum(np.maximum(e, 0.0) ** 2)))
    return outside + min(float(e.max()), 0.0) - r


def distance_sphere_sphere(c1, r1: float, c2, r2: float) -> float:
    return float(np.linalg.norm(np.asarray(c1, dtype=float) - np.asarray(c2, dtype=float))) - (r1 + r2)


def _obstacle_clearance(c, r, o) -> float:
    if isinstance(o, Sphere):
        return distance_sphere_sphere(c, r, o.center, o.radius)
    return distance_sphere_box(c, r, o)


def clearance_scalar(model: KinematicModel, scene: Scene, q) -> float:
    """Minimum clearance over obstacles and self-collision pairs (numpy reference)."""
    centers = model.sphere_centers(q)
    radii = model.sphere_radii
    best = math.inf
    for c, r in zip(centers, radii):
        for o in scene.obstacles:
            best = min(best, _obstacle_clearance(c, r, o))
    for a, b in model.self_collision_pairs:
        best = min(best, distance_sphere_sphere(centers[a], radii[a], centers[b], radii[b]))
    return best


def config_valid_scalar(model: KinematicModel, scene: Scene, q, margin: float = 0.0) -> bool:
    q = np.asarray(q, dtype=float)
    if not bool(model.within_limits(q)):
        return False
    return clearance_scalar(model, scene, q) >= margin


# -- compiled batch path -----------------------------------------------------


def packed_model(model: KinematicModel) -> tuple:
    return model.kernel_pack()


class CollisionChecker:
    """Validity oracle for one (model, scene) pair; ``margin`` inflates obstacles."""

    def __init__(self, model: KinematicModel, scene: Scene | None = None, margin: float = 0.0):
        self.model = model
        self.scene = scene or Scene()
        self.margin = float(margin)
        self._mp = packed_model(model)
        self._sc = K.pack_scene(self.scene)

    def valid(self, Q: np.ndarray) -> np.ndarray:
        Q = np.ascontiguousarray(Q, dtype=float)
        self.model.check_dimension(Q)
        out = np.empty(Q.shape[1], dtype=np.bool_)
        K.valid_kernel(Q, self._mp, self._sc, self.margin, out)
        return out

    def clearance(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-lane minimum clearance and joint-limit flags."""
        Q = np.ascontiguousarray(Q, dtype=float)
        self.model.check_dimension(Q)
        out = np.empty(Q.shape[1])
        lim = np.empty(Q.shape[1], dtype=np.bool_)
        K.clearance_kernel(Q, self._mp, self._sc, out, lim)
        return out, lim


def config_valid(model: KinematicModel, scene: Scene | None, Q: np.ndarray, margin: float = 0.0) -> np.ndarray:
    """Validity mask ``(n,)`` for a ``(d, n)`` block."""
    return CollisionChecker(model, scene, margin).valid(Q)
