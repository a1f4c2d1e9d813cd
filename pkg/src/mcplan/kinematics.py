"""Robot description, forward kinematics, Jacobians and center of mass.

Robots are declared in JSON::

    {"name": ..., "floating_base": false,
     "joints": [{"name", "parent", "child", "kind", "axis",
                 "origin": {"xyz", "rpy"}, "limits": [lo, hi]}],
     "links": [{"name", "mass", "com", "spheres": [{"center", "radius"}]}],
     "frames": [{"name", "link", "offset": {"xyz", "rpy"}}],
     "self_collision_pairs": [[link_a, link_b], ...]}   # optional

Joint frames follow the URDF convention: the child link frame is the joint
frame after the joint motion.  A floating base prepends six configuration
entries ``(x, y, z, roll, pitch, yaw)``; internally it is a chain of three
prismatic and three revolute virtual joints feeding the root link.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .lie import RigidTransform, cross_batch, exp_so3, skew

REVOLUTE, PRISMATIC, FIXED = "revolute", "prismatic", "fixed"
_BASE_PREFIX = "__floating_"
DEFAULT_BASE_LIMITS = [(-10.0, 10.0)] * 3 + [(-np.pi, np.pi), (-1.5, 1.5), (-np.pi, np.pi)]


@dataclass(frozen=True)
class JointSpec:
    name: str
    parent: str
    child: str
    kind: str
    axis: np.ndarray
    origin: RigidTransform
    limits: tuple[float, float] = (-np.inf, np.inf)

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC, FIXED):
            raise ValueError(f"joint {self.name}: unknown kind {self.kind!r}")
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if self.kind != FIXED and abs(norm - 1.0) > 1e-9:
            if norm == 0.0:
                raise ValueError(f"joint {self.name}: zero axis")
            axis = axis / norm
        object.__setattr__(self, "axis", axis)
        lo, hi = self.limits
        if lo > hi:
            raise ValueError(f"joint {self.name}: limits {self.limits} have lo > hi")


@dataclass(frozen=True)
class LinkSpec:
    name: str
    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    spheres: tuple = ()

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError(f"link {self.name}: negative mass")
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float))
        for center, radius in self.spheres:
            if radius <= 0:
                raise ValueError(f"link {self.name}: sphere radius must be positive")


class BatchPoses:
    """Homogeneous link transforms of a configuration block.

    Stored as ``(L, n, 4, 4)`` so each joint update is one stacked matmul;
    the accessors hand out lanes-last (SoA) views.
    """

    def __init__(self, T: np.ndarray):
        self.T = T

    @property
    def lanes(self) -> int:
        return self.T.shape[1]

    def rotation(self, li: int) -> np.ndarray:
        return self.T[li, :, :3, :3].transpose(1, 2, 0)

    def translation(self, li: int) -> np.ndarray:
        return self.T[li, :, :3, 3].T


class KinematicModel:
    """Immutable serial/tree robot with optional floating base."""

    def __init__(
        self,
        name: str,
        joints: list[JointSpec],
        links: list[LinkSpec],
        frames: dict[str, tuple[str, RigidTransform]] | None = None,
        floating_base: bool = False,
        base_limits=None,
        self_collision_pairs=None,
    ):
        self.name = name
        self.floating_base = floating_base
        self.links = list(links)
        self.link_index = {l.name: i for i, l in enumerate(self.links)}
        if len(self.link_index) != len(self.links):
            raise ValueError("duplicate link names")
        children = {j.child for j in joints}
        roots = [l.name for l in self.links if l.name not in children]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root link, found {roots}")
        self.root = roots[0]

        all_joints = []
        if floating_base:
            base_limits = base_limits or DEFAULT_BASE_LIMITS
            virtual = [
                ("x", PRISMATIC, (1, 0, 0), 0),
                ("y", PRISMATIC, (0, 1, 0), 1),
                ("z", PRISMATIC, (0, 0, 1), 2),
                ("yaw", REVOLUTE, (0, 0, 1), 5),
                ("pitch", REVOLUTE, (0, 1, 0), 4),
                ("roll", REVOLUTE, (1, 0, 0), 3),
            ]
            parent = _BASE_PREFIX + "world"
            extra_links = [LinkSpec(parent)]
            for i, (tag, kind, axis, qi) in enumerate(virtual):
                child = self.root if i == 5 else _BASE_PREFIX + tag
                if i < 5:
                    extra_links.append(LinkSpec(child))
                all_joints.append(
                    (
                        JointSpec(_BASE_PREFIX + tag, parent, child, kind, np.array(axis, float),
                                  RigidTransform.identity(), tuple(base_limits[qi])),
                        qi,
                    )
                )
                parent = child
            self.links = extra_links + self.links
            self.link_index = {l.name: i for i, l in enumerate(self.links)}
            offset = 6
        else:
            offset = 0

        # Topological order from the root outward.
        by_parent: dict[str, list[JointSpec]] = {}
        for j in joints:
            if j.parent not in self.link_index or j.child not in self.link_index:
                raise ValueError(f"joint {j.name} references unknown link")
            by_parent.setdefault(j.parent, []).append(j)
        ordered = []
        stack = [self.root]
        while stack:
            link = stack.pop(0)
            for j in by_parent.get(link, []):
                ordered.append(j)
                stack.append(j.child)
        if len(ordered) != len(joints):
            raise ValueError("joint graph is not a tree rooted at the base link")
        # Configuration indices follow declaration order, evaluation stays topological.
        movable = [j.name for j in joints if j.kind != FIXED]
        slot = {name: offset + k for k, name in enumerate(movable)}
        for j in ordered:
            all_joints.append((j, -1 if j.kind == FIXED else slot[j.name]))
        self.dof = offset + len(movable)
        self.joints = [j for j, _ in all_joints]
        self.q_index = np.array([i for _, i in all_joints], dtype=int)

        self.lower = np.full(self.dof, -np.inf)
        self.upper = np.full(self.dof, np.inf)
        for j, i in all_joints:
            if i >= 0:
                self.lower[i], self.upper[i] = j.limits

        n_links = len(self.links)
        self.parent_joint = [-1] * n_links
        self.joint_parent_link = np.array([self.link_index[j.parent] for j in self.joints], dtype=int)
        self.joint_child_link = np.array([self.link_index[j.child] for j in self.joints], dtype=int)
        for ji, c in enumerate(self.joint_child_link):
            self.parent_joint[c] = ji
        self.world_link = self.link_index[self.root] if not floating_base else self.link_index[_BASE_PREFIX + "world"]
        # ancestors[l]: movable joint indices on the path root -> l (joint order)
        self.ancestor_joints: list[list[int]] = []
        for l in range(n_links):
            chain = []
            cur = l
            while self.parent_joint[cur] >= 0:
                ji = self.parent_joint[cur]
                if self.q_index[ji] >= 0:
                    chain.append(ji)
                cur = self.joint_parent_link[ji]
            self.ancestor_joints.append(chain[::-1])

        self._precompute_joint_constants()

        self.frames: dict[str, tuple[int, RigidTransform]] = {}
        for l in self.links:
            if not l.name.startswith(_BASE_PREFIX):
                self.frames[l.name] = (self.link_index[l.name], RigidTransform.identity())
        for fname, (lname, offset_T) in (frames or {}).items():
            if lname not in self.link_index:
                raise ValueError(f"frame {fname} references unknown link {lname}")
            self.frames[fname] = (self.link_index[lname], offset_T)

        self.total_mass = float(sum(l.mass for l in self.links))
        self._mass_links = [i for i, l in enumerate(self.links) if l.mass > 0]

        # Collision spheres, flattened.
        centers, radii, owners = [], [], []
        for i, l in enumerate(self.links):
            for c, r in l.spheres:
                centers.append(np.asarray(c, dtype=float))
                radii.append(float(r))
                owners.append(i)
        self.sphere_offsets = np.array(centers).reshape(-1, 3)
        self.sphere_radii = np.array(radii, dtype=float)
        self.sphere_links = np.array(owners, dtype=int)
        self.self_collision_pairs = self._self_collision_pairs(self_collision_pairs)

    def _precompute_joint_constants(self):
        # Homogeneous local transform: revolute H0 + H1 cos q + H2 sin q,
        # prismatic H0 + H1 q, fixed H0 (joint origin folded in).
        self._jconst = []
        for j in self.joints:
            O = j.origin.as_matrix()
            if j.kind == REVOLUTE:
                A = np.outer(j.axis, j.axis)
                H0, H1, H2 = np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4))
                H0[:3, :3], H0[3, 3] = A, 1.0
                H1[:3, :3] = np.eye(3) - A
                H2[:3, :3] = skew(j.axis)
                self._jconst.append((O @ H0, O @ H1, O @ H2))
            elif j.kind == PRISMATIC:
                H1 = np.zeros((4, 4))
                H1[:3, 3] = j.axis
                self._jconst.append((O, O @ H1, None))
            else:
                self._jconst.append((O, None, None))
        self._axes = np.array([j.axis if j.kind != FIXED else np.zeros(3) for j in self.joints])
        self._revolute = np.array([j.kind == REVOLUTE for j in self.joints])
        # Stacked constants for evaluating every movable joint's local transform at once.
        movable = [ji for ji, j in enumerate(self.joints) if j.kind != FIXED]
        self._movable = np.array(movable, dtype=int)
        self._movable_slot = {ji: s for s, ji in enumerate(movable)}
        self._movable_q = self.q_index[movable] if movable else np.zeros(0, dtype=int)
        zeros = np.zeros((4, 4))
        self._H0 = np.array([self._jconst[ji][0] for ji in movable]).reshape(-1, 4, 4)
        self._H1 = np.array([self._jconst[ji][1] for ji in movable]).reshape(-1, 4, 4)
        self._H2 = np.array(
            [self._jconst[ji][2] if self._jconst[ji][2] is not None else zeros for ji in movable]
        ).reshape(-1, 4, 4)
        rev = self._revolute[movable] if movable else np.zeros(0, dtype=bool)
        self._mov_rev = rev[:, None]

    def _self_collision_pairs(self, explicit) -> np.ndarray:
        sphere_link_set = sorted(set(self.sphere_links.tolist()))
        if explicit is not None:
            link_pairs = {
                tuple(sorted((self.link_index[a], self.link_index[b]))) for a, b in explicit
            }
        else:
            adjacent = set()
            for ji in range(len(self.joints)):
                p, c = self.joint_parent_link[ji], self.joint_child_link[ji]
                adjacent.add(tuple(sorted((int(p), int(c)))))
            link_pairs = {
                (a, b)
                for ai, a in enumerate(sphere_link_set)
                for b in sphere_link_set[ai + 1 :]
                if (a, b) not in adjacent
            }
        pairs = []
        for a, b in sorted(link_pairs):
            ia = np.flatnonzero(self.sphere_links == a)
            ib = np.flatnonzero(self.sphere_links == b)
            for i in ia:
                for k in ib:
                    pairs.append((i, k))
        return np.array(pairs, dtype=int).reshape(-1, 2)

    # -- loading ---------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> KinematicModel:
        joints = [
            JointSpec(
                name=j["name"],
                parent=j["parent"],
                child=j["child"],
                kind=j.get("kind", REVOLUTE),
                axis=np.asarray(j.get("axis", (0.0, 0.0, 1.0)), dtype=float),
                origin=RigidTransform.from_dict(j.get("origin")),
                limits=tuple(j.get("limits", (-np.inf, np.inf))),
            )
            for j in data["joints"]
        ]
        links = [
            LinkSpec(
                name=l["name"],
                mass=float(l.get("mass", 0.0)),
                com=np.asarray(l.get("com", (0.0, 0.0, 0.0)), dtype=float),
                spheres=tuple(
                    (tuple(float(x) for x in s["center"]), float(s["radius"])) for s in l.get("spheres", [])
                ),
            )
            for l in data["links"]
        ]
        frames = {}
        for f in data.get("frames", []):
            off = f.get("offset")
            if off is None:
                T = RigidTransform.identity()
            elif isinstance(off, dict):
                T = RigidTransform.from_dict(off)
            else:
                T = RigidTransform.from_translation(off)
            frames[f["name"]] = (f["link"], T)
        model = cls(
            data.get("name", "robot"),
            joints,
            links,
            frames,
            floating_base=bool(data.get("floating_base", False)),
            base_limits=data.get("base_limits"),
            self_collision_pairs=data.get("self_collision_pairs"),
        )
        if data.get("require_mass") and model.total_mass <= 0:
            raise ValueError("model has zero total mass")
        return model

    @classmethod
    def from_json(cls, path) -> KinematicModel:
        return cls.from_dict(json.loads(Path(path).read_text()))

    # -- configuration helpers ------------------------------------------

    def check_dimension(self, q: np.ndarray) -> None:
        if q.shape[0] != self.dof:
            raise ValueError(f"{self.name}: expected configuration dimension {self.dof}, got {q.shape[0]}")

    def within_limits(self, q: np.ndarray) -> np.ndarray | bool:
        """Strict per-lane limit test; accepts ``(d,)`` or ``(d, n)``."""
        if q.ndim == 1:
            return bool(np.all((q >= self.lower) & (q <= self.upper)))
        return np.all((q >= self.lower[:, None]) & (q <= self.upper[:, None]), axis=0)

    def frame_link(self, frame: str) -> tuple[int, RigidTransform]:
        try:
            return self.frames[frame]
        except KeyError:
            raise KeyError(f"{self.name}: unknown frame {frame!r}") from None

    # -- scalar kinematics ----------------------------------------------

    def joint_transform(self, ji: int, value: float) -> RigidTransform:
        j = self.joints[ji]
        if j.kind == REVOLUTE:
            motion = RigidTransform(exp_so3(j.axis * value), np.zeros(3))
        elif j.kind == PRISMATIC:
            motion = RigidTransform(np.eye(3), j.axis * value)
        else:
            motion = RigidTransform.identity()
        return j.origin @ motion

    def forward_kinematics(self, q) -> list[RigidTransform]:
        """World pose of every link (index-aligned with ``self.links``)."""
        q = np.asarray(q, dtype=float)
        self.check_dimension(q)
        poses: list[RigidTransform | None] = [None] * len(self.links)
        poses[self.world_link] = RigidTransform.identity()
        for ji, j in enumerate(self.joints):
            qi = self.q_index[ji]
            value = q[qi] if qi >= 0 else 0.0
            poses[self.joint_child_link[ji]] = poses[self.joint_parent_link[ji]] @ self.joint_transform(ji, value)
        return poses

    def link_poses(self, q) -> dict[str, RigidTransform]:
        return {
            l.name: T for l, T in zip(self.links, self.forward_kinematics(q)) if not l.name.startswith(_BASE_PREFIX)
        }

    def frame_pose(self, q, frame: str) -> RigidTransform:
        li, offset = self.frame_link(frame)
        return self.forward_kinematics(q)[li] @ offset

    def geometric_jacobian(self, q, frame: str) -> np.ndarray:
        """6 x d world-frame Jacobian of ``frame``: rows 0-2 linear, 3-5 angular."""
        q = np.asarray(q, dtype=float)
        li, offset = self.frame_link(frame)
        poses = self.forward_kinematics(q)
        p = (poses[li] @ offset).translation
        return self._scalar_point_jacobian(poses, li, p)

    def _scalar_point_jacobian(self, poses, li: int, p: np.ndarray) -> np.ndarray:
        J = np.zeros((6, self.dof))
        for ji in self.ancestor_joints[li]:
            j = self.joints[ji]
            T = poses[self.joint_child_link[ji]]
            a = T.rotation @ j.axis
            col = self.q_index[ji]
            if j.kind == REVOLUTE:
                J[:3, col] = np.cross(a, p - T.translation)
                J[3:, col] = a
            else:
                J[:3, col] = a
        return J

    def point_jacobian(self, q, link: str, local_point) -> tuple[np.ndarray, np.ndarray]:
        """World position of a link-fixed point and its 3 x d Jacobian."""
        li = self.link_index[link]
        poses = self.forward_kinematics(q)
        p = poses[li].apply(local_point)
        return p, self._scalar_point_jacobian(poses, li, p)[:3]

    def center_of_mass(self, q) -> np.ndarray:
        if self.total_mass <= 0:
            raise ValueError(f"{self.name}: total mass is zero")
        poses = self.forward_kinematics(q)
        acc = np.zeros(3)
        for li in self._mass_links:
            acc += self.links[li].mass * poses[li].apply(self.links[li].com)
        return acc / self.total_mass

    def com_jacobian(self, q) -> np.ndarray:
        if self.total_mass <= 0:
            raise ValueError(f"{self.name}: total mass is zero")
        poses = self.forward_kinematics(q)
        J = np.zeros((3, self.dof))
        for li in self._mass_links:
            link = self.links[li]
            p = poses[li].apply(link.com)
            J += link.mass * self._scalar_point_jacobian(poses, li, p)[:3]
        return J / self.total_mass

    # -- batch kinematics -----------------------------------------------

    @lru_cache(maxsize=64)
    def _joints_for(self, link_ids: frozenset) -> tuple[int, ...]:
        needed = set()
        for l in link_ids:
            cur = l
            while self.parent_joint[cur] >= 0:
                ji = self.parent_joint[cur]
                needed.add(ji)
                cur = self.joint_parent_link[ji]
        return tuple(sorted(needed))

    def batch_fk(self, Q: np.ndarray, link_ids=None) -> BatchPoses:
        """Lane-parallel FK for ``Q`` of shape ``(d, n)``.

        Only joints on the paths to ``link_ids`` are evaluated (all links when
        ``None``); transforms of other links are left uninitialized.
        """
        self.check_dimension(Q)
        n = Q.shape[1]
        T = np.empty((len(self.links), n, 4, 4))
        T[self.world_link] = np.eye(4)
        order = range(len(self.joints)) if link_ids is None else self._joints_for(frozenset(link_ids))
        # Local transforms of all movable joints in one stacked evaluation:
        # revolute H0 + H1 cos q + H2 sin q, prismatic H0 + H1 q.
        qm = Q[self._movable_q]  # (m, n)
        c = np.where(self._mov_rev, np.cos(qm), qm)[:, :, None, None]
        s = np.sin(qm)[:, :, None, None]
        local = self._H0[:, None] + self._H1[:, None] * c + self._H2[:, None] * s
        slot = self._movable_slot
        for ji in order:
            Tp = T[self.joint_parent_link[ji]]
            out = T[self.joint_child_link[ji]]
            k = slot.get(ji)
            if k is None:
                np.matmul(Tp, self._jconst[ji][0], out=out)
            else:
                np.matmul(Tp, local[k], out=out)
        return BatchPoses(T)

    def batch_frame_transform(self, Q: np.ndarray, frame: str, poses: BatchPoses | None = None) -> np.ndarray:
        """Stacked ``(n, 4, 4)`` world transforms of a named frame."""
        li, offset = self.frame_link(frame)
        if poses is None:
            poses = self.batch_fk(Q, (li,))
        return poses.T[li] @ offset.as_matrix()

    def batch_frame_pose(self, Q: np.ndarray, frame: str, poses: BatchPoses | None = None):
        """``(R (3,3,n), t (3,n))`` of a named frame for every lane."""
        Tf = self.batch_frame_transform(Q, frame, poses)
        return Tf[:, :3, :3].transpose(1, 2, 0), Tf[:, :3, 3].T

    def batch_forward_kinematics(self, Q: np.ndarray, frames) -> dict:
        """Requested frames only: name -> ``(R (3,3,n), t (3,n))``."""
        ids = tuple(self.frame_link(f)[0] for f in frames)
        poses = self.batch_fk(Q, ids)
        return {f: self.batch_frame_pose(Q, f, poses) for f in frames}

    def batch_point_jacobian(self, poses: BatchPoses, li: int, p: np.ndarray, angular: bool = False) -> np.ndarray:
        """Jacobian ``(3 or 6, d, n)`` of the world point ``p`` (lanes-first ``(n, 3)``)
        rigidly attached to link ``li``."""
        n = p.shape[0]
        J = np.zeros((6 if angular else 3, self.dof, n))
        anc = self.ancestor_joints[li]
        if not anc:
            return J
        Tj = poses.T[self.joint_child_link[anc]]  # (m, n, 4, 4)
        a = np.einsum("mnij,mj->mni", Tj[:, :, :3, :3], self._axes[anc])
        r = p[None] - Tj[:, :, :3, 3]
        lin = np.stack(
            [
                a[..., 1] * r[..., 2] - a[..., 2] * r[..., 1],
                a[..., 2] * r[..., 0] - a[..., 0] * r[..., 2],
                a[..., 0] * r[..., 1] - a[..., 1] * r[..., 0],
            ]
        )  # (3, m, n)
        rev = self._revolute[anc]
        cols = self.q_index[anc]
        aT = a.transpose(2, 0, 1)
        J[:3, cols] = np.where(rev[None, :, None], lin, aT)
        if angular:
            J[3:, cols] = aT * rev[None, :, None]
        return J

    def batch_geometric_jacobian(self, Q: np.ndarray, frame: str) -> np.ndarray:
        li, _ = self.frame_link(frame)
        poses = self.batch_fk(Q, (li,))
        Tf = self.batch_frame_transform(Q, frame, poses)
        return self.batch_point_jacobian(poses, li, Tf[:, :3, 3], angular=True)

    def batch_center_of_mass(self, Q: np.ndarray, with_jacobian: bool = False):
        """CoM ``(3, n)`` and optionally its Jacobian ``(3, d, n)``.

        The Jacobian sums per joint: ``a x (sum_l m_l p_l - M_sub o)`` over the
        links ``l`` downstream of the joint, avoiding an O(links x joints) loop.
        """
        if self.total_mass <= 0:
            raise ValueError(f"{self.name}: total mass is zero")
        poses = self.batch_fk(Q, tuple(self._mass_links))
        n = Q.shape[1]
        L = len(self.links)
        mp = np.zeros((L, n, 3))
        mass = np.zeros(L)
        for li in self._mass_links:
            link = self.links[li]
            mp[li] = link.mass * (poses.T[li, :, :3, :3] @ link.com + poses.T[li, :, :3, 3])
            mass[li] = link.mass
        com = mp.sum(axis=0) / self.total_mass
        if not with_jacobian:
            return com.T
        # Subtree accumulation, leaves first.
        for ji in range(len(self.joints) - 1, -1, -1):
            p, c = self.joint_parent_link[ji], self.joint_child_link[ji]
            mp[p] += mp[c]
            mass[p] += mass[c]
        J = np.zeros((3, self.dof, n))
        for ji, j in enumerate(self.joints):
            col = self.q_index[ji]
            c = self.joint_child_link[ji]
            if col < 0 or mass[c] == 0.0:
                continue
            Tc = poses.T[c]
            a = Tc[:, :3, :3] @ j.axis
            if j.kind == REVOLUTE:
                J[:, col] = np.cross(a, mp[c] - mass[c] * Tc[:, :3, 3]).T
            else:
                J[:, col] = (a * mass[c]).T
        return com.T, J / self.total_mass

    def batch_sphere_centers(self, Q: np.ndarray, lanes_first: bool = False) -> np.ndarray:
        """World centers of every collision sphere: ``(S, 3, n)``, or ``(S, n, 3)``
        with ``lanes_first``."""
        poses = self.batch_fk(Q, tuple(sorted(set(self.sphere_links.tolist()))))
        T = poses.T[self.sphere_links]  # (S, n, 4, 4)
        c = np.einsum("snij,sj->sni", T[:, :, :3, :3], self.sphere_offsets) + T[:, :, :3, 3]
        return c if lanes_first else c.transpose(0, 2, 1)

    # -- compiled path ----------------------------------------------------

    def kernel_pack(self) -> tuple:
        """Flat array tuple consumed by the compiled kernels (built once)."""
        pack = self.__dict__.get("_kernel_pack")
        if pack is None:
            from . import _kernels

            pack = self.__dict__["_kernel_pack"] = _kernels.pack_model(self)
        return pack

    def compiled_fk(self, Q: np.ndarray) -> np.ndarray:
        """Link transforms ``(L, 3, 4, n)`` from the compiled per-lane kernel."""
        from . import _kernels

        Q = np.ascontiguousarray(Q, dtype=float)
        self.check_dimension(Q)
        out = np.empty((len(self.links), 3, 4, Q.shape[1]))
        _kernels.fk_kernel(Q, self.kernel_pack(), out)
        return out

    def sphere_centers(self, q) -> np.ndarray:
        poses = self.forward_kinematics(q)
        return np.array([poses[li].apply(c) for li, c in zip(self.sphere_links, self.sphere_offsets)]).reshape(-1, 3)


ROBOT_NAMES = ("panda7", "panda7_marker", "dual_arm14", "legged_chain")


def load_robot(name_or_path) -> KinematicModel:
    """Load a shipped robot by name or any robot JSON by path."""
    return KinematicModel.from_dict(robot_dict(name_or_path))


@lru_cache(maxsize=16)
def _shipped(name: str) -> str:
    return resources.files("mcplan.data.robots").joinpath(f"{name}.json").read_text()


def robot_dict(name_or_path) -> dict:
    s = str(name_or_path)
    if s in ROBOT_NAMES:
        return json.loads(_shipped(s))
    return json.loads(Path(s).read_text())


@lru_cache(maxsize=16)
def cached_robot(name_or_path: str) -> KinematicModel:
    return load_robot(name_or_path)
