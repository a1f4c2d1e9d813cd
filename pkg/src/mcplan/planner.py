"""Bidirectional constrained RRT-Connect with lane-parallel extension.

Each extension steers toward the target, seeds ``n`` particles along the
extension direction, keeps the first one to project onto the manifold, then
validates the edge by projecting interpolated points in ``n``-wide blocks and
refining until consecutive samples are at most ``resolution`` apart.  Edges
keep their validated samples, so extracted paths are dense.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .batch import lanes_from_env
from .collision import CollisionChecker, Scene
from .constraints import ConstraintSet
from .projection import ProjectionParams, Projector

SOLVED, TIMEOUT, CAPPED = "solved", "timeout", "iteration-capped"


class InvalidEndpoints(ValueError):
    """Start or goal is off the manifold, out of limits or in collision."""


@dataclass(frozen=True)
class PlannerParams:
    range: float = 0.18
    sigma: float | None = None  # default range / 4
    lanes: int = 8
    resolution: float = 0.02
    connect_tolerance: float | None = None  # default resolution
    max_iterations: int = 100_000
    timeout: float | None = 1.0
    seed: int = 0
    dynamic_domain: float | None = None
    collision_margin: float = 0.015
    shortcut: bool = False
    projection: ProjectionParams = field(default_factory=ProjectionParams)

    def __post_init__(self):
        if not 0 < self.resolution < self.range:
            raise ValueError("need 0 < resolution < range")
        if self.lanes not in (1, 4, 8, 16):
            raise ValueError("lanes must be 1, 4, 8 or 16")
        if self.connect_tolerance is not None and self.connect_tolerance < self.projection.epsilon:
            raise ValueError("connect_tolerance below the projection tolerance")

    @property
    def spread(self) -> float:
        return self.range / 4 if self.sigma is None else self.sigma

    @property
    def connect_tol(self) -> float:
        return self.resolution if self.connect_tolerance is None else self.connect_tolerance

    @property
    def depth_cap(self) -> int:
        return math.ceil(math.log2(self.range / self.resolution)) + 2

    def to_dict(self) -> dict:
        return {
            "range": self.range, "sigma": self.sigma, "lanes": self.lanes, "resolution": self.resolution,
            "connect_tolerance": self.connect_tolerance, "max_iterations": self.max_iterations,
            "timeout": self.timeout, "seed": self.seed, "dynamic_domain": self.dynamic_domain,
            "collision_margin": self.collision_margin, "shortcut": self.shortcut,
            "projection": self.projection.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict | None) -> PlannerParams:
        data = dict(data or {})
        proj = ProjectionParams.from_dict(data.pop("projection", None))
        return cls(projection=proj, **data)


@dataclass
class PlanStats:
    iterations: int = 0
    extensions: int = 0
    extensions_ok: int = 0
    proj_iters: int = 0
    wall_time: float = 0.0
    failures: dict = field(default_factory=dict)


@dataclass
class PlanResult:
    status: str
    waypoints: np.ndarray  # (m, d)
    stats: PlanStats

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    def path_length(self) -> float:
        if len(self.waypoints) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)))


class Tree:
    """Growable node array; ``edges[i]`` holds the validated samples strictly
    between ``parent[i]`` and node ``i``."""

    def __init__(self, root: np.ndarray, capacity: int = 256):
        self.nodes = np.empty((capacity, root.shape[0]))
        self.nodes[0] = root
        self.size = 1
        self.parent = [-1]
        self.edges = [np.empty((0, root.shape[0]))]
        self.radius = [math.inf]

    def add(self, q, parent: int, edge: np.ndarray) -> int:
        if self.size == len(self.nodes):
            self.nodes = np.concatenate([self.nodes, np.empty_like(self.nodes)])
        self.nodes[self.size] = q
        self.parent.append(parent)
        self.edges.append(edge)
        self.radius.append(math.inf)
        self.size += 1
        return self.size - 1

    def nearest(self, q) -> int:
        # exact linear scan; argmin keeps the lowest index on ties
        diff = self.nodes[: self.size] - q
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))

    def root_path(self, i: int) -> list[np.ndarray]:
        """Dense samples from the root to node ``i``."""
        chunks = []
        while i > 0:
            chunks.append(self.nodes[i][None])
            chunks.append(self.edges[i])
            i = self.parent[i]
        chunks.append(self.nodes[0][None])
        return np.concatenate(chunks[::-1])


@dataclass
class _Extend:
    ok: bool
    node: int = -1
    reason: str = ""


class Planner:
    def __init__(self, model, scene: Scene | None, cset: ConstraintSet, params: PlannerParams | None = None):
        self.model = model
        self.scene = scene or Scene()
        self.cset = cset
        self.params = params or PlannerParams()
        p = self.params
        self.proj_params = p.projection.with_step_limit(2 * p.range)
        self.projector = Projector(cset, model, self.proj_params)
        self.checker = CollisionChecker(model, self.scene, p.collision_margin)
        self.exact_checker = CollisionChecker(model, self.scene, 0.0)
        self.n = p.lanes
        self.trees: list[Tree] = []

    # -- helpers -------------------------------------------------------------

    def _fail(self, reason: str) -> _Extend:
        f = self.stats.failures
        f[reason] = f.get(reason, 0) + 1
        return _Extend(False, reason=reason)

    def _project_points(self, pts: np.ndarray):
        """Project rows of ``pts`` in ``n``-lane blocks; all must converge and be valid."""
        m = len(pts)
        n = self.n
        out = np.empty_like(pts)
        for start in range(0, m, n):
            chunk = pts[start : start + n]
            k = len(chunk)
            # a partial chunk runs on k lanes; lanes are independent, so no padding is needed
            res = self.projector.project_all(np.ascontiguousarray(chunk.T))
            self.stats.proj_iters += int(res.iterations.sum())
            if not res.all_converged:
                return None, "projection"
            if not np.all(self.checker.valid(res.block)):
                return None, "collision"
            out[start : start + k] = res.block.T
        return out, ""

    def _validate_edge(self, q_s, q_proj):
        """Interpolate-project-refine; returns interior samples or a failure reason."""
        p = self.params
        n = self.n
        delta = p.resolution
        dist = float(np.linalg.norm(q_proj - q_s))
        if dist <= delta:
            return np.empty((0, q_s.shape[0])), ""
        t = np.arange(1, n + 1) / (n + 1)
        pts, why = self._project_points(q_s + t[:, None] * (q_proj - q_s))
        if pts is None:
            return None, why
        chain = np.concatenate([q_s[None], pts, q_proj[None]])
        gaps = np.linalg.norm(np.diff(chain, axis=0), axis=1)
        if np.any(gaps > p.range / n):
            return None, "gap"
        depth = 0
        while True:
            big = np.flatnonzero(gaps > delta)
            if big.size == 0:
                return chain[1:-1], ""
            depth += 1
            if depth > p.depth_cap:
                return None, "depth"
            counts = np.minimum(n, np.ceil(gaps[big] / delta).astype(int) - 1)
            counts = np.maximum(counts, 1)
            seeds = []
            for g, k in zip(big, counts):
                a, b = chain[g], chain[g + 1]
                s = np.arange(1, k + 1) / (k + 1)
                seeds.append(a + s[:, None] * (b - a))
            proj, why = self._project_points(np.concatenate(seeds))
            if proj is None:
                return None, why
            pieces, new_gaps = [], []
            pos = 0
            last = 0
            for g, k in zip(big, counts):
                pieces.append(chain[last : g + 1])
                sub = np.concatenate([chain[g][None], proj[pos : pos + k], chain[g + 1][None]])
                sg = np.linalg.norm(np.diff(sub, axis=0), axis=1)
                if np.any(sg > gaps[g] / k):
                    return None, "gap"
                pieces.append(proj[pos : pos + k])
                pos += k
                last = g + 1
            pieces.append(chain[last:])
            chain = np.concatenate(pieces)
            gaps = np.linalg.norm(np.diff(chain, axis=0), axis=1)

    # -- extension -------------------------------------------------------------

    def extend(self, tree: Tree, i_s: int, q_target: np.ndarray) -> _Extend:
        p = self.params
        q_s = tree.nodes[i_s].copy()
        diff = q_target - q_s
        length = float(np.linalg.norm(diff))
        if length <= p.resolution:
            return _Extend(True, i_s, "degenerate")
        self.stats.extensions += 1
        dist = min(length, p.range)
        v = diff / length
        q_steer = q_s + dist * v
        eps = np.zeros(self.n)
        if self.n > 1:
            eps[1:] = self.rng.normal(0.0, p.spread, self.n - 1)
        block = q_steer[:, None] + eps[None, :] * v[:, None]
        hit = self.projector.project_any(block)
        if hit is None:
            return self._fail("projection")
        _, q_proj, its = hit
        self.stats.proj_iters += its
        if not self.checker.valid(q_proj[:, None])[0]:
            return self._fail("collision")
        if np.linalg.norm(q_proj - q_s) > 2 * dist:
            return self._fail("overshoot")
        interior, why = self._validate_edge(q_s, q_proj)
        if interior is None:
            return self._fail(why)
        self.stats.extensions_ok += 1
        return _Extend(True, tree.add(q_proj, i_s, interior))

    # -- search ---------------------------------------------------------------

    def _check_endpoint(self, q, name):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.model.dof,):
            raise InvalidEndpoints(f"{name} has shape {q.shape}, expected ({self.model.dof},)")
        if not self.projector.satisfied(q[:, None])[0]:
            raise InvalidEndpoints(f"{name} violates the constraints")
        if not self.exact_checker.valid(q[:, None])[0]:
            raise InvalidEndpoints(f"{name} is in collision or outside joint limits")
        return q

    def _sample(self):
        lo, hi = self.model.lower, self.model.upper
        return lo + (hi - lo) * self.rng.random(lo.shape[0])

    def plan(self, q_a, q_b) -> PlanResult:
        p = self.params
        q_a = self._check_endpoint(q_a, "start")
        q_b = self._check_endpoint(q_b, "goal")
        self.rng = np.random.default_rng(p.seed)
        self.stats = PlanStats()
        t0 = self._t0 = time.perf_counter()
        if np.array_equal(q_a, q_b):
            self.stats.wall_time = time.perf_counter() - t0
            return PlanResult(SOLVED, q_a[None].copy(), self.stats)
        ta, tb = Tree(q_a), Tree(q_b)
        self.trees = [ta, tb]
        a_is_start = True
        status = CAPPED
        path = None
        for it in range(p.max_iterations):
            if self._out_of_time():
                status = TIMEOUT
                break
            self.stats.iterations = it + 1
            q_rand = self._sample()
            near = ta.nearest(q_rand)
            if p.dynamic_domain is not None and np.linalg.norm(q_rand - ta.nodes[near]) > ta.radius[near]:
                ta, tb, a_is_start = tb, ta, not a_is_start
                continue
            ext = self.extend(ta, near, q_rand)
            if not ext.ok:
                if p.dynamic_domain is not None:
                    ta.radius[near] = p.dynamic_domain
            else:
                path = self._connect(ta, tb, ext.node, a_is_start)
                if path is not None:
                    status = SOLVED
                    break
            ta, tb, a_is_start = tb, ta, not a_is_start
        self.stats.wall_time = time.perf_counter() - t0
        if status != SOLVED:
            return PlanResult(status, np.empty((0, q_a.shape[0])), self.stats)
        result = PlanResult(SOLVED, path, self.stats)
        if p.shortcut:
            result = self.shortcut(result)
            self.stats.wall_time = time.perf_counter() - t0
        return result

    def _connect(self, ta: Tree, tb: Tree, i_new: int, a_is_start: bool):
        """Greedily extend ``ta`` from ``i_new`` toward tree B's nearest node."""
        tol = self.params.connect_tol
        j = tb.nearest(ta.nodes[i_new])
        target = tb.nodes[j]
        cur = i_new
        best = math.inf
        while True:
            gap = float(np.linalg.norm(ta.nodes[cur] - target))
            if gap <= tol:
                half_a = ta.root_path(cur)
                half_b = tb.root_path(j)[::-1]
                if np.array_equal(half_a[-1], half_b[0]):
                    half_b = half_b[1:]
                path = np.concatenate([half_a, half_b])
                return path if a_is_start else path[::-1].copy()
            # stop once the chain no longer closes in, or the budget is spent
            if gap >= best or self._out_of_time():
                return None
            best = gap
            ext = self.extend(ta, cur, target)
            if not ext.ok or ext.node == cur:
                return None
            cur = ext.node

    def _out_of_time(self) -> bool:
        t = self.params.timeout
        return t is not None and time.perf_counter() - self._t0 > t

    # -- post-processing ---------------------------------------------------------

    def _steer_chain(self, q_from, q_to):
        """Chain of validated extensions from ``q_from`` toward ``q_to`` (no tree)."""
        scratch = Tree(q_from)
        cur = 0
        for _ in range(int(np.ceil(np.linalg.norm(q_to - q_from) / self.params.range)) + 2):
            if np.linalg.norm(scratch.nodes[cur] - q_to) <= self.params.connect_tol:
                pts = scratch.root_path(cur)
                if not np.array_equal(pts[-1], q_to):
                    pts = np.concatenate([pts, q_to[None]])
                return pts
            ext = self.extend(scratch, cur, q_to)
            if not ext.ok or ext.node == cur:
                return None
            cur = ext.node
        return None

    def shortcut(self, result: PlanResult, attempts: int = 50) -> PlanResult:
        """Random shortcutting; a shortcut is kept only if it is validated and shorter."""
        if not result.solved or len(result.waypoints) < 3:
            return result
        path = result.waypoints.copy()
        for _ in range(attempts):
            m = len(path)
            if m < 3:
                break
            i, j = sorted(self.rng.choice(m, size=2, replace=False))
            if j - i < 2:
                continue
            seg = self._steer_chain(path[i], path[j])
            if seg is None:
                continue
            old = float(np.sum(np.linalg.norm(np.diff(path[i : j + 1], axis=0), axis=1)))
            new = float(np.sum(np.linalg.norm(np.diff(seg, axis=0), axis=1)))
            if new < old:
                path = np.concatenate([path[:i], seg, path[j + 1 :]])
        return PlanResult(result.status, path, result.stats)


def plan(model, scene, cset, q_a, q_b, params: PlannerParams | None = None) -> PlanResult:
    return Planner(model, scene, cset, params).plan(q_a, q_b)


def default_lanes() -> int:
    return lanes_from_env()


# -- independent validation ---------------------------------------------------


@dataclass
class ValidationReport:
    passed: bool
    max_residual: float
    min_clearance: float
    samples: int
    failures: list = field(default_factory=list)


def validate_path(waypoints, cset: ConstraintSet, scene: Scene | None, model, resolution: float = 0.02,
                  oversample: int = 10, factor: float = 2.0, epsilon: float | None = None) -> ValidationReport:
    """Densely re-sample every segment and check residuals and collisions directly.

    Nothing is re-projected.  Residuals come from the numpy constraint
    evaluators; a sample passes if each constraint's infinity norm is within
    ``factor`` times its tolerance and the robot has non-negative clearance
    inside joint limits.
    """
    W = np.asarray(waypoints, dtype=float)
    if len(W) == 0:
        return ValidationReport(False, math.inf, -math.inf, 0, [("empty path", -1, -1)])
    spacing = resolution / oversample
    seg_ids, samples = [], []
    if len(W) == 1:
        samples.append(W)
        seg_ids.append(np.zeros(1, dtype=int))
    for s in range(len(W) - 1):
        a, b = W[s], W[s + 1]
        m = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
        t = np.arange(m + (1 if s == len(W) - 2 else 0)) / m
        samples.append(a + t[:, None] * (b - a))
        seg_ids.append(np.full(len(t), s))
    S = np.concatenate(samples)
    seg = np.concatenate(seg_ids)
    eps = cset.epsilon if epsilon is None else epsilon
    tols = [c.tolerance if c.tolerance is not None else eps for c in cset.constraints]
    failures = []
    max_res = 0.0
    bad = np.zeros(len(S), dtype=bool)
    chunk = 512
    for start in range(0, len(S), chunk):
        Qb = np.ascontiguousarray(S[start : start + chunk].T)
        for c, tol in zip(cset.constraints, tols):
            if not c.dim:
                continue
            r = np.abs(c.residual(Qb)).max(axis=0)
            max_res = max(max_res, float(r.max()))
            bad[start : start + len(r)] |= r > factor * tol
    for idx in np.flatnonzero(bad)[:20]:
        failures.append(("residual", int(seg[idx]), int(idx)))
    clear, lim = CollisionChecker(model, scene, 0.0).clearance(np.ascontiguousarray(S.T))
    coll = (clear < 0.0) | ~lim
    for idx in np.flatnonzero(coll)[:20]:
        failures.append(("collision" if lim[idx] else "joint-limit", int(seg[idx]), int(idx)))
    return ValidationReport(not failures, max_res, float(clear.min()) if len(clear) else math.inf, len(S), failures)
