"""Problem files and the line/plane, maze and bimanual suite generators.

A problem file is JSON::

    {"id": "ppo-o4-p07", "family": "PPO", "robot": "panda7",
     "scene": {"obstacles": [...]}, "constraints": [...], "epsilon": 1e-4,
     "start": [...], "goal": [...], "planner": {...}, "trials": 1}

Generators are pure functions of their seed: every random draw comes from a
``numpy`` generator seeded with ``(seed, suite tag, index)``.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .collision import AxisAlignedBox, CollisionChecker, Scene
from .constraints import (
    ConstraintSet,
    RelativePoseConstraint,
    TSRConstraint,
    constraint_set_from_list,
)
from .kinematics import KinematicModel, cached_robot
from .lie import RigidTransform
from .planner import PlannerParams, Planner
from .projection import ProjectionParams, Projector

LINE_PLANE_CLASSES = ("LP", "LPO", "PP", "PPO")
OBSTACLE_LEVELS = (0, 2, 4, 6, 8)
SHELF_LEVELS = {"B": 0, "M": 1, "T": 2}
BIMANUAL_PAIRS = (("T", "B"), ("B", "M"), ("M", "T"))


class InvalidProblem(ValueError):
    pass


@dataclass
class Problem:
    id: str
    family: str
    robot: str
    model: KinematicModel
    scene: Scene
    constraints: ConstraintSet
    start: np.ndarray
    goal: np.ndarray
    planner: PlannerParams
    trials: int = 1
    meta: dict | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "family": self.family,
            "robot": self.robot,
            "scene": self.scene.to_dict(),
            "constraints": self.constraints.to_list(),
            "epsilon": self.constraints.epsilon,
            "start": [float(x) for x in self.start],
            "goal": [float(x) for x in self.goal],
            "planner": self.planner.to_dict(),
            "trials": self.trials,
            "meta": self.meta or {},
        }

    @classmethod
    def from_dict(cls, data: dict, validate: bool = True) -> Problem:
        model = cached_robot(data["robot"])
        eps = float(data.get("epsilon", 1e-4))
        cset = constraint_set_from_list(data.get("constraints", []), model, eps)
        prob = cls(
            id=data["id"],
            family=data.get("family", data["id"].split("-")[0]),
            robot=data["robot"],
            model=model,
            scene=Scene.from_dict(data.get("scene")),
            constraints=cset,
            start=np.asarray(data["start"], dtype=float),
            goal=np.asarray(data["goal"], dtype=float),
            planner=PlannerParams.from_dict(data.get("planner")),
            trials=int(data.get("trials", 1)),
            meta=data.get("meta"),
        )
        if validate:
            prob.validate()
        return prob

    def validate(self) -> None:
        checker = CollisionChecker(self.model, self.scene, 0.0)
        for name, q in (("start", self.start), ("goal", self.goal)):
            if q.shape != (self.model.dof,):
                raise InvalidProblem(f"{self.id}: {name} has wrong dimension")
            if not self.constraints.satisfied(q[:, None])[0]:
                raise InvalidProblem(f"{self.id}: {name} violates the constraints")
            if not checker.valid(q[:, None])[0]:
                raise InvalidProblem(f"{self.id}: {name} is in collision or out of limits")


def load_problem(path) -> Problem:
    return Problem.from_dict(json.loads(Path(path).read_text()))


def load_problems(directory) -> list[Problem]:
    return [load_problem(p) for p in sorted(Path(directory).glob("*.json"))]


def write_problems(problems, directory) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for p in problems:
        path = out / f"{p.id}.json"
        path.write_text(json.dumps(p.to_dict(), indent=1, sort_keys=True) + "\n")
        paths.append(path)
    return paths


def _rng(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(tag.encode()), index])


def shipped_scene(name: str) -> dict:
    return json.loads(resources.files("mcplan.data.scenes").joinpath(f"{name}.json").read_text())


# -- shared sampling helpers ---------------------------------------------------


def sample_on_manifold(model, cset, checker, rng, nominal=None, spread=1.0, lanes=8, attempts=200):
    """Project random configurations until one is valid; ``None`` if the budget runs out."""
    proj = Projector(cset, model, ProjectionParams())
    lo, hi = model.lower, model.upper
    for _ in range(attempts):
        Q = lo[:, None] + (hi - lo)[:, None] * rng.random((model.dof, lanes))
        if nominal is not None:
            Q = nominal[:, None] + spread * (Q - nominal[:, None])
        out = proj.project_all(Q)
        ok = out.converged & checker.valid(out.block)
        if ok.any():
            return out.block[:, int(np.argmax(ok))].copy()
    return None


def is_solvable(model, scene, cset, start, goal, params: PlannerParams, budget: int, seed: int) -> bool:
    """Planner succeeds within ``budget`` iterations; no wall clock, so generation is reproducible."""
    p = replace(params, timeout=None, max_iterations=budget, seed=seed, lanes=8)
    return Planner(model, scene, cset, p).plan(start, goal).solved


# -- line / plane ---------------------------------------------------------------

_PANDA_READY = np.array([0.0, -0.3, 0.0, -2.2, 0.0, 1.9, 0.785])


def line_plane_constraint(model, kind: str, center, yaw: float, half: float = 0.35) -> TSRConstraint:
    """TCP pointing down on a line (along the region x axis) or a horizontal plane."""
    free = [None, None]
    pos = {"LP": [[-half, half], [0, 0], [0, 0]], "LPO": [[-half, half], [0, 0], [0, 0]],
           "PP": [[-half, half], [-half, half], [0, 0]], "PPO": [[-half, half], [-half, half], [0, 0]]}[kind]
    rot = [[0, 0], [0, 0], free] if kind.endswith("O") else [free, free, free]
    T0 = RigidTransform.from_xyz_rpy(center, [math.pi, 0.0, yaw])
    return TSRConstraint(model, "tcp", T0, None, pos + rot)


def _random_box(rng, region_lo, region_hi, size_lo=0.04, size_hi=0.1) -> AxisAlignedBox:
    c = region_lo + (region_hi - region_lo) * rng.random(3)
    h = size_lo + (size_hi - size_lo) * rng.random(3)
    return AxisAlignedBox(c - h, c + h)


def generate_line_plane_suite(seed: int, counts: int = 20, obstacle_levels=OBSTACLE_LEVELS,
                              classes=LINE_PLANE_CLASSES, params: PlannerParams | None = None,
                              solvable_budget: int = 1000, max_attempts: int = 60) -> list[Problem]:
    """``counts`` start/goal pairs per class; each pair is re-emitted at every
    obstacle level with obstacles added incrementally."""
    model = cached_robot("panda7")
    params = params or PlannerParams()
    margin = params.collision_margin
    levels = sorted(obstacle_levels)
    problems = []
    for kind in classes:
        for i in range(counts):
            rng = _rng(seed, f"line-plane/{kind}", i)
            made = None
            for _attempt in range(max_attempts):
                made = _line_plane_pair(model, kind, rng, levels, params, margin, solvable_budget, seed + i)
                if made is not None:
                    break
            if made is None:
                raise RuntimeError(f"could not generate {kind} problem {i} within the attempt budget")
            cset, start, goal, obstacles = made
            for level in levels:
                problems.append(Problem(
                    id=f"{kind.lower()}-o{level}-p{i:02d}", family=kind, robot="panda7", model=model,
                    scene=Scene(obstacles[:level]), constraints=cset, start=start, goal=goal, planner=params,
                    meta={"suite": "line-plane", "class": kind, "obstacles": level, "seed": seed},
                ))
    return problems


def _line_plane_pair(model, kind, rng, levels, params, margin, budget, solve_seed):
    center = np.array([0.45 + 0.15 * rng.random(), -0.15 + 0.3 * rng.random(), 0.25 + 0.25 * rng.random()])
    yaw = -math.pi / 2 + math.pi * rng.random()
    cset = ConstraintSet([line_plane_constraint(model, kind, center, yaw)], params.projection.epsilon)
    free = CollisionChecker(model, Scene(), margin)
    start = sample_on_manifold(model, cset, free, rng, _PANDA_READY, 0.5)
    goal = sample_on_manifold(model, cset, free, rng, _PANDA_READY, 0.5)
    if start is None or goal is None:
        return None
    tcp = [model.frame_pose(q, "tcp").translation for q in (start, goal)]
    if np.linalg.norm(tcp[0] - tcp[1]) < 0.2:
        return None
    if not is_solvable(model, Scene(), cset, start, goal, params, budget, solve_seed):
        return None
    obstacles: list = []
    region_lo = np.array([0.15, -0.6, 0.0])
    region_hi = np.array([0.8, 0.6, 0.8])
    ends = np.stack([start, goal], axis=1)
    checkpoint, dead_ends = 0, 0
    while len(obstacles) < max(levels):
        for _ in range(50):
            box = _random_box(rng, region_lo, region_hi)
            if CollisionChecker(model, Scene(obstacles + [box]), margin).valid(ends).all():
                obstacles.append(box)
                break
        else:
            return None
        if len(obstacles) in levels:
            if is_solvable(model, Scene(obstacles), cset, start, goal, params, budget, solve_seed):
                checkpoint = len(obstacles)
            else:
                # roll back to the last solvable level and redraw
                dead_ends += 1
                if dead_ends > 4:
                    return None
                del obstacles[checkpoint:]
    return cset, start, goal, obstacles


# -- maze -----------------------------------------------------------------------

_MARKER_READY = np.array([0.0, 0.2, 0.0, -2.0, 0.0, 2.2, 0.785])


def maze_constraint(model, floor_z: float) -> TSRConstraint:
    free = [None, None]
    T0 = RigidTransform.from_xyz_rpy([0.0, 0.0, floor_z], [math.pi, 0.0, 0.0])
    return TSRConstraint(model, "marker_tip", T0, None, [free, free, [0, 0], [0, 0], [0, 0], free])


def generate_maze_suite(seed: int, pairs: int = 10, min_distance: float | None = None,
                        params: PlannerParams | None = None, solvable_budget: int = 2500,
                        max_attempts: int = 80) -> list[Problem]:
    model = cached_robot("panda7_marker")
    layout = shipped_scene("maze")
    scene = Scene.from_dict(layout)
    floor_z = float(layout["floor_z"])
    bx, by = layout["bounds"]["x"], layout["bounds"]["y"]
    if min_distance is None:
        min_distance = 0.5 * math.hypot(bx[1] - bx[0], by[1] - by[0])
    params = params or PlannerParams(timeout=5.0)
    cset = ConstraintSet([maze_constraint(model, floor_z)], params.projection.epsilon)
    checker = CollisionChecker(model, scene, params.collision_margin)
    problems = []
    for i in range(pairs):
        rng = _rng(seed, "maze", i)
        for _attempt in range(max_attempts):
            ends = []
            for _ in range(2):
                xy = np.array([bx[0] + (bx[1] - bx[0]) * rng.random(), by[0] + (by[1] - by[0]) * rng.random()])
                pin = TSRConstraint(model, "marker_tip",
                                    RigidTransform.from_xyz_rpy([xy[0], xy[1], floor_z], [math.pi, 0.0, 0.0]),
                                    None, [[0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [None, None]])
                q = sample_on_manifold(model, ConstraintSet([pin]), checker, rng, _MARKER_READY, 0.5, attempts=20)
                ends.append(q)
            if any(q is None for q in ends):
                continue
            tips = [model.frame_pose(q, "marker_tip").translation for q in ends]
            if np.linalg.norm(tips[0][:2] - tips[1][:2]) < min_distance:
                continue
            if not is_solvable(model, scene, cset, ends[0], ends[1], params, solvable_budget, seed + i):
                continue
            problems.append(Problem(
                id=f"maze-p{i:02d}", family="MAZE", robot="panda7_marker", model=model, scene=scene,
                constraints=cset, start=ends[0], goal=ends[1], planner=params,
                meta={"suite": "maze", "seed": seed, "min_distance": min_distance},
            ))
            break
        else:
            raise RuntimeError(f"could not generate maze problem {i} within the attempt budget")
    return problems


# -- bimanual shelf transfers ---------------------------------------------------

_SHELF_BOARDS = (0.0, 0.3, 0.6)
_DUAL_READY = np.concatenate([[0.0, 0.0, 0.0, -1.8, 0.0, 1.8, 0.785]] * 2)
_HOLD = 0.15  # half the hand separation across the carried object


def shelf_scene() -> Scene:
    boards = [AxisAlignedBox([0.58, -0.55, z - 0.01], [0.9, 0.55, z + 0.01]) for z in _SHELF_BOARDS]
    sides = [AxisAlignedBox([0.58, y - 0.01, -0.01], [0.9, y + 0.01, 0.61]) for y in (-0.55, 0.55)]
    return Scene(boards + sides)


def _grasp_poses(center, yaw: float = 0.0):
    """Left and right TCP poses holding an object at ``center`` from the sides."""
    obj = RigidTransform.from_xyz_rpy(center, [0.0, 0.0, yaw])
    left = obj @ RigidTransform.from_xyz_rpy([0.0, _HOLD, 0.0], [math.pi / 2, 0.0, 0.0])
    right = obj @ RigidTransform.from_xyz_rpy([0.0, -_HOLD, 0.0], [-math.pi / 2, 0.0, 0.0])
    return left, right


def bimanual_constraint(model) -> RelativePoseConstraint:
    left, right = _grasp_poses([0.0, 0.0, 0.0])
    return RelativePoseConstraint(model, "left_tcp", "right_tcp", left.inverse() @ right, [[0, 0]] * 6)


def generate_bimanual_suite(seed: int, params: PlannerParams | None = None, solvable_budget: int = 2000,
                            max_attempts: int = 40) -> list[Problem]:
    model = cached_robot("dual_arm14")
    scene = shelf_scene()
    params = params or PlannerParams(timeout=5.0)
    cset = ConstraintSet([bimanual_constraint(model)], params.projection.epsilon)
    checker = CollisionChecker(model, scene, params.collision_margin)

    def pose_at(level, rng):
        z = _SHELF_BOARDS[SHELF_LEVELS[level]] + 0.15
        center = [0.5 + 0.04 * rng.random(), -0.05 + 0.1 * rng.random(), z]
        left, right = _grasp_poses(center, -0.2 + 0.4 * rng.random())
        pins = ConstraintSet([
            TSRConstraint(model, "left_tcp", left, None, [[0, 0]] * 6),
            TSRConstraint(model, "right_tcp", right, None, [[0, 0]] * 6),
        ])
        return sample_on_manifold(model, pins, checker, rng, _DUAL_READY, 0.4, attempts=15)

    problems = []
    for i, (a, b) in enumerate(BIMANUAL_PAIRS):
        rng = _rng(seed, "bimanual", i)
        for _attempt in range(max_attempts):
            qa, qb = pose_at(a, rng), pose_at(b, rng)
            if qa is None or qb is None:
                continue
            if not (cset.satisfied(qa[:, None])[0] and cset.satisfied(qb[:, None])[0]):
                continue
            if not is_solvable(model, scene, cset, qa, qb, params, solvable_budget, seed + i):
                continue
            problems.append(Problem(
                id=f"bimanual-{a}{b}", family="BIMANUAL", robot="dual_arm14", model=model, scene=scene,
                constraints=cset, start=qa, goal=qb, planner=params,
                meta={"suite": "bimanual", "seed": seed, "from": a, "to": b},
            ))
            break
        else:
            raise RuntimeError(f"could not generate bimanual transfer {a}->{b}")
    return problems


SUITES = {
    "line-plane": generate_line_plane_suite,
    "maze": generate_maze_suite,
    "bimanual": generate_bimanual_suite,
}
