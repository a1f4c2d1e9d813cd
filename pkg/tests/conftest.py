import math

import numpy as np
import pytest
from hypothesis import settings

from mcplan.kinematics import KinematicModel

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def planar_chain(n_links: int, length: float = 1.0, masses=None, spheres: bool = False) -> KinematicModel:
    """Revolute-about-z chain with unit links along x and a ``tip`` frame at the end."""
    links = [{"name": "base"}]
    joints = []
    parent = "base"
    for i in range(n_links):
        name = f"l{i}"
        link = {"name": name, "mass": 1.0 if masses is None else masses[i], "com": [length / 2, 0, 0]}
        if spheres:
            link["spheres"] = [{"center": [length / 2, 0, 0], "radius": 0.1}]
        links.append(link)
        joints.append({"name": f"j{i}", "parent": parent, "child": name, "kind": "revolute", "axis": [0, 0, 1],
                       "origin": {"xyz": [0 if i == 0 else length, 0, 0], "rpy": [0, 0, 0]},
                       "limits": [-math.pi, math.pi]})
        parent = name
    return KinematicModel.from_dict({
        "name": f"planar{n_links}", "joints": joints, "links": links,
        "frames": [{"name": "tip", "link": parent, "offset": [length, 0, 0]}],
    })


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng, angle=None):
    from mcplan.lie import exp_so3

    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    theta = rng.uniform(0, math.pi) if angle is None else angle
    return exp_so3(axis * theta)


def random_q(model, rng, n=None, shrink=0.9):
    lo, hi = model.lower, model.upper
    mid, half = 0.5 * (lo + hi), 0.5 * shrink * (hi - lo)
    if n is None:
        return mid + half * rng.uniform(-1, 1, model.dof)
    return mid[:, None] + half[:, None] * rng.uniform(-1, 1, (model.dof, n))


def point_robot(radius: float = 0.01, extent: float = 2.0) -> KinematicModel:
    """Planar point robot: two prismatic joints and one small sphere."""
    return KinematicModel.from_dict({
        "name": "point2",
        "joints": [
            {"name": "x", "parent": "ground", "child": "slider", "kind": "prismatic", "axis": [1, 0, 0],
             "limits": [-extent, extent]},
            {"name": "y", "parent": "slider", "child": "body", "kind": "prismatic", "axis": [0, 1, 0],
             "limits": [-extent, extent]},
        ],
        "links": [{"name": "ground"}, {"name": "slider"},
                  {"name": "body", "mass": 1.0, "spheres": [{"center": [0, 0, 0], "radius": radius}]}],
        "frames": [{"name": "point", "link": "body", "offset": [0, 0, 0]}],
    })


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def _report(criterion: int, ok: bool, detail: str):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
