"""Regenerate the robot JSON files under src/mcplan/data/robots/.

    python tools/make_robot_assets.py
"""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "mcplan" / "data" / "robots"
PI2 = math.pi / 2

# 7-DoF arm with Franka-Panda-like kinematics (modified DH folded into origins).
ARM_JOINTS = [
    # name, origin xyz, origin rpy, limits
    ("joint1", [0, 0, 0.333], [0, 0, 0], [-2.8973, 2.8973]),
    ("joint2", [0, 0, 0], [-PI2, 0, 0], [-1.7628, 1.7628]),
    ("joint3", [0, -0.316, 0], [PI2, 0, 0], [-2.8973, 2.8973]),
    ("joint4", [0.0825, 0, 0], [PI2, 0, 0], [-3.0718, -0.0698]),
    ("joint5", [-0.0825, 0.384, 0], [-PI2, 0, 0], [-2.8973, 2.8973]),
    ("joint6", [0, 0, 0], [PI2, 0, 0], [-0.0175, 3.7525]),
    ("joint7", [0.088, 0, 0], [PI2, 0, 0], [-2.8973, 2.8973]),
]
ARM_MASSES = [2.8, 2.7, 2.7, 2.4, 2.4, 2.7, 1.5, 0.7, 0.0, 0.7]
ARM_SPHERES = {
    "link0": [([0, 0, 0.08], 0.06), ([-0.08, 0, 0.08], 0.06)],
    "link1": [([0, -0.03, 0], 0.06), ([0, 0, -0.12], 0.06), ([0, 0, -0.17], 0.06)],
    "link2": [([0, 0, 0.03], 0.055), ([0, 0, 0.08], 0.055), ([0, -0.12, 0], 0.055), ([0, -0.17, 0], 0.055)],
    "link3": [([0, 0, -0.06], 0.05), ([0, 0, -0.1], 0.06), ([0.08, 0.06, 0], 0.052), ([0.08, 0.02, 0], 0.05)],
    "link4": [([0, 0, 0.02], 0.052), ([0, 0, 0.06], 0.05), ([-0.08, 0.095, 0], 0.055), ([-0.08, 0.06, 0], 0.052)],
    "link5": [([0, 0.055, 0], 0.055), ([0, 0.085, 0], 0.055), ([0, 0, -0.22], 0.055),
              ([0, 0.05, -0.18], 0.045), ([0, 0.08, -0.11], 0.025), ([0, 0.08, -0.06], 0.025)],
    "link6": [([0, 0, -0.015], 0.052), ([0, 0, 0.01], 0.05), ([0.08, 0.035, 0], 0.052), ([0.08, -0.01, 0], 0.05)],
    "link7": [([0, 0, 0.07], 0.05), ([0.02, 0.04, 0.08], 0.025), ([0.04, 0.02, 0.08], 0.025)],
    "hand": [([0, -0.07, 0.02], 0.028), ([0, -0.035, 0.02], 0.028), ([0, 0, 0.02], 0.028),
             ([0, 0.035, 0.02], 0.028), ([0, 0.07, 0.02], 0.028),
             ([0, -0.015, 0.07], 0.02), ([0, 0.015, 0.07], 0.02)],
}
ARM_LINKS = ["link0", "link1", "link2", "link3", "link4", "link5", "link6", "link7", "link8", "hand"]
# Only links at least three apart in the chain are tested against each other.
ARM_SELF_PAIRS = [
    ("link0", "link4"), ("link0", "link5"), ("link0", "link6"), ("link0", "link7"), ("link0", "hand"),
    ("link1", "link4"), ("link1", "link5"), ("link1", "link6"), ("link1", "link7"), ("link1", "hand"),
    ("link2", "link5"), ("link2", "link6"), ("link2", "link7"), ("link2", "hand"),
    ("link3", "hand"),
]


def arm(prefix="", base_parent=None, base_origin=None, marker=False):
    joints, links, frames = [], [], []
    p = lambda s: prefix + s  # noqa: E731
    for i, name in enumerate(ARM_LINKS):
        links.append({
            "name": p(name),
            "mass": ARM_MASSES[i],
            "com": [0, 0, 0],
            "spheres": [{"center": c, "radius": r} for c, r in ARM_SPHERES.get(name, [])],
        })
    if base_parent is not None:
        joints.append({"name": p("mount"), "parent": base_parent, "child": p("link0"), "kind": "fixed",
                       "origin": base_origin})
    for i, (name, xyz, rpy, lim) in enumerate(ARM_JOINTS):
        joints.append({"name": p(name), "parent": p(f"link{i}"), "child": p(f"link{i + 1}"), "kind": "revolute",
                       "axis": [0, 0, 1], "origin": {"xyz": xyz, "rpy": rpy}, "limits": lim})
    joints.append({"name": p("flange"), "parent": p("link7"), "child": p("link8"), "kind": "fixed",
                   "origin": {"xyz": [0, 0, 0.107], "rpy": [0, 0, 0]}})
    joints.append({"name": p("hand_mount"), "parent": p("link8"), "child": p("hand"), "kind": "fixed",
                   "origin": {"xyz": [0, 0, 0], "rpy": [0, 0, -math.pi / 4]}})
    frames.append({"name": p("tcp"), "link": p("hand"), "offset": {"xyz": [0, 0, 0.1034], "rpy": [0, 0, 0]}})
    frames.append({"name": p("flange"), "link": p("link8"), "offset": {"xyz": [0, 0, 0], "rpy": [0, 0, 0]}})
    if marker:
        links.append({"name": p("marker"), "mass": 0.05, "com": [0, 0, 0.1],
                      "spheres": [{"center": [0, 0, z], "radius": 0.012} for z in (0.11, 0.14, 0.17)]})
        joints.append({"name": p("marker_mount"), "parent": p("hand"), "child": p("marker"), "kind": "fixed",
                       "origin": {"xyz": [0, 0, 0], "rpy": [0, 0, 0]}})
        frames.append({"name": p("marker_tip"), "link": p("marker"), "offset": {"xyz": [0, 0, 0.2], "rpy": [0, 0, 0]}})
    pairs = [(p(a), p(b)) for a, b in ARM_SELF_PAIRS]
    if marker:
        pairs += [(p(a), p("marker")) for a in ("link0", "link1", "link2", "link3", "link4")]
    return joints, links, frames, pairs


def panda7(marker=False):
    joints, links, frames, pairs = arm(marker=marker)
    return {"name": "panda7_marker" if marker else "panda7", "floating_base": False, "joints": joints,
            "links": links, "frames": frames, "self_collision_pairs": [list(x) for x in pairs]}


def dual_arm14():
    joints, links, frames, pairs = [], [{"name": "torso", "mass": 10.0, "com": [0, 0, 0.2],
                                          "spheres": [{"center": [-0.15, 0, z], "radius": 0.1}
                                                      for z in (0.1, 0.3, 0.5)]}], [], []
    for side, y in (("left_", 0.3), ("right_", -0.3)):
        j, l, f, p = arm(side, "torso", {"xyz": [0, y, 0], "rpy": [0, 0, 0]})
        joints += j
        links += l
        frames += f
        pairs += p
    far = ["link3", "link4", "link5", "link6", "link7", "hand"]
    pairs += [("left_" + a, "right_" + b) for a in far for b in far]
    pairs += [("torso", s + l) for s in ("left_", "right_") for l in ("link5", "link6", "link7", "hand")]
    return {"name": "dual_arm14", "floating_base": False, "joints": joints, "links": links, "frames": frames,
            "self_collision_pairs": [list(x) for x in pairs]}


def legged_chain():
    """Synthetic floating-base biped with two arms (22 joints + 6 base DoF)."""
    joints, links, frames = [], [], []
    links.append({"name": "torso", "mass": 15.0, "com": [0, 0, 0.15],
                  "spheres": [{"center": [0, 0, 0.15], "radius": 0.15}]})
    for side, s in (("l_", 1.0), ("r_", -1.0)):
        chain = [
            ("hip_roll", [0, s * 0.1, -0.1], [1, 0, 0], [-0.4, 0.4], 1.5, [0, 0, 0]),
            ("hip_yaw", [0, 0, -0.05], [0, 0, 1], [-0.5, 0.5], 1.0, [0, 0, 0]),
            ("hip_pitch", [0, 0, -0.05], [0, 1, 0], [-1.2, 1.2], 4.0, [0, 0, -0.2]),
            ("knee", [0, 0, -0.4], [0, 1, 0], [0.0, 2.2], 2.5, [0, 0, -0.2]),
            ("tarsus", [0, 0, -0.4], [0, 1, 0], [-1.5, 1.5], 1.0, [0, 0, -0.1]),
            ("toe_pitch", [0, 0, -0.25], [0, 1, 0], [-0.8, 0.8], 0.5, [0.03, 0, -0.02]),
        ]
        parent = "torso"
        for name, xyz, axis, lim, mass, com in chain:
            child = side + name + "_link"
            joints.append({"name": side + name, "parent": parent, "child": child, "kind": "revolute", "axis": axis,
                           "origin": {"xyz": xyz, "rpy": [0, 0, 0]}, "limits": lim})
            links.append({"name": child, "mass": mass, "com": com, "spheres": []})
            parent = child
        frames.append({"name": side + "foot", "link": side + "toe_pitch_link", "offset": {"xyz": [0, 0, -0.05]}})
        frames.append({"name": side + "rod_top", "link": side + "hip_pitch_link", "offset": {"xyz": [-0.05, 0, -0.05]}})
        frames.append({"name": side + "rod_bottom", "link": side + "tarsus_link", "offset": {"xyz": [-0.05, 0, 0.05]}})
        arm_chain = [
            ("shoulder_roll", [0, s * 0.22, 0.3], [1, 0, 0], [-1.4, 1.4], 1.0),
            ("shoulder_pitch", [0, 0, 0], [0, 1, 0], [-2.5, 2.5], 1.0),
            ("shoulder_yaw", [0, 0, -0.1], [0, 0, 1], [-1.7, 1.7], 1.0),
            ("elbow", [0, 0, -0.25], [0, 1, 0], [-2.3, 0.0], 0.8),
        ]
        parent = "torso"
        for name, xyz, axis, lim, mass in arm_chain:
            child = side + name + "_link"
            joints.append({"name": side + name, "parent": parent, "child": child, "kind": "revolute", "axis": axis,
                           "origin": {"xyz": xyz, "rpy": [0, 0, 0]}, "limits": lim})
            links.append({"name": child, "mass": mass, "com": [0, 0, -0.1], "spheres": []})
            parent = child
        frames.append({"name": side + "hand", "link": side + "elbow_link", "offset": {"xyz": [0, 0, -0.25]}})
    return {"name": "legged_chain", "floating_base": True, "require_mass": True,
            "base_limits": [[-1, 1], [-1, 1], [0.0, 1.5], [-0.5, 0.5], [-0.5, 0.5], [-3.14159, 3.14159]],
            "joints": joints, "links": links, "frames": frames}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, data in (("panda7", panda7()), ("panda7_marker", panda7(marker=True)),
                       ("dual_arm14", dual_arm14()), ("legged_chain", legged_chain())):
        (OUT / f"{name}.json").write_text(json.dumps(data, indent=1) + "\n")


if __name__ == "__main__":
    main()
