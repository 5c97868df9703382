"""Chains and closed-form oracles shared by the test modules."""
from __future__ import annotations

import math

import numpy as np

from hybrid_ik.kinematics import chain_from_dict, forward_kinematics, geometric_jacobian


def planar_chain(lengths, lower, upper, name="planar"):
    """Revolute joints about z, link ``i`` along x; the last length is the tool offset."""
    joints = []
    for i, (lo, hi) in enumerate(zip(lower, upper)):
        offset = 0.0 if i == 0 else lengths[i - 1]
        joints.append({"name": f"j{i + 1}", "origin": {"xyz": [offset, 0, 0], "rpy": [0, 0, 0]},
                       "axis": [0, 0, 1], "limits": {"lower": lo, "upper": hi}})
    return chain_from_dict({"name": name, "joints": joints,
                            "tool_offset": {"xyz": [lengths[-1], 0, 0], "rpy": [0, 0, 0]}})


def two_link(l1=0.5, l2=0.5):
    return planar_chain([l1, l2], [-math.pi, -math.pi], [math.pi, math.pi], "planar2")


def two_link_ik(x, y, l1=0.5, l2=0.5):
    """Both elbow solutions of the planar 2R arm, angles wrapped to (-pi, pi]."""
    c = (x * x + y * y - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if abs(c) > 1:
        return []
    out = []
    for s in (1.0, -1.0):
        q2 = s * math.acos(min(1.0, max(-1.0, c)))
        q1 = math.atan2(y, x) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
        out.append(np.array([math.remainder(q1, 2 * math.pi), q2]))
    return out


def random_chain(rng, dof):
    """Spatial chain with random offsets, rotations, unit axes and a base transform."""
    joints = []
    for i in range(dof):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        lo = rng.uniform(-3.0, 0.0)
        joints.append({"name": f"r{i}", "axis": axis.tolist(),
                       "origin": {"xyz": rng.uniform(-0.3, 0.3, 3).tolist(),
                                  "rpy": rng.uniform(-math.pi, math.pi, 3).tolist()},
                       "limits": {"lower": lo, "upper": lo + rng.uniform(0.5, 3.0)}})
    return chain_from_dict({
        "name": f"random{dof}", "joints": joints,
        "base": {"xyz": rng.uniform(-1, 1, 3).tolist(), "rpy": rng.uniform(-1, 1, 3).tolist()},
        "tool_offset": {"xyz": rng.uniform(-0.2, 0.2, 3).tolist(),
                        "rpy": rng.uniform(-1, 1, 3).tolist()},
    })


# Planar 4R family whose targets are reachable only with a joint on its limit.
BOUNDARY_LENGTHS = (0.3, 0.25, 0.2, 0.1)
BOUNDARY_LOWER = np.array([0.0, -1.2, 0.0, -0.5])
BOUNDARY_UPPER = np.array([0.8, 0.0, 1.0, 0.5])
ELBOW = 1


def boundary_chain():
    return planar_chain(BOUNDARY_LENGTHS, BOUNDARY_LOWER, BOUNDARY_UPPER, "planar4-limited")


def _ik_tail(q1, p, phi):
    """Joints 2-4 of the planar 4R for a fixed first joint and tool heading ``phi``."""
    L = BOUNDARY_LENGTHS
    w = (np.asarray(p[:2]) - L[3] * np.array([math.cos(phi), math.sin(phi)])
         - L[0] * np.array([math.cos(q1), math.sin(q1)]))
    c = (w @ w - L[1] ** 2 - L[2] ** 2) / (2 * L[1] * L[2])
    if abs(c) > 1:
        return []
    out = []
    for s in (1.0, -1.0):
        q3 = s * math.acos(c)
        q2 = math.atan2(w[1], w[0]) - math.atan2(L[2] * math.sin(q3), L[1] + L[2] * math.cos(q3)) - q1
        q = np.array([q1, q2, q3, phi - q1 - q2 - q3])
        q[1:] = (q[1:] + math.pi) % (2 * math.pi) - math.pi
        out.append(q)
    return out


def interior_slack(position, phi, step=1e-3):
    """Grid-search oracle: the largest distance to the nearest limit over all
    exact solutions (first joint swept on a ``step`` grid).  ``<= 0`` up to
    grid resolution means every solution touches a limit."""
    best = -math.inf
    grid = np.append(np.arange(BOUNDARY_LOWER[0], BOUNDARY_UPPER[0], step), BOUNDARY_UPPER[0])
    for q1 in grid:
        for q in _ik_tail(q1, position, phi):
            best = max(best, float(min(np.min(q - BOUNDARY_LOWER), np.min(BOUNDARY_UPPER - q))))
    return best


def boundary_instance(rng, chain=None):
    """Draw ``(q_star, pose)`` with the elbow straight (its upper limit) and a
    neighbouring joint also at its upper limit, such that the self-motion
    direction pushes both joints out of range.  Accepted only when the
    oracle finds no solution with slack above 1e-6."""
    chain = chain or boundary_chain()
    while True:
        a = int(rng.choice([0, 2]))
        q = rng.uniform(BOUNDARY_LOWER, BOUNDARY_UPPER)
        q[a] = BOUNDARY_UPPER[a]
        q[ELBOW] = BOUNDARY_UPPER[ELBOW]
        t = np.linalg.svd(geometric_jacobian(chain, q)[[0, 1, 5]])[2][-1]
        if not (t[a] * t[ELBOW] < 0 and min(abs(t[a]), abs(t[ELBOW])) > 1e-3):
            continue
        pose = forward_kinematics(chain, q)
        if interior_slack(pose.position, float(q.sum())) <= 1e-6:
            return q, pose
