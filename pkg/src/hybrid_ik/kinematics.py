"""Revolute kinematic chains: loading, forward kinematics, Jacobian, pose errors."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError, ValidationError
from .transforms import (
    axis_angle_matrix,
    canonical_quat,
    matmul3,
    matrix_to_quat,
    matrix_to_rpy,
    matvec3,
    quat_to_matrix,
    rotation_angle,
    rpy_to_matrix,
    wrap_degrees,
)

GRASP_POSITION_TOL = 0.010  # m
GRASP_ORIENTATION_TOL = 20.0  # deg, summed over roll/pitch/yaw

UNIT_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Transform:
    """Rigid transform: translation in meters plus a rotation."""

    xyz: np.ndarray
    rotation: np.ndarray  # 3x3

    @classmethod
    def identity(cls) -> "Transform":
        return cls(_frozen(np.zeros(3)), _frozen(np.eye(3)))

    @classmethod
    def from_xyz_rpy(cls, xyz, rpy) -> "Transform":
        return cls(_frozen(xyz), _frozen(rpy_to_matrix(rpy)))

    @property
    def quaternion(self) -> np.ndarray:
        return matrix_to_quat(self.rotation)

    @property
    def rpy(self) -> np.ndarray:
        return matrix_to_rpy(self.rotation)

    def to_dict(self) -> dict:
        return {"xyz": [float(v) for v in self.xyz],
                "rpy": [float(v) for v in self.rpy]}


@dataclass(frozen=True)
class JointSpec:
    name: str
    origin: Transform
    axis: np.ndarray
    limit_lower: float
    limit_upper: float

    def validate(self) -> None:
        if self.axis.shape != (3,) or not np.all(np.isfinite(self.axis)):
            raise ValidationError(f"joint {self.name!r}: axis must be a finite 3-vector")
        if abs(float(np.linalg.norm(self.axis)) - 1.0) > UNIT_TOL:
            raise ValidationError(
                f"joint {self.name!r}: axis {self.axis.tolist()} is not unit length")
        if not (math.isfinite(self.limit_lower) and math.isfinite(self.limit_upper)):
            raise ValidationError(f"joint {self.name!r}: limits must be finite")
        if self.limit_lower > self.limit_upper:
            raise ValidationError(
                f"joint {self.name!r}: lower limit {self.limit_lower} exceeds "
                f"upper limit {self.limit_upper}")
        qn = np.linalg.norm(self.origin.quaternion)
        if abs(qn - 1.0) > UNIT_TOL:
            raise ValidationError(f"joint {self.name!r}: origin rotation is not orthonormal")


@dataclass(frozen=True)
class KinematicChain:
    """Ordered revolute joints with box limits.

    ``base`` places the first joint in the world frame.  It is not part of
    the chain's reach.
    """

    name: str
    joints: tuple[JointSpec, ...]
    tool_offset: Transform
    base: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        if len(self.joints) < 1:
            raise ValidationError(f"chain {self.name!r}: needs at least one joint")
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            raise ValidationError(f"chain {self.name!r}: duplicate joint names")
        for j in self.joints:
            j.validate()
        reach = self.reach
        if not (math.isfinite(reach) and reach > 0.0):
            raise ValidationError(f"chain {self.name!r}: total reach must be finite and > 0")

    @property
    def dof(self) -> int:
        return len(self.joints)

    @cached_property
    def lower(self) -> np.ndarray:
        return _frozen([j.limit_lower for j in self.joints])

    @cached_property
    def upper(self) -> np.ndarray:
        return _frozen([j.limit_upper for j in self.joints])

    @cached_property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @cached_property
    def reach(self) -> float:
        total = sum(float(np.linalg.norm(j.origin.xyz)) for j in self.joints)
        return total + float(np.linalg.norm(self.tool_offset.xyz))

    @cached_property
    def mid_configuration(self) -> np.ndarray:
        return _frozen(0.5 * (self.lower + self.upper))

    @cached_property
    def _tables(self):
        t = np.array([j.origin.xyz for j in self.joints])
        r = np.array([j.origin.rotation for j in self.joints])
        a = np.array([j.axis for j in self.joints])
        return t, r, a


def _joint_from_dict(d: dict, index: int) -> JointSpec:
    name = d.get("name", f"joint_{index}")
    try:
        origin = d.get("origin", {})
        limits = d["limits"]
        return JointSpec(
            name=str(name),
            origin=Transform.from_xyz_rpy(origin.get("xyz", [0, 0, 0]),
                                          origin.get("rpy", [0, 0, 0])),
            axis=_frozen(d["axis"]),
            limit_lower=float(limits["lower"]),
            limit_upper=float(limits["upper"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"joint {name!r}: malformed entry ({exc})") from exc


def _transform_from_dict(d: dict | None, what: str) -> Transform:
    if d is None:
        return Transform.identity()
    try:
        return Transform.from_xyz_rpy(d.get("xyz", [0, 0, 0]), d.get("rpy", [0, 0, 0]))
    except (TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"{what}: malformed transform ({exc})") from exc


def chain_from_dict(d: dict) -> KinematicChain:
    if not isinstance(d, dict) or not isinstance(d.get("joints"), list):
        raise ParseError("chain spec must be an object with a 'joints' list")
    joints = tuple(_joint_from_dict(j, i) for i, j in enumerate(d["joints"]))
    return KinematicChain(
        name=str(d.get("name", "chain")),
        joints=joints,
        tool_offset=_transform_from_dict(d.get("tool_offset"), "tool_offset"),
        base=_transform_from_dict(d.get("base"), "base"),
    )


def chain_to_dict(chain: KinematicChain) -> dict:
    return {
        "name": chain.name,
        "base": chain.base.to_dict(),
        "joints": [
            {"name": j.name, "origin": j.origin.to_dict(),
             "axis": [float(v) for v in j.axis],
             "limits": {"lower": j.limit_lower, "upper": j.limit_upper}}
            for j in chain.joints
        ],
        "tool_offset": chain.tool_offset.to_dict(),
    }


def load_chain(path) -> KinematicChain:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read chain spec ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return chain_from_dict(data)


def with_active_joints(chain: KinematicChain, n_active: int) -> KinematicChain:
    """Freeze every joint after the first ``n_active`` at zero."""
    if not 1 <= n_active <= chain.dof:
        raise ValueError(f"n_active must be in [1, {chain.dof}]")
    joints = list(chain.joints)
    for i in range(n_active, chain.dof):
        j = joints[i]
        if not j.limit_lower <= 0.0 <= j.limit_upper:
            raise ValidationError(f"joint {j.name!r}: cannot freeze at 0, outside its limits")
        joints[i] = replace(j, limit_lower=0.0, limit_upper=0.0)
    return replace(chain, name=f"{chain.name}-{n_active}dof", joints=tuple(joints))


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    orientation: np.ndarray  # (w, x, y, z), canonicalized to w >= 0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        q = np.asarray(self.orientation, dtype=float)
        if p.shape != (3,) or q.shape != (4,):
            raise DimensionMismatch("pose needs a 3-vector position and a 4-vector quaternion")
        n = np.linalg.norm(q)
        if not n > 0.0:
            raise ValueError("zero quaternion")
        object.__setattr__(self, "position", _frozen(p))
        object.__setattr__(self, "orientation", _frozen(canonical_quat(q)))

    @classmethod
    def from_matrix(cls, position, rotation) -> "Pose":
        return cls(position, matrix_to_quat(rotation))

    @classmethod
    def from_rpy(cls, position, rpy) -> "Pose":
        return cls(position, matrix_to_quat(rpy_to_matrix(rpy)))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def to_dict(self) -> dict:
        return {"position": [float(v) for v in self.position],
                "orientation": [float(v) for v in self.orientation]}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(d["position"], d["orientation"])


@dataclass(frozen=True)
class PoseError:
    position_error: float  # m
    orientation_error_sum: float  # deg

    def to_dict(self) -> dict:
        return {"position_error": self.position_error,
                "orientation_error_sum": self.orientation_error_sum}


def _check_q(chain: KinematicChain, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (chain.dof,):
        raise DimensionMismatch(
            f"configuration has {q.shape[-1] if q.ndim else 0} values, chain {chain.name!r} "
            f"has {chain.dof} joints")
    return q


def fk_batch(chain: KinematicChain, Q) -> tuple[np.ndarray, np.ndarray]:
    """End-effector positions ``(N, 3)`` and rotations ``(N, 3, 3)`` for ``Q (N, dof)``."""
    Q = np.atleast_2d(_check_q(chain, Q))
    t, r, a = chain._tables
    n = Q.shape[0]
    R = np.broadcast_to(chain.base.rotation, (n, 3, 3))
    p = np.broadcast_to(chain.base.xyz, (n, 3))
    for i in range(chain.dof):
        p = p + matvec3(R, t[i])
        R = matmul3(R, r[i])
        R = matmul3(R, axis_angle_matrix(a[i], Q[:, i]))
    p = p + matvec3(R, chain.tool_offset.xyz)
    R = matmul3(R, chain.tool_offset.rotation)
    return p, R


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    q = _check_q(chain, q)
    if q.ndim != 1:
        raise DimensionMismatch("forward_kinematics takes a single configuration")
    p, R = fk_batch(chain, q[None, :])
    return Pose.from_matrix(p[0], R[0])


def joint_frames(chain: KinematicChain, q):
    """World joint origins ``(dof, 3)``, world axes ``(dof, 3)``, EE position and rotation."""
    q = _check_q(chain, q)
    t, r, a = chain._tables
    R = chain.base.rotation
    p = chain.base.xyz
    origins = np.empty((chain.dof, 3))
    axes = np.empty((chain.dof, 3))
    for i in range(chain.dof):
        p = p + R @ t[i]
        R = R @ r[i]
        origins[i] = p
        axes[i] = R @ a[i]
        R = R @ axis_angle_matrix(a[i], q[i])
    p_ee = p + R @ chain.tool_offset.xyz
    R_ee = R @ chain.tool_offset.rotation
    return origins, axes, p_ee, R_ee


def geometric_jacobian(chain: KinematicChain, q) -> np.ndarray:
    """6 x dof Jacobian; rows 0-2 linear velocity, rows 3-5 angular velocity."""
    origins, axes, p_ee, _ = joint_frames(chain, q)
    J = np.empty((6, chain.dof))
    J[:3] = np.cross(axes, p_ee - origins).T
    J[3:] = axes.T
    return J


def pose_error(current: Pose, target: Pose, metric: str = "rpy_sum") -> PoseError:
    """Position distance and orientation error of ``current`` relative to ``target``.

    ``metric="rpy_sum"`` sums the absolute roll, pitch and yaw of
    ``target^-1 * current`` (each wrapped to (-180, 180]); ``"geodesic"``
    reports the single rotation angle instead.  Both are in degrees.
    """
    dp = float(np.linalg.norm(current.position - target.position))
    rel = target.rotation.T @ current.rotation
    if metric == "rpy_sum":
        angles = wrap_degrees(np.degrees(matrix_to_rpy(rel)))
        orient = float(np.sum(np.abs(angles)))
    elif metric == "geodesic":
        orient = float(np.degrees(rotation_angle(rel)))
    else:
        raise ValueError(f"unknown orientation metric {metric!r}")
    return PoseError(dp, orient)


def is_grasp_success(err: PoseError) -> bool:
    return (err.position_error < GRASP_POSITION_TOL
            and err.orientation_error_sum < GRASP_ORIENTATION_TOL)


def clamp_to_limits(chain: KinematicChain, q) -> np.ndarray:
    q = _check_q(chain, q)
    return np.minimum(np.maximum(q, chain.lower), chain.upper)


def is_feasible(chain: KinematicChain, q) -> bool:
    q = _check_q(chain, q)
    return bool(np.all(q >= chain.lower) and np.all(q <= chain.upper))


def random_configuration(chain: KinematicChain, rng: np.random.Generator, size=None) -> np.ndarray:
    shape = (chain.dof,) if size is None else (size, chain.dof)
    return rng.uniform(chain.lower, chain.upper, size=shape)


def chain_summary(chain: KinematicChain) -> list[str]:
    lines = [f"name: {chain.name}", f"dof: {chain.dof}", f"reach: {chain.reach:.4f} m"]
    for j in chain.joints:
        lines.append(f"  {j.name}: [{j.limit_lower:+.4f}, {j.limit_upper:+.4f}] rad "
                     f"axis={np.round(j.axis, 6).tolist()}")
    return lines


__all__ = [
    "GRASP_ORIENTATION_TOL", "GRASP_POSITION_TOL", "JointSpec", "KinematicChain", "Pose",
    "PoseError", "Transform", "chain_from_dict", "chain_summary", "chain_to_dict",
    "clamp_to_limits", "fk_batch", "forward_kinematics", "geometric_jacobian",
    "is_feasible", "is_grasp_success", "joint_frames", "load_chain", "pose_error",
    "random_configuration", "with_active_joints",
]
