"""Rotation helpers.

Quaternions are stored as ``(w, x, y, z)``.  RPY triples follow the URDF
convention: ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.  Every function that takes
matrices accepts a leading batch shape.
"""
from __future__ import annotations

import numpy as np


def matmul3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Elementwise contraction instead of np.matmul so a row of a batch is
    # bitwise identical to the same row computed alone.
    return (a[..., :, :, None] * b[..., None, :, :]).sum(axis=-2)


def matvec3(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (a * v[..., None, :]).sum(axis=-1)


def skew(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def axis_angle_matrix(axis: np.ndarray, angle) -> np.ndarray:
    """Rodrigues rotation about a unit ``axis`` by ``angle`` (scalar or array)."""
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle)[..., None, None]
    s = np.sin(angle)[..., None, None]
    k = skew(axis)
    outer = axis[:, None] * axis[None, :]
    return c * np.eye(3) + s * k + (1.0 - c) * outer


def rpy_to_matrix(rpy) -> np.ndarray:
    roll, pitch, yaw = (float(a) for a in rpy)
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def matrix_to_rpy(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rpy_to_matrix`; pitch is kept in [-pi/2, pi/2]."""
    R = np.asarray(R, dtype=float)
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    pitch = np.arctan2(-R[..., 2, 0], np.hypot(R[..., 2, 1], R[..., 2, 2]))
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return np.stack([roll, pitch, yaw], axis=-1)


def canonical_quat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    sign = np.where(q[..., :1] < 0.0, -1.0, 1.0)
    return q * sign


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    out = np.empty(w.shape + (3, 3))
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - w * z)
    out[..., 0, 2] = 2 * (x * z + w * y)
    out[..., 1, 0] = 2 * (x * y + w * z)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - w * x)
    out[..., 2, 0] = 2 * (x * z - w * y)
    out[..., 2, 1] = 2 * (y * z + w * x)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Shepperd's method, vectorised; result has ``w >= 0``."""
    R = np.asarray(R, dtype=float)
    batch = R.shape[:-2]
    m = R.reshape(-1, 3, 3)
    q = np.empty((m.shape[0], 4))
    tr = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2]
    diag = np.stack([tr, m[:, 0, 0], m[:, 1, 1], m[:, 2, 2]], axis=1)
    pick = np.argmax(diag, axis=1)

    i = pick == 0
    s = 2.0 * np.sqrt(1.0 + tr[i])
    q[i] = np.stack([0.25 * s,
                     (m[i, 2, 1] - m[i, 1, 2]) / s,
                     (m[i, 0, 2] - m[i, 2, 0]) / s,
                     (m[i, 1, 0] - m[i, 0, 1]) / s], axis=1)
    i = pick == 1
    s = 2.0 * np.sqrt(1.0 + m[i, 0, 0] - m[i, 1, 1] - m[i, 2, 2])
    q[i] = np.stack([(m[i, 2, 1] - m[i, 1, 2]) / s,
                     0.25 * s,
                     (m[i, 0, 1] + m[i, 1, 0]) / s,
                     (m[i, 0, 2] + m[i, 2, 0]) / s], axis=1)
    i = pick == 2
    s = 2.0 * np.sqrt(1.0 + m[i, 1, 1] - m[i, 0, 0] - m[i, 2, 2])
    q[i] = np.stack([(m[i, 0, 2] - m[i, 2, 0]) / s,
                     (m[i, 0, 1] + m[i, 1, 0]) / s,
                     0.25 * s,
                     (m[i, 1, 2] + m[i, 2, 1]) / s], axis=1)
    i = pick == 3
    s = 2.0 * np.sqrt(1.0 + m[i, 2, 2] - m[i, 0, 0] - m[i, 1, 1])
    q[i] = np.stack([(m[i, 1, 0] - m[i, 0, 1]) / s,
                     (m[i, 0, 2] + m[i, 2, 0]) / s,
                     (m[i, 1, 2] + m[i, 2, 1]) / s,
                     0.25 * s], axis=1)
    q = canonical_quat(q)
    return q.reshape(batch + (4,))


def rotation_angle(R: np.ndarray) -> np.ndarray:
    """Geodesic angle of a rotation matrix, in [0, pi]."""
    R = np.asarray(R, dtype=float)
    vee = np.stack([R[..., 2, 1] - R[..., 1, 2],
                    R[..., 0, 2] - R[..., 2, 0],
                    R[..., 1, 0] - R[..., 0, 1]], axis=-1)
    sin2 = np.linalg.norm(vee, axis=-1)
    cos2 = R[..., 0, 0] + R[..., 1, 1] + R[..., 2, 2] - 1.0
    return np.arctan2(sin2, cos2)


def rotation_vector(R: np.ndarray, max_angle: float = np.pi) -> np.ndarray:
    """Axis-angle vector of ``R``; the angle is capped at ``max_angle``."""
    R = np.asarray(R, dtype=float)
    batch = R.shape[:-2]
    m = R.reshape(-1, 3, 3)
    vee = np.stack([m[:, 2, 1] - m[:, 1, 2],
                    m[:, 0, 2] - m[:, 2, 0],
                    m[:, 1, 0] - m[:, 0, 1]], axis=-1)
    sin2 = np.linalg.norm(vee, axis=-1)
    cos2 = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2] - 1.0
    theta = np.arctan2(sin2, cos2)
    out = np.zeros((m.shape[0], 3))

    small = theta < 1e-6
    out[small] = 0.5 * vee[small]

    regular = ~small & (theta < np.pi - 1e-3)
    out[regular] = (theta[regular] / sin2[regular])[:, None] * vee[regular]

    # Near pi the antisymmetric part vanishes; recover u u^T from the
    # symmetric part.
    flip = ~small & ~regular
    for k in np.flatnonzero(flip):
        c = 0.5 * cos2[k]
        sym = (0.5 * (m[k] + m[k].T) - c * np.eye(3)) / (1.0 - c)
        col = int(np.argmax(np.diag(sym)))
        axis = sym[:, col] / np.linalg.norm(sym[:, col])
        if axis @ vee[k] < 0.0:
            axis = -axis
        out[k] = theta[k] * axis

    if max_angle < np.pi:
        ang = np.linalg.norm(out, axis=-1)
        over = ang > max_angle
        out[over] *= (max_angle / ang[over])[:, None]
    return out.reshape(batch + (3,))


def wrap_degrees(a):
    """Wrap angles (degrees) into (-180, 180]."""
    a = np.asarray(a, dtype=float)
    out = np.mod(a + 180.0, 360.0) - 180.0
    return np.where(out == -180.0, 180.0, out)
