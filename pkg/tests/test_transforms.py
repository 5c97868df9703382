import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from hybrid_ik.transforms import (
    canonical_quat,
    matrix_to_quat,
    matrix_to_rpy,
    quat_to_matrix,
    rotation_angle,
    rotation_vector,
    rpy_to_matrix,
    wrap_degrees,
)

angle = st.floats(-math.pi, math.pi, allow_nan=False)


def test_rpy_matches_extrinsic_xyz():
    rng = np.random.default_rng(0)
    for rpy in rng.uniform(-math.pi, math.pi, (50, 3)):
        ref = Rotation.from_euler("xyz", rpy).as_matrix()
        assert np.allclose(rpy_to_matrix(rpy), ref, atol=1e-14)


@given(angle, st.floats(-1.5, 1.5), angle)
@settings(max_examples=200, deadline=None)
def test_rpy_round_trip(r, p, y):
    R = rpy_to_matrix([r, p, y])
    assert np.allclose(rpy_to_matrix(matrix_to_rpy(R)), R, atol=1e-12)


def test_quaternion_matches_scipy_and_is_canonical():
    R = Rotation.random(200, random_state=1)
    q = matrix_to_quat(R.as_matrix())
    ref = canonical_quat(R.as_quat()[:, [3, 0, 1, 2]])
    assert np.all(q[:, 0] >= 0)
    assert np.allclose(q, ref, atol=1e-12)
    assert np.allclose(quat_to_matrix(q), R.as_matrix(), atol=1e-12)


def test_canonical_quat_flips_sign():
    assert np.allclose(canonical_quat([-1.0, 0, 0, 0]), [1, 0, 0, 0])
    assert np.allclose(canonical_quat([0, 0, 0, 2.0]), [0, 0, 0, 1])


def test_rotation_vector_regular_and_near_pi():
    for theta in (1e-9, 0.3, 2.0, math.pi - 1e-4, math.pi - 1e-9):
        axis = np.array([1.0, -2.0, 0.5])
        axis /= np.linalg.norm(axis)
        R = Rotation.from_rotvec(theta * axis).as_matrix()
        r = rotation_vector(R)
        assert np.allclose(r, theta * axis, atol=1e-6)
        assert math.isclose(float(rotation_angle(R)), theta, abs_tol=1e-7)


def test_rotation_vector_cap():
    R = Rotation.from_rotvec([0, 0, 3.0]).as_matrix()
    assert np.isclose(np.linalg.norm(rotation_vector(R, max_angle=1.0)), 1.0)


def test_wrap_degrees():
    assert wrap_degrees(190.0) == -170.0
    assert wrap_degrees(-180.0) == 180.0
    assert wrap_degrees(180.0) == 180.0
    assert np.allclose(wrap_degrees([360.0, -540.0, 45.0]), [0.0, 180.0, 45.0])
