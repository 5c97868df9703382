import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from hybrid_ik import (
    DimensionMismatch,
    ParseError,
    Pose,
    PoseError,
    ValidationError,
    clamp_to_limits,
    forward_kinematics,
    geometric_jacobian,
    is_grasp_success,
    load_chain,
    pose_error,
)
from hybrid_ik.kinematics import chain_from_dict, chain_to_dict, with_active_joints

from helpers import planar_chain, random_chain


def homogeneous(xyz, R):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = xyz
    return T


def oracle_fk(spec, q):
    """Step-by-step 4x4 products, built from the raw spec dict."""
    def tf(d):
        d = d or {}
        rot = Rotation.from_euler("xyz", d.get("rpy", [0, 0, 0])).as_matrix()
        return homogeneous(d.get("xyz", [0, 0, 0]), rot)

    T = tf(spec.get("base"))
    for j, angle in zip(spec["joints"], q):
        T = T @ tf(j["origin"])
        T = T @ homogeneous([0, 0, 0], Rotation.from_rotvec(angle * np.array(j["axis"])).as_matrix())
    T = T @ tf(spec["tool_offset"])
    quat = Rotation.from_matrix(T[:3, :3]).as_quat()[[3, 0, 1, 2]]
    return T[:3, 3], quat * (1 if quat[0] >= 0 else -1)


def one_joint():
    return planar_chain([1.0], [-math.pi], [math.pi], "one")


def test_fk_single_joint_examples():
    c = one_joint()
    p = forward_kinematics(c, [0.0])
    assert np.allclose(p.position, [1, 0, 0]) and np.allclose(p.orientation, [1, 0, 0, 0])
    assert np.allclose(forward_kinematics(c, [math.pi / 2]).position, [0, 1, 0], atol=1e-15)


def test_fk_matches_homogeneous_oracle_on_random_chains():
    rng = np.random.default_rng(3)
    for dof in (1, 3, 8):
        chain = random_chain(rng, dof)
        spec = chain_to_dict(chain)
        for _ in range(20):
            q = rng.uniform(-4, 4, dof)  # infeasible values are allowed here
            pose = forward_kinematics(chain, q)
            pos, quat = oracle_fk(spec, q)
            assert np.max(np.abs(pose.position - pos)) < 1e-12
            assert np.max(np.abs(pose.orientation - quat)) < 1e-12


def test_fk_is_bitwise_deterministic(nicol):
    q = nicol.mid_configuration + 0.1
    a, b = forward_kinematics(nicol, q), forward_kinematics(nicol, q)
    assert a.position.tobytes() == b.position.tobytes()
    assert a.orientation.tobytes() == b.orientation.tobytes()


def test_dimension_mismatch(nicol):
    with pytest.raises(DimensionMismatch):
        forward_kinematics(nicol, np.zeros(7))
    with pytest.raises(DimensionMismatch):
        geometric_jacobian(nicol, np.zeros(9))
    with pytest.raises(DimensionMismatch):
        clamp_to_limits(nicol, [0.0])


def test_jacobian_single_joint_column():
    J = geometric_jacobian(one_joint(), [0.0])
    assert np.allclose(J[:, 0], [0, 1, 0, 0, 0, 1])


def test_jacobian_coaxial_angular_columns():
    c = planar_chain([0.2, 0.3, 0.1, 0.4], [-3] * 4, [3] * 4)
    J = geometric_jacobian(c, [0.3, -0.2, 1.0, 0.5])
    assert np.allclose(J[3:], np.array([[0, 0, 1]] * 4).T)


def test_jacobian_linear_part_vs_finite_differences():
    rng = np.random.default_rng(5)
    chain = random_chain(rng, 6)
    h = 1e-6
    for _ in range(20):
        q = rng.uniform(chain.lower, chain.upper)
        J = geometric_jacobian(chain, q)
        fd = np.empty((3, chain.dof))
        for i in range(chain.dof):
            e = np.zeros(chain.dof)
            e[i] = h
            fd[:, i] = (forward_kinematics(chain, q + e).position
                        - forward_kinematics(chain, q - e).position) / (2 * h)
        assert np.linalg.norm(J[:3] - fd) / np.linalg.norm(fd) < 1e-5


def test_pose_error_examples():
    a = Pose([0.3, 0.1, 0.9], [1, 0, 0, 0])
    assert pose_error(a, a) == PoseError(0.0, 0.0)
    b = Pose([0.305, 0.1, 0.9], [1, 0, 0, 0])
    err = pose_error(b, a)
    assert math.isclose(err.position_error, 0.005, abs_tol=1e-15) and err.orientation_error_sum == 0.0
    c = Pose.from_rpy(a.position, [math.radians(20), 0, 0])
    err = pose_error(c, a)
    assert err.position_error == 0.0 and math.isclose(err.orientation_error_sum, 20.0, abs_tol=1e-9)


def test_pose_error_metric_flag():
    a = Pose.from_rpy([0, 0, 0], [0.1, 0.2, 0.3])
    b = Pose.from_rpy([0, 0, 0], [0, 0, 0])
    geo = pose_error(a, b, metric="geodesic").orientation_error_sum
    assert math.isclose(geo, math.degrees(Rotation.from_euler("xyz", [0.1, 0.2, 0.3]).magnitude()))
    with pytest.raises(ValueError):
        pose_error(a, b, metric="nope")


quat = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
    lambda v: np.linalg.norm(v) > 1e-3)
vec = st.lists(st.floats(-2, 2, allow_nan=False), min_size=3, max_size=3)


@given(vec, quat, vec, quat)
@settings(max_examples=200, deadline=None)
def test_pose_error_properties(p1, q1, p2, q2):
    a, b = Pose(p1, q1), Pose(p2, q2)
    e = pose_error(a, b)
    assert e.position_error >= 0 and e.orientation_error_sum >= 0
    assert e.position_error == pose_error(b, a).position_error
    assert pose_error(a, a).position_error == 0.0
    assert pose_error(a, a).orientation_error_sum < 1e-5
    neg = Pose(p1, -np.asarray(q1))
    assert math.isclose(pose_error(neg, b).orientation_error_sum, e.orientation_error_sum,
                        abs_tol=1e-9)


def test_grasp_predicate_boundaries():
    assert is_grasp_success(PoseError(0.009, 19.9))
    assert not is_grasp_success(PoseError(0.010, 0.0))
    assert not is_grasp_success(PoseError(0.0, 20.0))


def test_clamp(nicol):
    q = nicol.mid_configuration
    assert np.array_equal(clamp_to_limits(nicol, q), q)
    high = nicol.upper + 1.0
    assert np.array_equal(clamp_to_limits(nicol, high), nicol.upper)
    rng = np.random.default_rng(0)
    for _ in range(50):
        q = rng.uniform(-5, 5, nicol.dof)
        once = clamp_to_limits(nicol, q)
        assert np.array_equal(clamp_to_limits(nicol, once), once)


def test_bundled_chain_shape(nicol):
    assert nicol.dof == 8
    assert 0.9 <= nicol.reach <= 1.15
    assert np.any(np.abs(nicol.lower + nicol.upper) > 0.1)  # asymmetric limits


def write_spec(tmp_path, spec):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(spec))
    return path


def base_spec():
    return {"name": "t", "joints": [
        {"name": "shoulder", "origin": {"xyz": [0, 0, 0.1], "rpy": [0, 0, 0]},
         "axis": [0, 0, 1], "limits": {"lower": -1, "upper": 1}},
        {"name": "elbow", "origin": {"xyz": [0.3, 0, 0], "rpy": [0, 0, 0]},
         "axis": [0, 1, 0], "limits": {"lower": -1, "upper": 1}}],
        "tool_offset": {"xyz": [0.2, 0, 0], "rpy": [0, 0, 0]}}


def test_load_round_trip(tmp_path, nicol):
    path = write_spec(tmp_path, chain_to_dict(nicol))
    again = load_chain(path)
    assert again.dof == 8
    q = nicol.mid_configuration + 0.05
    assert np.allclose(forward_kinematics(again, q).position, forward_kinematics(nicol, q).position)


def test_load_rejects_inverted_limits(tmp_path):
    spec = base_spec()
    spec["joints"][1]["limits"] = {"lower": 1.0, "upper": -1.0}
    with pytest.raises(ValidationError, match="elbow"):
        load_chain(write_spec(tmp_path, spec))


def test_load_rejects_non_unit_axis(tmp_path):
    spec = base_spec()
    spec["joints"][0]["axis"] = [0, 0, 2]
    with pytest.raises(ValidationError, match="shoulder"):
        load_chain(write_spec(tmp_path, spec))


def test_load_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        load_chain(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_chain(bad)
    spec = base_spec()
    del spec["joints"][0]["axis"]
    with pytest.raises(ParseError, match="shoulder"):
        load_chain(write_spec(tmp_path, spec))


def test_chain_needs_joints_and_reach():
    with pytest.raises(ValidationError):
        chain_from_dict({"name": "empty", "joints": []})
    spec = base_spec()
    for j in spec["joints"]:
        j["origin"]["xyz"] = [0, 0, 0]
    spec["tool_offset"]["xyz"] = [0, 0, 0]
    with pytest.raises(ValidationError):
        chain_from_dict(spec)


def test_active_joints_freeze(nicol):
    six = with_active_joints(nicol, 6)
    assert np.all(six.lower[6:] == 0) and np.all(six.upper[6:] == 0)
    assert np.array_equal(six.lower[:6], nicol.lower[:6])
