import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from footforce import quaternion as quat
from footforce.core import LocalMotion, PoseSequence, Skeleton, ValidationError
from footforce.kinematics import (RigidTransform, apply_rigid, finite_difference,
                                  forward_kinematics, mirror, resample_positions,
                                  resample_rotations, resampled_length)


def _unit(rng, shape):
    q = rng.normal(size=shape + (4,))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def _matrix_chain_fk(parent, offset, root, quats):
    """Oracle: compose 4x4 homogeneous matrices along each ancestor chain."""
    T, J = quats.shape[:2]
    out = np.zeros((T, J, 3))
    for t in range(T):
        for j in range(J):
            chain = []
            k = j
            while k >= 0:
                chain.append(k)
                k = parent[k]
            M = np.eye(4)
            for k in reversed(chain):
                L = np.eye(4)
                w, x, y, z = quats[t, k]
                L[:3, :3] = Rotation.from_quat([x, y, z, w]).as_matrix()
                L[:3, 3] = root[t] if parent[k] < 0 else offset[k]
                M = M @ L
            out[t, j] = M[:3, 3]
    return out


def _chain_skeleton(offsets):
    J = len(offsets)
    names = [f"J{i}" for i in range(J)]
    return Skeleton(np.arange(J) - 1, offsets, names, [[0, 1], [2, 3]] if J >= 4 else [[0, 0], [0, 0]])


def test_fk_identity_is_offset_sum(skeleton):
    T = 3
    m = LocalMotion(np.zeros((T, 3)), quat.identity((T, 23)), 100.0)
    pos = forward_kinematics(skeleton, m).positions
    expected = np.zeros((23, 3))
    for j in range(23):
        k = j
        while k > 0:
            expected[j] += skeleton.offset[k]
            k = skeleton.parent[k]
    np.testing.assert_allclose(pos, np.broadcast_to(expected, pos.shape), atol=1e-12)


def test_fk_root_yaw_180_negates_xz(skeleton):
    rng = np.random.default_rng(0)
    q = _unit(rng, (4, 23))
    root = np.zeros((4, 3))
    base = forward_kinematics(skeleton, LocalMotion(root, q, 100.0)).positions
    q2 = q.copy()
    q2[:, 0] = quat.mul(quat.yaw(np.pi), q[:, 0])
    rot = forward_kinematics(skeleton, LocalMotion(root, q2, 100.0)).positions
    np.testing.assert_allclose(rot[..., [0, 2]], -base[..., [0, 2]], atol=1e-12)
    np.testing.assert_allclose(rot[..., 1], base[..., 1], atol=1e-12)


@given(seed=st.integers(0, 10**6))
def test_fk_matches_matrix_chain_oracle(seed):
    rng = np.random.default_rng(seed)
    offsets = rng.normal(size=(3, 3))
    sk = Skeleton([-1, 0, 1], offsets, ["a", "b", "c"], [[0, 1], [2, 1]])
    q = _unit(rng, (5, 3))
    root = rng.normal(size=(5, 3))
    pos = forward_kinematics(sk, LocalMotion(root, q, 100.0)).positions
    np.testing.assert_allclose(pos, _matrix_chain_fk(sk.parent, offsets, root, q), atol=1e-6)


def test_fk_humanoid_matches_oracle(skeleton):
    rng = np.random.default_rng(7)
    q = _unit(rng, (2, 23))
    root = rng.normal(size=(2, 3))
    pos = forward_kinematics(skeleton, LocalMotion(root, q, 100.0)).positions
    np.testing.assert_allclose(pos, _matrix_chain_fk(skeleton.parent, skeleton.offset, root, q),
                               atol=1e-9)


@given(seed=st.integers(0, 10**6))
def test_fk_preserves_bone_lengths(seed, skeleton):
    rng = np.random.default_rng(seed)
    q = _unit(rng, (4, 23))
    pos = forward_kinematics(skeleton, LocalMotion(rng.normal(size=(4, 3)), q, 100.0)).positions
    for j in range(1, 23):
        d = np.linalg.norm(pos[:, j] - pos[:, skeleton.parent[j]], axis=-1)
        np.testing.assert_allclose(d, np.linalg.norm(skeleton.offset[j]), atol=1e-6)


def test_fk_joint_count_mismatch(skeleton):
    with pytest.raises(ValidationError):
        forward_kinematics(skeleton, LocalMotion(np.zeros((2, 3)), quat.identity((2, 5)), 100.0))


def test_rigid_commutes_with_fk_on_root(skeleton):
    rng = np.random.default_rng(3)
    q = _unit(rng, (6, 23))
    root = rng.normal(size=(6, 3))
    xf = RigidTransform.horizontal(0.7, (1.0, 0.2, -3.0))
    a = apply_rigid(forward_kinematics(skeleton, LocalMotion(root, q, 100.0)), xf).positions
    q2 = q.copy()
    q2[:, 0] = quat.mul(xf.rotation, q[:, 0])
    root2 = quat.rotate(xf.rotation, root) + xf.translation
    b = forward_kinematics(skeleton, LocalMotion(root2, q2, 100.0)).positions
    np.testing.assert_allclose(a, b, atol=1e-6)


# -- finite differences ----------------------------------------------------------------

def test_fd_ramp_and_parabola():
    rate = 100.0
    t = np.arange(50) / rate
    v = finite_difference((1.3 * t)[:, None], 1, rate)
    np.testing.assert_allclose(v[1:-1], 1.3, atol=1e-9)
    a = finite_difference((0.5 * 2.5 * t * t)[:, None], 2, rate)
    np.testing.assert_allclose(a[1:-1], 2.5, atol=1e-7)


def test_fd_constant_is_zero():
    for order in (1, 2):
        assert np.all(finite_difference(np.full((7, 3), 4.2), order, 60.0) == 0)


def test_fd_boundaries_one_sided_exact_on_ramp():
    t = np.arange(5) / 10.0
    v = finite_difference(2.0 * t, 1, 10.0)
    np.testing.assert_allclose(v, 2.0, atol=1e-12)


def test_fd_too_short():
    with pytest.raises(ValueError):
        finite_difference(np.zeros((2, 3)), 1, 100.0)


@given(seed=st.integers(0, 10**6))
def test_fd_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    p = PoseSequence(rng.normal(size=(10, 4, 3)), 100.0)
    moved = apply_rigid(p, RigidTransform(translation=rng.normal(size=3)))
    np.testing.assert_allclose(finite_difference(moved.positions, 1, 100.0),
                               finite_difference(p.positions, 1, 100.0), atol=1e-9)


# -- resampling -------------------------------------------------------------------------

def test_resample_identity_bit_equal():
    x = np.random.default_rng(0).normal(size=(20, 3)).astype(np.float32)
    assert np.array_equal(resample_positions(x, 100.0, 100.0), x)
    q = _unit(np.random.default_rng(1), (20, 2))
    assert np.array_equal(resample_rotations(q, 50.0, 50.0), q)


def test_resample_length_formula():
    assert resampled_length(241, 240.0, 100.0) == 101
    for n in range(2, 1001):
        out = resample_positions(np.zeros((n, 1)), 240.0, 100.0)
        assert len(out) == (n - 1) * 100 // 240 + 1


def test_resample_ramp_exact():
    n = 481
    t = np.arange(n) / 240.0
    x = np.stack([1.7 * t, -0.4 * t + 2.0], axis=1).astype(np.float32)
    y = resample_positions(x, 240.0, 100.0)
    tt = np.arange(len(y)) / 100.0
    ref = np.stack([1.7 * tt, -0.4 * tt + 2.0], axis=1)
    np.testing.assert_allclose(y, ref, atol=4 * np.finfo(np.float32).eps * np.abs(ref).max())


def test_resample_constant_rotation():
    q = np.broadcast_to(quat.from_axis_angle([0, 1, 0], 0.3), (30, 1, 4))
    out = resample_rotations(q, 240.0, 100.0)
    np.testing.assert_allclose(out, np.broadcast_to(q[0], out.shape), atol=1e-12)


def test_resample_constant_angular_velocity():
    omega = 2.0
    axis = np.array([0.3, 0.9, -0.2])
    axis /= np.linalg.norm(axis)
    t = np.arange(241) / 240.0
    q = quat.from_axis_angle(axis, omega * t[:, None])[:, None]
    out = resample_rotations(q, 240.0, 100.0)
    tt = np.arange(len(out)) / 100.0
    ref = quat.from_axis_angle(axis, omega * tt[:, None])[:, None]
    ang = quat.angle_between(out, ref)
    assert ang.max() < 1e-6


def test_resample_antipodal_stays_short_arc():
    q0 = quat.from_axis_angle([0, 0, 1], 0.2)
    q = np.stack([q0, -q0, q0, -q0])[:, None]
    out = resample_rotations(q, 240.0, 100.0)
    assert quat.angle_between(out, np.broadcast_to(q0, out.shape)).max() < 1e-7


def test_resample_rejects_non_unit():
    with pytest.raises(ValidationError):
        resample_rotations(np.full((4, 1, 4), 0.4), 240.0, 100.0)


# -- rigid transforms and mirroring --------------------------------------------------------

def test_apply_rigid_cases():
    rng = np.random.default_rng(2)
    p = PoseSequence(rng.normal(size=(5, 6, 3)), 100.0)
    np.testing.assert_array_equal(apply_rigid(p, RigidTransform()).positions, p.positions)
    t = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(apply_rigid(p, RigidTransform(translation=t)).positions,
                                  p.positions + t)
    d = lambda x: np.linalg.norm(x[:, :, None] - x[:, None], axis=-1)
    np.testing.assert_allclose(d(apply_rigid(p, RigidTransform(scale=2.0)).positions),
                               2 * d(p.positions), atol=1e-12)


def test_rigid_transform_validation():
    with pytest.raises(ValidationError):
        RigidTransform(scale=0.0)
    with pytest.raises(ValidationError):
        RigidTransform(rotation=[2.0, 0, 0, 0])


def test_mirror_involution_and_channels(gait_take):
    sk = gait_take.skeleton
    p = gait_take.poses
    m = mirror(p, sk)
    np.testing.assert_array_equal(mirror(m, sk).positions, p.positions.astype(np.float64))
    la, ra = sk.index("LeftFoot"), sk.index("RightFoot")
    np.testing.assert_array_equal(m.positions[:, la, 0], -p.positions[:, ra, 0].astype(np.float64))
    np.testing.assert_array_equal(m.positions[:, la, 1:], p.positions[:, ra, 1:].astype(np.float64))


def test_mirror_symmetric_pose_fixed(skeleton):
    rest = forward_kinematics(skeleton, LocalMotion(np.zeros((1, 3)), quat.identity((1, 23)), 100.0))
    np.testing.assert_allclose(mirror(rest, skeleton).positions, rest.positions, atol=1e-12)


def test_mirror_requires_pairing():
    sk = Skeleton([-1, 0, 1, 2], np.zeros((4, 3)), ["Root", "LeftA", "B", "C"], [[0, 1], [2, 3]])
    with pytest.raises(ValidationError, match="counterpart"):
        mirror(PoseSequence(np.zeros((2, 4, 3)), 100.0), sk)


# -- quaternions ------------------------------------------------------------------------------

@given(seed=st.integers(0, 10**6))
def test_quaternion_rotate_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    q = _unit(rng, (8,))
    v = rng.normal(size=(8, 3))
    ref = Rotation.from_quat(q[:, [1, 2, 3, 0]]).apply(v)
    np.testing.assert_allclose(quat.rotate(q, v), ref, atol=1e-12)
    np.testing.assert_allclose(quat.to_matrix(q), Rotation.from_quat(q[:, [1, 2, 3, 0]]).as_matrix(),
                               atol=1e-12)


@given(seed=st.integers(0, 10**6), w=st.floats(0, 1))
def test_slerp_unit_norm_and_endpoints(seed, w):
    rng = np.random.default_rng(seed)
    p, q = _unit(rng, (5,)), _unit(rng, (5,))
    s = quat.slerp(p, q, np.full(5, w))
    np.testing.assert_allclose(np.linalg.norm(s, axis=-1), 1.0, atol=1e-12)
    np.testing.assert_allclose(quat.angle_between(quat.slerp(p, q, np.zeros(5)), p), 0, atol=1e-6)
    np.testing.assert_allclose(quat.angle_between(quat.slerp(p, q, np.ones(5)), q), 0, atol=1e-6)
