import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from footforce.core import PoseSequence, ValidationError
from footforce.synth import GaitConfig, GaitModel, generate_gait, generate_unsynchronized
from footforce.sync import (align_and_trim, detect_jump_windows, estimate_offset,
                            insole_accel_signal, mocap_vertical_accel, sync_signals, synchronize)

JUMP_CFG = GaitConfig(duration_s=30.0, jump_markers=True, seed=5)


def shift(a, k):
    """shift(a, k)[t] = a[t - k], zero outside."""
    out = np.zeros_like(a)
    if k >= 0:
        out[k:] = a[:len(a) - k]
    else:
        out[:k] = a[-k:]
    return out


def test_stationary_pose_zero_accel(skeleton):
    p = PoseSequence(np.ones((10, 23, 3)), 100.0)
    assert np.all(mocap_vertical_accel(p, skeleton) == 0)


def test_parabolic_feet_constant_accel(skeleton):
    t = np.arange(40) / 100.0
    p = np.zeros((40, 23, 3))
    p[:, :, 1] = 0.5 * 3.0 * t[:, None] ** 2
    a = mocap_vertical_accel(PoseSequence(p, 100.0), skeleton)
    assert a.shape == (40,)
    np.testing.assert_allclose(a[1:-1], 3.0, atol=1e-8)


def test_ballistic_flight_is_gravity():
    take = generate_gait(JUMP_CFG)
    a = mocap_vertical_accel(take.poses, take.skeleton)
    for t0, t1 in GaitModel(JUMP_CFG).jump_times:
        mid = int(round((t0 + t1) / 2 * 100))
        assert a[mid] == pytest.approx(-9.81, abs=0.05)


def test_offset_identical_is_zero():
    a = np.random.default_rng(0).normal(size=500)
    assert estimate_offset(a, a, 1.0) == 0


def test_offset_recovers_constructed_shift():
    a = np.random.default_rng(1).normal(size=800)
    est = estimate_offset(a, shift(a, 37), 1.0)
    assert est == 37 and not est.low_confidence


def test_offset_white_noise_low_confidence():
    rng = np.random.default_rng(2)
    est = estimate_offset(rng.normal(size=1000), rng.normal(size=1000), 1.0)
    assert est.low_confidence


def test_offset_degenerate_input():
    with pytest.raises(ValidationError):
        estimate_offset(np.zeros(100), np.ones(100), 0.1)
    with pytest.raises(ValidationError):
        estimate_offset(np.arange(10.0), np.arange(10.0), 1.0)


@given(seed=st.integers(0, 10**6), k=st.integers(-50, 50))
def test_offset_property(seed, k):
    rng = np.random.default_rng(seed)
    a = rng.normal(0, 0.1, size=400)
    a[int(rng.integers(100, 300))] += 10.0  # isolated peak
    assert estimate_offset(a, shift(a, k), 0.5) == k


def test_jump_windows_contain_spikes():
    take = generate_unsynchronized(JUMP_CFG, 0)
    sig = insole_accel_signal(take.imu_accel)
    (a0, a1), (b0, b1) = detect_jump_windows(sig, 100.0)
    times = [t for pair in take.attrs["jump_times"] for t in pair]
    assert a0 <= min(times[:2]) <= a1 or a0 <= times[1] <= a1
    assert b0 <= times[-1] <= b1 or b0 <= times[-2] <= b1


def test_jump_windows_definitional():
    x = np.zeros(6001)
    x[100] = 50.0
    x[5900] = 40.0
    x += np.random.default_rng(3).normal(0, 0.01, size=x.shape)
    (a0, a1), (b0, b1) = detect_jump_windows(x, 100.0)
    assert (a0, a1) == pytest.approx((0.5, 1.5))
    assert (b0, b1) == pytest.approx((58.5, 59.5))


def test_jump_windows_flat_series():
    with pytest.raises(ValidationError, match="fewer than two spikes"):
        detect_jump_windows(np.zeros(500), 100.0)


def test_align_offset_zero_no_windows(gait_take):
    out = align_and_trim(gait_take, 0)
    assert len(out) == len(gait_take)
    np.testing.assert_allclose(out.poses.positions, gait_take.poses.positions, atol=1e-5)
    assert np.array_equal(out.vgrf.values, gait_take.vgrf.values)


def test_align_windows_cover_take(gait_take):
    with pytest.raises(ValidationError, match="empty overlap"):
        align_and_trim(gait_take, 0, [(0.0, 10.0), (10.0, 20.0)])


def test_closed_loop_residual_lag_zero():
    take = generate_unsynchronized(JUMP_CFG, 64)
    synced, est = synchronize(take)
    assert abs(int(est) - 64) <= 1
    assert synced.synchronized
    assert synced.poses.rate_hz == 100.0
    ins, mo = sync_signals(synced.replace(imu_accel=np.asarray(take.imu_accel)[
        synced.attrs["sync"]["insole_span"][0]:synced.attrs["sync"]["insole_span"][1]]))
    assert estimate_offset(ins, mo, 1.0) == 0
    # ground-truth contacts sampled at insole times now line up with the motion
    from footforce.metrics import footskate
    assert footskate(synced.poses, synced.contacts, synced.skeleton) < 0.01


def test_align_idempotent_once_synchronized():
    take = generate_unsynchronized(JUMP_CFG, -30)
    synced, _ = synchronize(take)
    again = align_and_trim(synced, 0)
    assert len(again) == len(synced)
    np.testing.assert_allclose(again.poses.positions, synced.poses.positions, atol=1e-5)
    assert np.array_equal(again.contacts.labels, synced.contacts.labels)
