"""Alignment of insole recordings with motion capture.

Both devices see the feet: the insole IMUs measure specific force, the
motion capture yields foot heights. Their acceleration traces are
cross-correlated to find a constant sample offset, then the control jumps
recorded at both ends of a take are cut away.

Offset convention: with offset ``k``, insole sample ``i`` corresponds to
motion time ``(i + k) / r`` where ``r`` is the insole rate. Equivalently
``estimate_offset(a, shift(a, k)) == k`` for ``shift(a, k)[t] = a[t - k]``.
"""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .core import (GRAVITY, ContactSequence, PressureSequence, Take, ValidationError,
                   VgrfSequence)
from .kinematics import finite_difference, forward_kinematics, resample_motion, resample_positions

FILTER_SIGMA_S = 0.02
LOW_CONFIDENCE = 0.5
SPIKE_MADS = 6.0
WINDOW_HALF_S = 0.5
SPIKE_MERGE_S = 0.25


class OffsetEstimate(int):
    """Integer lag that also carries the correlation peak."""

    peak: float

    def __new__(cls, lag, peak):
        obj = super().__new__(cls, int(lag))
        obj.peak = float(peak)
        return obj

    @property
    def low_confidence(self):
        return self.peak < LOW_CONFIDENCE

    def __repr__(self):
        return f"OffsetEstimate({int(self)}, peak={self.peak:.3f})"


def mocap_vertical_accel(poses, skeleton):
    """Second derivative (m/s^2) of the mean height of the four foot joints, shape (T,)."""
    p = np.asarray(poses.positions, dtype=np.float64)
    if p.shape[0] < 3:
        raise ValidationError("mocap_vertical_accel needs at least 3 frames")
    h = p[:, skeleton.foot_joints.ravel(), 1].mean(axis=1)
    return finite_difference(h, 2, poses.rate_hz)


def insole_accel_signal(imu_accel):
    """Specific-force magnitude minus gravity, averaged over both feet, shape (T,)."""
    a = np.asarray(imu_accel, dtype=np.float64)
    return (np.linalg.norm(a, axis=-1) - GRAVITY).mean(axis=-1)


def lowpass(series, rate_hz, sigma_s=FILTER_SIGMA_S):
    return gaussian_filter1d(np.asarray(series, dtype=np.float64), sigma_s * rate_hz,
                             mode="nearest", truncate=4.0)


def sync_signals(take):
    """Filtered (insole, mocap) acceleration traces, both at the insole rate."""
    if take.imu_accel is None:
        raise ValidationError("take has no insole IMU data")
    r = take.insole_rate_hz
    ins = lowpass(insole_accel_signal(take.imu_accel), r)
    mo = lowpass(mocap_vertical_accel(take.poses, take.skeleton), take.poses.rate_hz)
    mo = resample_positions(mo, take.poses.rate_hz, r)
    return ins, mo


def _lag_order(max_lag):
    lags = [0]
    for k in range(1, max_lag + 1):
        lags += [-k, k]
    return lags


def estimate_offset(insole_accel, mocap_accel, max_lag_s, rate_hz=100.0):
    """Lag in [-max_lag, max_lag] maximizing normalized cross-correlation.

    The correlation at each lag is the Pearson coefficient over the
    overlapping part. Ties go to the smallest ``|lag|``.
    """
    a = np.asarray(insole_accel, dtype=np.float64).ravel()
    b = np.asarray(mocap_accel, dtype=np.float64).ravel()
    max_lag = int(round(max_lag_s * rate_hz))
    if max_lag < 0:
        raise ValidationError("max_lag_s must be non-negative")
    if max_lag >= min(len(a), len(b)):
        raise ValidationError(f"max lag {max_lag} samples must be shorter than both series "
                              f"({len(a)}, {len(b)})")
    if np.std(a) == 0 or np.std(b) == 0:
        raise ValidationError("estimate_offset: zero-variance series")
    best_lag, best = 0, -np.inf
    for lag in _lag_order(max_lag):
        # pair a[t] with b[t + lag]
        t0 = max(0, -lag)
        t1 = min(len(a), len(b) - lag)
        if t1 - t0 < 2:
            continue
        x = a[t0:t1] - a[t0:t1].mean()
        y = b[t0 + lag:t1 + lag] - b[t0 + lag:t1 + lag].mean()
        den = np.sqrt(np.dot(x, x) * np.dot(y, y))
        c = np.dot(x, y) / den if den > 0 else 0.0
        if c > best:
            best_lag, best = lag, c
    return OffsetEstimate(best_lag, best)


def detect_jump_windows(series, rate_hz, half_width_s=WINDOW_HALF_S):
    """Windows around the first and last prominent spike of ``series``.

    A spike is a run of samples above median + 6 MAD; runs closer than
    0.25 s are merged and each is located at its maximum.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    duration = (len(x) - 1) / rate_hz
    if len(x) < 2 * rate_hz:
        raise ValidationError("detect_jump_windows needs at least 2 s of data")
    med = np.median(x)
    mad = np.median(np.abs(x - med))
    above = x > med + SPIKE_MADS * mad
    idx = np.flatnonzero(above)
    if len(idx) == 0:
        raise ValidationError("fewer than two spikes found")
    breaks = np.flatnonzero(np.diff(idx) > SPIKE_MERGE_S * rate_hz)
    groups = np.split(idx, breaks + 1)
    if len(groups) < 2:
        raise ValidationError("fewer than two spikes found")
    peaks = [g[np.argmax(x[g])] / rate_hz for g in (groups[0], groups[-1])]
    return [(max(0.0, p - half_width_s), min(duration, p + half_width_s)) for p in peaks]


def align_and_trim(take, offset, pattern_windows=()):
    """Shift the insole series by ``offset``, crop to the overlap, cut the jump windows.

    ``pattern_windows`` are (start, end) intervals in insole time (seconds).
    The kept span runs from the end of the first window to the start of the
    last one; without windows the whole overlap is kept. Motion is resampled
    to the insole rate.
    """
    r = take.insole_rate_hz
    motion = take.local_motion
    if motion is not None:
        motion = resample_motion(motion, r)
        poses = forward_kinematics(take.skeleton, motion)
    else:
        poses = take.poses.__class__(resample_positions(take.poses.positions, take.poses.rate_hz, r), r)
    n_ins = len(take.vgrf) if take.vgrf is not None else len(take.pressure)
    n_mo = len(poses)
    k = int(offset)
    # insole i <-> motion i + k
    i0 = max(0, -k)
    i1 = min(n_ins, n_mo - k)
    windows = sorted((float(a), float(b)) for a, b in pattern_windows)
    if windows:
        if len(windows) == 1:
            raise ValidationError("need zero or two pattern windows")
        i0 = max(i0, int(np.ceil(windows[0][1] * r - 1e-9)) + 1)
        i1 = min(i1, int(np.floor(windows[-1][0] * r + 1e-9)))
    if i1 - i0 < 1:
        raise ValidationError("align_and_trim: empty overlap")

    def ins(seq, cls):
        if seq is None:
            return None
        return cls(seq.values[i0:i1] if hasattr(seq, "values") else seq.labels[i0:i1], r)

    m0, m1 = i0 + k, i1 + k
    out = take.replace(
        poses=poses.slice(m0, m1),
        local_motion=motion.slice(m0, m1) if motion is not None else None,
        pressure=ins(take.pressure, PressureSequence),
        vgrf=ins(take.vgrf, VgrfSequence),
        contacts=ins(take.contacts, ContactSequence),
        imu_accel=None if take.imu_accel is None else np.asarray(take.imu_accel)[i0:i1],
        poses_original=None,
        synchronized=True,
        attrs={**take.attrs, "sync": {"offset": k, "insole_span": [i0, i1],
                                       "pattern_windows": [list(w) for w in windows]}},
    )
    return out


def synchronize(take, max_lag_s=3.0, trim=True):
    """Estimate the offset, detect the jump windows and align; returns (take, estimate)."""
    ins, mo = sync_signals(take)
    est = estimate_offset(ins, mo, max_lag_s, take.insole_rate_hz)
    windows = ()
    if trim:
        windows = detect_jump_windows(insole_accel_signal(take.imu_accel), take.insole_rate_hz)
    return align_and_trim(take, est, windows), est
