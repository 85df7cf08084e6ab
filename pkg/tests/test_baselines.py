import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from footforce.baselines import (OtSearch, OtThresholds, apply_ot, fit_ot, foot_features,
                                 load_thresholds, save_thresholds)
from footforce.core import ContactSequence, PoseSequence, ValidationError
from footforce.kinematics import RigidTransform, apply_rigid
from footforce.metrics import f1


def test_stationary_foot_on_ground(skeleton):
    p = PoseSequence(np.zeros((10, 23, 3)), 100.0)
    lab = apply_ot(p, skeleton, OtThresholds(0.01, 0.01, ground_y=0.0)).labels
    assert np.all(lab == 1)


def test_lifted_foot(skeleton):
    p = np.zeros((10, 23, 3))
    p[:, skeleton.foot_joints[0, 0], 1] = 1.0
    lab = apply_ot(PoseSequence(p, 100.0), skeleton, OtThresholds(0.05, 1.0, ground_y=0.0)).labels
    assert np.all(lab[:, 0, 0] == 0) and np.all(lab[:, 1] == 1)


def test_generous_thresholds_on_gait(gait_take):
    lab = apply_ot(gait_take.poses, gait_take.skeleton, OtThresholds(0.1, 0.5))
    assert f1(lab, gait_take.contacts)[0] >= 0.85


def test_too_short(skeleton):
    with pytest.raises(ValidationError):
        apply_ot(PoseSequence(np.zeros((2, 23, 3)), 100.0), skeleton, OtThresholds(0.1, 0.1))


def test_planted_thresholds_recovered(gait_take):
    planted = OtThresholds(0.05, 0.25)
    truth = apply_ot(gait_take.poses, gait_take.skeleton, planted)
    take = gait_take.replace(contacts=truth)
    thr, f, hist = fit_ot([take])
    assert f == 1.0
    assert f1(apply_ot(gait_take.poses, gait_take.skeleton, thr), truth)[0] == 1.0


def test_all_zero_truth_degenerate(gait_take, caplog):
    take = gait_take.replace(contacts=ContactSequence(np.zeros((len(gait_take), 2, 2)), 100.0))
    with caplog.at_level(logging.WARNING):
        thr, f, _ = fit_ot([take])
    assert (thr.height_m, thr.speed_mps) == (0.0, 0.0)
    assert "degenerate" in caplog.text


def test_fit_beats_every_level0_point(gait_take):
    thr, f, hist = fit_ot([gait_take])
    h, s = foot_features(gait_take.poses, gait_take.skeleton)
    t = gait_take.contacts.labels.astype(bool)
    for a in np.linspace(0, 0.30, 17):
        for b in np.linspace(0, 2.0, 17):
            pred = (h < a) & (s < b)
            assert f >= f1(pred, t)[0]
    assert all(x <= y for x, y in zip(hist, hist[1:]))


def test_fit_empty():
    with pytest.raises(ValidationError):
        fit_ot([])


@given(angle=st.floats(-np.pi, np.pi), dx=st.floats(-10, 10), dz=st.floats(-10, 10))
def test_invariant_to_horizontal_rigid_motion(gait_take, angle, dx, dz):
    thr = OtThresholds(0.04, 0.3, ground_y=0.0)
    p = gait_take.poses.slice(0, 300)
    p = PoseSequence(p.positions.astype(np.float64), p.rate_hz)
    moved = apply_rigid(p, RigidTransform.horizontal(angle, (dx, 0.0, dz)))
    a = apply_ot(p, gait_take.skeleton, thr).labels
    b = apply_ot(moved, gait_take.skeleton, thr).labels
    h, s = foot_features(p, gait_take.skeleton, 0.0)
    # labels may only differ where a feature sits within rounding of its threshold
    near = (np.abs(h - 0.04) < 1e-9) | (np.abs(s - 0.3) < 1e-9)
    assert np.array_equal(a[~near], b[~near])


def test_thresholds_json_round_trip(tmp_path):
    thr = OtThresholds(0.0123, 0.456, None)
    save_thresholds(thr, tmp_path / "t.json")
    assert load_thresholds(tmp_path / "t.json") == thr


def test_custom_search_levels(gait_take):
    _, _, hist = fit_ot([gait_take], OtSearch(grid=5, levels=4))
    assert len(hist) == 4
