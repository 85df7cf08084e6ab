import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from footforce.core import InsoleLayout, PoseSequence, ValidationError
from footforce.metrics import (contact_report, cop_mad, f1, f1_tolerance_curve, footskate,
                               offcontact_fp_profile, vgrf_rmse, write_report)

LAYOUT = InsoleLayout.default()
labels = st.integers(0, 10**6).map(
    lambda s: (np.random.default_rng(s).random((60, 2, 2)) < 0.5).astype(np.uint8))


def test_f1_identity_and_complement():
    t = (np.random.default_rng(0).random((50, 2, 2)) < 0.5).astype(np.uint8)
    assert f1(t, t) == (1.0, 1.0, 1.0)
    assert f1(1 - t, t)[0] == 0.0


def test_f1_counting_example():
    truth = np.zeros((40, 2, 2), dtype=np.uint8)
    truth[:10, 0, 0] = 1
    pred = np.zeros_like(truth)
    pred[:5, 0, 0] = 1
    pred[20:25, 1, 1] = 1
    f, p, r = f1(pred, truth)
    assert (f, p, r) == (0.5, 0.5, 0.5)


def test_f1_empty_conventions():
    z = np.zeros((5, 2, 2))
    assert f1(z, z)[0] == 1.0
    o = np.ones((5, 2, 2))
    assert f1(z, o)[0] == 0.0
    assert f1(o, z)[0] == 0.0


def test_f1_shape_mismatch():
    with pytest.raises(ValidationError):
        f1(np.zeros((5, 2, 2)), np.zeros((6, 2, 2)))


@given(a=labels, b=labels)
def test_precision_recall_swap(a, b):
    _, p, r = f1(a, b)
    _, p2, r2 = f1(b, a)
    assert p == r2 and r == p2


@given(a=labels, b=labels, perm=st.permutations([0, 1, 2, 3]))
def test_f1_channel_relabeling(a, b, perm):
    pa = a.reshape(60, 4)[:, perm].reshape(60, 2, 2)
    pb = b.reshape(60, 4)[:, perm].reshape(60, 2, 2)
    assert f1(pa, pb) == f1(a, b)


def test_tolerance_shift_by_two():
    truth = np.zeros((100, 2, 2), dtype=np.uint8)
    truth[20:40] = 1
    truth[60:80, 1] = 1
    pred = np.roll(truth, 2, axis=0)
    curve = f1_tolerance_curve(pred, truth, 5)
    assert curve[0] == f1(pred, truth)[0]
    assert curve[0] < 1 and curve[1] < 1
    assert np.all(curve[2:] == 1.0)


@given(a=labels, b=labels, k=st.integers(0, 8))
def test_tolerance_curve_monotone(a, b, k):
    c = f1_tolerance_curve(a, b, k)
    assert c[0] == f1(a, b)[0]
    assert np.all(np.diff(c) >= 0)


def test_fp_profile_cases():
    truth = np.zeros((90, 2, 2), dtype=np.uint8)
    truth[:20] = 1
    truth[41:60] = 1
    truth[81:] = 1
    assert np.all(offcontact_fp_profile(truth, truth, 5) == 0)
    pred = truth.copy()
    # off runs are [20, 41) and [60, 81): 21 frames each, middle frames 30 and 70
    pred[30] = 1
    pred[70] = 1
    prof = offcontact_fp_profile(pred, truth, 5)
    assert np.argmax(prof) == 2
    assert np.count_nonzero(prof) == 1
    # every channel has 2 off runs of 21 frames; bin 2 holds frames 9..12 of each run
    assert prof[2] == pytest.approx(1 / 5)


@given(a=labels, b=labels, bins=st.integers(1, 12))
def test_fp_profile_bounds(a, b, bins):
    if b.all():
        return
    prof = offcontact_fp_profile(a, b, bins)
    assert np.all((prof >= 0) & (prof <= 1))


def test_fp_profile_requires_off_phase():
    with pytest.raises(ValidationError):
        offcontact_fp_profile(np.ones((5, 2, 2)), np.ones((5, 2, 2)), 3)


def test_rmse_cases():
    rng = np.random.default_rng(1)
    F = rng.random((30, 2, 16))
    assert np.all(vgrf_rmse(F, F) == 0)
    G = F.copy()
    G[:, 0, 3] += 0.1
    np.testing.assert_allclose(vgrf_rmse(G, F), [0.1, 0.0], atol=1e-12)
    H = rng.random((30, 2, 16))
    ref = np.zeros(2)
    for f in range(2):
        acc = 0.0
        for t in range(30):
            acc += (H[t, f].sum() - F[t, f].sum()) ** 2
        ref[f] = np.sqrt(acc / 30)
    np.testing.assert_allclose(vgrf_rmse(H, F), ref, rtol=0, atol=1e-12)


def _two_cells(a, b, n=11):
    v = np.zeros((n, 2, 16))
    v[:, :, a] = 0.5
    w = np.zeros((n, 2, 16))
    w[:, :, b] = 0.5
    return v, w


def test_cop_mad_cases():
    F = np.random.default_rng(2).random((20, 2, 16))
    np.testing.assert_allclose(cop_mad(F, F, LAYOUT), 0.0, atol=1e-12)
    # cells 8 and 11 sit 30 mm apart on the forward axis
    np.testing.assert_allclose(np.linalg.norm(LAYOUT.position[0, 11] - LAYOUT.position[0, 8]), 0.03)
    pred, truth = _two_cells(11, 8)
    np.testing.assert_allclose(cop_mad(pred, truth, LAYOUT), 30.0, atol=1e-9)


def test_cop_mad_median_robust():
    pred, truth = _two_cells(11, 8, n=21)
    pred[:10, :, :] = 0
    pred[:10, :, 15] = 0.5  # 10 of 21 frames moved far away
    np.testing.assert_allclose(cop_mad(pred, truth, LAYOUT), 30.0, atol=1e-9)


def test_cop_mad_no_defined_frame():
    with pytest.raises(ValidationError):
        cop_mad(np.zeros((4, 2, 16)), np.zeros((4, 2, 16)), LAYOUT)


def test_footskate_cases(skeleton, gait_take):
    assert footskate(gait_take.poses, gait_take.contacts, skeleton) < 1e-3
    T = 50
    p = np.zeros((T, 23, 3))
    p[:, :, 0] = 0.2 * np.arange(T)[:, None] / 100.0
    p[:, :, 1] = np.sin(np.arange(T))[:, None]  # vertical motion is ignored
    c = np.zeros((T, 2, 2), dtype=np.uint8)
    c[10:30, 0, 0] = 1
    assert footskate(PoseSequence(p, 100.0), c, skeleton) == pytest.approx(0.2)
    assert footskate(PoseSequence(p, 100.0), np.zeros((T, 2, 2)), skeleton) == 0.0
    with pytest.raises(ValidationError):
        footskate(PoseSequence(p[:2], 100.0), c[:2], skeleton)


def test_report_rows_and_files(tmp_path):
    t = (np.random.default_rng(3).random((40, 2, 2)) < 0.5).astype(np.uint8)
    rows = contact_report([("a", t, t), ("b", 1 - t, t)], max_tol_frames=2)
    assert [r["take"] for r in rows] == ["a", "b", "ALL"]
    assert rows[0]["f1"] == 1.0 and rows[1]["f1"] == 0.0
    write_report(rows, tmp_path / "r.csv")
    write_report(rows, tmp_path / "r.json")
    assert (tmp_path / "r.csv").read_text().splitlines()[0].startswith("take,f1,precision,recall")
