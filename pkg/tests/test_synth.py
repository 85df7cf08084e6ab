import numpy as np
import pytest

from footforce.core import ValidationError, validate_take
from footforce.grf import contact_labels, total_vgrf
from footforce.metrics import f1, footskate
from footforce.synth import GaitConfig, generate_blend_ground_truth, generate_gait, gait_dataset


def _transition_errors(pred, truth):
    """Per channel, frame distance from every truth transition to the nearest predicted one."""
    out = []
    for f in range(2):
        for loc in range(2):
            ep = np.flatnonzero(np.diff(pred[:, f, loc].astype(int)))
            et = np.flatnonzero(np.diff(truth[:, f, loc].astype(int)))
            for e in et:
                out.append(np.min(np.abs(ep - e)) if len(ep) else np.inf)
    return np.array(out)


def test_take_is_valid(gait_take):
    assert validate_take(gait_take) == []


def test_duty_factor_schedule():
    cfg = GaitConfig(duration_s=30.0, cycle_s=1.2, duty_factor=0.6, seed=1)
    lab = generate_gait(cfg).contacts.labels
    for f in range(2):
        any_c = lab[:, f].any(axis=1).astype(int)
        d = np.diff(any_c)
        starts, ends = np.flatnonzero(d == 1) + 1, np.flatnonzero(d == -1) + 1
        ends = ends[ends > starts[0]]
        lengths = [e - s for s, e in zip(starts, ends)]
        assert all(abs(n - 72) <= 1 for n in lengths), lengths


def test_swing_has_no_force_and_lifted_feet(gait_take):
    lab = gait_take.contacts.labels
    tot = total_vgrf(gait_take.vgrf)
    pos = gait_take.poses.positions
    sk = gait_take.skeleton
    for f in range(2):
        swing = ~lab[:, f].any(axis=1)
        # contacts are sampled on the schedule, so one frame either side may carry ramp force
        core = swing & np.roll(swing, 1) & np.roll(swing, -1)
        assert np.all(tot[core, f] == 0)
        h = pos[core][:, sk.foot_joints[f], 1].max(axis=1)
        assert np.all(h > 0)


def test_stance_feet_pinned_on_ground(gait_take):
    lab = gait_take.contacts.labels
    pos = gait_take.poses.positions
    sk = gait_take.skeleton
    for f in range(2):
        for loc in range(2):
            on = lab[:, f, loc] == 1
            np.testing.assert_allclose(pos[on, sk.foot_joints[f, loc], 1], 0.0, atol=1e-5)
    assert footskate(gait_take.poses, gait_take.contacts, sk) < 1e-3


def test_force_is_nonnegative_and_about_one_bodyweight(gait_take):
    v = gait_take.vgrf.values
    assert np.all(v >= 0)
    mean_total = total_vgrf(gait_take.vgrf).sum(axis=1).mean()
    assert mean_total == pytest.approx(1.0, abs=0.05)


def test_contact_function_reproduces_schedule(gait_take):
    pred = contact_labels(gait_take.vgrf, gait_take.layout).labels
    truth = gait_take.contacts.labels
    err = _transition_errors(pred[20:-20], truth[20:-20])
    assert err.max() <= 2
    assert f1(pred, truth)[0] > 0.99


def test_deterministic():
    a = generate_gait(GaitConfig(duration_s=5.0, seed=11))
    b = generate_gait(GaitConfig(duration_s=5.0, seed=11))
    assert np.array_equal(a.poses.positions, b.poses.positions)
    assert np.array_equal(a.vgrf.values, b.vgrf.values)


def test_invalid_config():
    with pytest.raises(ValidationError):
        generate_gait(GaitConfig(duty_factor=1.2))
    with pytest.raises(ValidationError):
        generate_gait(GaitConfig(duration_s=1.0))


def test_blend_pair_shares_schedule():
    a, b = generate_blend_ground_truth(GaitConfig(duration_s=12.0, seed=4), np.random.default_rng(0))
    assert np.array_equal(a.contacts.labels, b.contacts.labels)
    dist = np.linalg.norm(a.poses.positions - b.poses.positions, axis=-1).mean()
    assert dist > 0.01
    for tk in (a, b):
        pred = contact_labels(tk.vgrf, tk.layout).labels
        assert _transition_errors(pred[20:-20], tk.contacts.labels[20:-20]).max() <= 2


def test_dataset_length():
    takes = gait_dataset(75.0, seed=2, take_s=30.0)
    assert [len(t) for t in takes] == [3000, 3000, 1500]
    assert len({t.meta.id for t in takes}) == 3
