"""Evaluation metrics for contacts, vGRF, centre of pressure and footskate.

F1 scores are micro-aggregated over every (frame, foot, location) entry.
"""
from __future__ import annotations

import csv
import json
import math

import numpy as np

from .core import ValidationError
from .grf import center_of_pressure
from .kinematics import finite_difference


def _labels(x):
    return np.asarray(getattr(x, "labels", x)).astype(bool)


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise ValidationError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def _prf(tp_pred, n_pred, tp_true, n_true):
    """Precision, recall and F1 with the empty-set conventions."""
    if n_pred:
        p = tp_pred / n_pred
    else:
        p = 1.0 if n_true == 0 else 0.0
    if n_true:
        r = tp_true / n_true
    else:
        r = 1.0 if n_pred == 0 else 0.0
    f = 0.0 if p + r == 0 else 2.0 * p * r / (p + r)
    return f, p, r


def f1(pred, truth):
    """(f1, precision, recall) over all entries; empty pred and truth give 1."""
    p, t = _labels(pred), _labels(truth)
    _same_shape(p, t, "f1")
    tp = int(np.count_nonzero(p & t))
    return _prf(tp, int(p.sum()), tp, int(t.sum()))


def _dilate(x, k):
    """Along axis 0: True where any True lies within k frames."""
    if k == 0:
        return x.copy()
    n = x.shape[0]
    c = np.concatenate([np.zeros((1,) + x.shape[1:], dtype=np.int64),
                        np.cumsum(x, axis=0, dtype=np.int64)])
    idx = np.arange(n)
    lo = np.clip(idx - k, 0, n)
    hi = np.clip(idx + k + 1, 0, n)
    return (c[hi] - c[lo]) > 0


def f1_tolerance_curve(pred, truth, max_tol_frames):
    """F1 for temporal tolerances k = 0..max_tol_frames.

    A predicted positive counts as correct when the same channel has a true
    positive within k frames, and a true positive counts as found when a
    predicted positive lies within k frames.
    """
    p, t = _labels(pred), _labels(truth)
    _same_shape(p, t, "f1_tolerance_curve")
    if max_tol_frames < 0:
        raise ValidationError("max_tol_frames must be non-negative")
    n_pred, n_true = int(p.sum()), int(t.sum())
    out = np.empty(max_tol_frames + 1)
    for k in range(max_tol_frames + 1):
        tp_pred = int(np.count_nonzero(p & _dilate(t, k)))
        tp_true = int(np.count_nonzero(t & _dilate(p, k)))
        out[k] = _prf(tp_pred, n_pred, tp_true, n_true)[0]
    return out


def _runs(mask):
    """(start, stop) of maximal True runs of a 1-D boolean array."""
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def offcontact_fp_profile(pred, truth, bins):
    """False-positive rate over off-contact phases mapped to [0, 1].

    Frame ``i`` of an off run ``[s, e)`` sits at ``(i - s + 0.5) / (e - s)``
    and falls into one of ``bins`` equal sub-intervals. Returns the per-bin
    fraction of off-contact frames predicted as contact (0 for empty bins).
    """
    p, t = _labels(pred), _labels(truth)
    _same_shape(p, t, "offcontact_fp_profile")
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    p2 = p.reshape(p.shape[0], -1)
    t2 = t.reshape(t.shape[0], -1)
    fp = np.zeros(bins)
    cnt = np.zeros(bins)
    found = False
    for c in range(t2.shape[1]):
        for s, e in _runs(~t2[:, c]):
            found = True
            n = e - s
            u = (np.arange(n) + 0.5) / n
            b = np.minimum((u * bins).astype(np.int64), bins - 1)
            np.add.at(cnt, b, 1)
            np.add.at(fp, b, p2[s:e, c])
    if not found:
        raise ValidationError("offcontact_fp_profile: truth has no off-contact phase")
    return np.divide(fp, cnt, out=np.zeros(bins), where=cnt > 0)


def vgrf_rmse(pred, truth):
    """Per-foot RMSE (2,) of the 16-cell sums, body-weight fraction."""
    a, b = _values(pred), _values(truth)
    _same_shape(a, b, "vgrf_rmse")
    d = a.sum(axis=-1) - b.sum(axis=-1)
    return np.sqrt(np.mean(d * d, axis=0))


def cop_mad(pred, truth, layout, gate_bw=0.10):
    """Per-foot median CoP distance (2,), millimetres.

    Frames count when both CoPs are defined. A foot without such frames
    gets NaN; if no foot has any the call fails.
    """
    a, b = _values(pred), _values(truth)
    _same_shape(a, b, "cop_mad")
    ca = center_of_pressure(a, layout, gate_bw)
    cb = center_of_pressure(b, layout, gate_bw)
    d = np.linalg.norm(ca - cb, axis=-1) * 1000.0
    out = np.full(2, np.nan)
    for f in range(2):
        ok = np.isfinite(d[:, f])
        if ok.any():
            out[f] = float(np.median(d[ok, f]))
    if np.all(np.isnan(out)):
        raise ValidationError("cop_mad: no frame where both CoPs are defined")
    return out


def footskate(poses, contacts, skeleton):
    """Mean horizontal speed (m/s) of foot joints over frames labelled in contact."""
    p = np.asarray(poses.positions, dtype=np.float64)
    if p.shape[0] < 3:
        raise ValidationError("footskate needs at least 3 frames")
    lab = _labels(contacts)
    if lab.shape != (p.shape[0], 2, 2):
        raise ValidationError(f"footskate: contacts shape {lab.shape} does not match {p.shape[0]} frames")
    if getattr(contacts, "rate_hz", poses.rate_hz) != poses.rate_hz:
        raise ValidationError("footskate: contacts and poses have different rates")
    feet = p[:, skeleton.foot_joints]  # (T, 2, 2, 3)
    v = finite_difference(feet[..., [0, 2]], 1, poses.rate_hz)
    speed = np.linalg.norm(v, axis=-1)
    if not lab.any():
        return 0.0
    return float(speed[lab].mean())


# -- reports -------------------------------------------------------------------

def contact_report(items, max_tol_frames=10):
    """Rows per take plus a micro-aggregated row.

    ``items`` is a list of (name, pred, truth). Each row holds f1,
    precision, recall and the tolerance curve.
    """
    rows = []
    all_p, all_t = [], []
    for name, pred, truth in items:
        p, t = _labels(pred), _labels(truth)
        f, pr, rc = f1(p, t)
        curve = f1_tolerance_curve(p, t, max_tol_frames)
        rows.append(_row(name, f, pr, rc, curve))
        all_p.append(p)
        all_t.append(t)
    if items:
        p = np.concatenate(all_p)
        t = np.concatenate(all_t)
        f, pr, rc = f1(p, t)
        # tolerance windows must not cross take boundaries, so sum the counts per take
        curve = _micro_curve(all_p, all_t, max_tol_frames)
        rows.append(_row("ALL", f, pr, rc, curve))
    return rows


def _micro_curve(ps, ts, max_tol):
    out = np.empty(max_tol + 1)
    n_pred = sum(int(p.sum()) for p in ps)
    n_true = sum(int(t.sum()) for t in ts)
    for k in range(max_tol + 1):
        tp_p = sum(int(np.count_nonzero(p & _dilate(t, k))) for p, t in zip(ps, ts))
        tp_t = sum(int(np.count_nonzero(t & _dilate(p, k))) for p, t in zip(ps, ts))
        out[k] = _prf(tp_p, n_pred, tp_t, n_true)[0]
    return out


def _row(name, f, p, r, curve):
    row = {"take": name, "f1": f, "precision": p, "recall": r}
    for k, v in enumerate(curve):
        row[f"f1_tol{k}"] = float(v)
    return row


def vgrf_report(items, layout, gate_bw=0.10):
    """Rows of per-foot RMSE and CoP MAD; ``items`` is a list of (name, pred, truth)."""
    rows = []
    for name, pred, truth in items:
        rmse = vgrf_rmse(pred, truth)
        try:
            mad = cop_mad(pred, truth, layout, gate_bw)
        except ValidationError:
            mad = np.full(2, np.nan)
        rows.append({"take": name, "rmse_left_bw": rmse[0], "rmse_right_bw": rmse[1],
                     "cop_mad_left_mm": mad[0], "cop_mad_right_mm": mad[1]})
    return rows


def write_report(rows, path):
    """CSV or JSON depending on the file extension."""
    path = str(path)
    clean = [{k: (None if isinstance(v, float) and math.isnan(v) else
                  float(v) if isinstance(v, (np.floating, float)) else v)
              for k, v in r.items()} for r in rows]
    if path.endswith(".json"):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(clean, f, indent=2)
            f.write("\n")
        return
    keys = []
    for r in clean:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=keys)
        w.writeheader()
        for r in clean:
            w.writerow({k: ("" if v is None else (repr(v) if isinstance(v, float) else v))
                        for k, v in r.items()})
