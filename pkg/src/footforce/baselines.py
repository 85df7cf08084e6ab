"""Optimal-thresholds (OT) contact detector.

A foot location is in contact when its joint is close to the ground and
slow. Heel maps to the ankle joint, toe to the toe joint.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .core import ContactSequence, ValidationError
from .kinematics import finite_difference
from .metrics import _prf

log = logging.getLogger(__name__)

GROUND_PERCENTILE = 1.0


@dataclass(frozen=True)
class OtThresholds:
    height_m: float
    speed_mps: float
    ground_y: float | None = None  # None: estimate per take

    def __post_init__(self):
        if self.height_m < 0 or self.speed_mps < 0:
            raise ValidationError("OT thresholds must be non-negative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["height_m"]), float(d["speed_mps"]),
                   None if d.get("ground_y") is None else float(d["ground_y"]))


@dataclass(frozen=True)
class OtSearch:
    height_range: tuple = (0.0, 0.30)
    speed_range: tuple = (0.0, 2.0)
    grid: int = 17
    levels: int = 3


def estimate_ground(poses, skeleton):
    """1st percentile of the heel (ankle) joint heights."""
    p = np.asarray(poses.positions, dtype=np.float64)
    return float(np.percentile(p[:, skeleton.foot_joints[:, 0], 1], GROUND_PERCENTILE))


def foot_features(poses, skeleton, ground_y=None):
    """Heights above ground and speeds of the foot joints, each (T, 2, 2)."""
    p = np.asarray(poses.positions, dtype=np.float64)
    if p.shape[0] < 3:
        raise ValidationError("OT needs at least 3 frames")
    if ground_y is None:
        ground_y = estimate_ground(poses, skeleton)
    feet = p[:, skeleton.foot_joints]
    height = feet[..., 1] - ground_y
    speed = np.linalg.norm(finite_difference(feet, 1, poses.rate_hz), axis=-1)
    return height, speed


def apply_ot(poses, skeleton, thr):
    height, speed = foot_features(poses, skeleton, thr.ground_y)
    lab = (height < thr.height_m) & (speed < thr.speed_mps)
    return ContactSequence(lab.astype(np.uint8), poses.rate_hz)


def _grid(lo, hi, n):
    return np.linspace(lo, hi, n)


def fit_ot(takes, search=OtSearch()):
    """Thresholds maximizing micro F1 over ``takes`` by recursive grid search.

    Each level evaluates a ``grid`` x ``grid`` lattice; the next level
    re-grids the +-1 cell neighbourhood of the incumbent (clipped to the
    search range). Ties go to the smaller height, then the smaller speed;
    a later level only replaces the incumbent with a strictly better F1.
    Returns ``(thresholds, f1, history)`` with the best F1 after each level.
    """
    takes = list(takes)
    if not takes:
        raise ValidationError("fit_ot: empty training set")
    hs, ss, ts = [], [], []
    for tk in takes:
        if tk.contacts is None:
            raise ValidationError("fit_ot: take without contacts")
        h, s = foot_features(tk.poses, tk.skeleton)
        if len(tk.contacts) != len(h):
            raise ValidationError("fit_ot: contacts and poses differ in length")
        hs.append(h.ravel())
        ss.append(s.ravel())
        ts.append(tk.contacts.labels.astype(bool).ravel())
    h = np.concatenate(hs)
    s = np.concatenate(ss)
    t = np.concatenate(ts)
    n_true = int(t.sum())
    if n_true == 0:
        log.warning("fit_ot: ground truth has no contacts; thresholds are degenerate")

    def score(a, b):
        pred = (h < a) & (s < b)
        tp = int(np.count_nonzero(pred & t))
        return _prf(tp, int(pred.sum()), tp, n_true)[0]

    (h_lo, h_hi), (s_lo, s_hi) = search.height_range, search.speed_range
    best, best_f = None, -1.0
    history = []
    lo_a, hi_a, lo_b, hi_b = h_lo, h_hi, s_lo, s_hi
    for _ in range(search.levels):
        ga, gb = _grid(lo_a, hi_a, search.grid), _grid(lo_b, hi_b, search.grid)
        level_best, level_f = None, -1.0
        for a in ga:
            for b in gb:
                f = score(a, b)
                if f > level_f:
                    level_best, level_f = (float(a), float(b)), f
        if best is None or level_f > best_f:
            best, best_f = level_best, level_f
        history.append(best_f)
        da = (hi_a - lo_a) / (search.grid - 1)
        db = (hi_b - lo_b) / (search.grid - 1)
        lo_a, hi_a = max(h_lo, best[0] - da), min(h_hi, best[0] + da)
        lo_b, hi_b = max(s_lo, best[1] - db), min(s_hi, best[1] + db)
    return OtThresholds(best[0], best[1]), best_f, history


def save_thresholds(thr, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(thr.to_dict(), f, indent=2)
        f.write("\n")


def load_thresholds(path):
    with open(path, encoding="utf-8") as f:
        return OtThresholds.from_dict(json.load(f))
