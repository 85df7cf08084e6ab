"""Perturbed motions for robustness experiments: position noise and blending."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import quaternion as quat
from .core import ContactSequence, LocalMotion, PoseSequence, ValidationError


def add_noise(poses, sigma_m, rng):
    """I.i.d. Gaussian noise of std ``sigma_m`` on every coordinate."""
    if sigma_m < 0:
        raise ValidationError("sigma_m must be >= 0")
    p = np.asarray(poses.positions)
    if sigma_m == 0:
        return PoseSequence(p.copy(), poses.rate_hz)
    noise = rng.normal(0.0, sigma_m, size=p.shape)
    return PoseSequence((p + noise).astype(p.dtype), poses.rate_hz)


@dataclass(frozen=True)
class BlendPair:
    a: tuple  # (take index, start frame)
    b: tuple
    foot: int  # 0 left, 1 right: the foot whose contact pattern matches


def mine_blend_pairs(contacts, window=80, stride=10):
    """Pairs of distinct windows with identical contacts on one foot.

    ``contacts`` is a list of ContactSequence (or label arrays), one per take.
    Windows start every ``stride`` frames. A pair matches on a foot when both
    heel and toe labels agree on every frame. Pairs are returned sorted, and
    a pair matching on both feet is listed once per foot.
    """
    if window < 1 or stride < 1:
        raise ValidationError("window and stride must be >= 1")
    labels = [np.asarray(getattr(c, "labels", c), dtype=np.uint8) for c in contacts]
    out = []
    for foot in (0, 1):
        groups = defaultdict(list)
        for ti, lab in enumerate(labels):
            for s in range(0, lab.shape[0] - window + 1, stride):
                key = lab[s:s + window, foot].tobytes()
                groups[key].append((ti, s))
        for members in groups.values():
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    out.append(BlendPair(members[i], members[j], foot))
    out.sort(key=lambda p: (p.a, p.b, p.foot))
    return out


def smoothstep_weights(n):
    u = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    return u * u * (3.0 - 2.0 * u)


def linear_weights(n):
    return np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)


def _heading(q_root):
    f = quat.rotate(q_root, np.array([0.0, 0.0, 1.0]))
    return float(np.arctan2(f[0], f[2]))


def align_to(b, a):
    """Move ``b`` horizontally so its first frame shares the root position and
    heading of ``a``'s first frame."""
    rb = np.asarray(b.root_translation, dtype=np.float64)
    qb = np.array(b.rotations, dtype=np.float64)
    d = _heading(np.asarray(a.rotations[0, 0], dtype=np.float64)) - _heading(qb[0, 0])
    r = quat.yaw(d)
    root = quat.rotate(r, rb - rb[0]) + rb[0]
    root[:, [0, 2]] += np.asarray(a.root_translation[0], dtype=np.float64)[[0, 2]] - rb[0, [0, 2]]
    qb[:, 0] = quat.mul(r, qb[:, 0])
    return LocalMotion(root, qb, b.rate_hz)


def blend(a, b, weights=None):
    """Per-frame lerp of the root and slerp of every joint rotation from ``a`` to ``b``."""
    if len(a) != len(b):
        raise ValidationError(f"blend: lengths differ ({len(a)} vs {len(b)})")
    if a.rotations.shape[1:] != b.rotations.shape[1:]:
        raise ValidationError("blend: joint counts differ")
    if a.rate_hz != b.rate_hz:
        raise ValidationError("blend: rates differ")
    w = smoothstep_weights(len(a)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (len(a),) or np.any(w < 0) or np.any(w > 1):
        raise ValidationError("blend: weights must be (T,) in [0, 1]")
    ra = np.asarray(a.root_translation, dtype=np.float64)
    rb = np.asarray(b.root_translation, dtype=np.float64)
    root = ra + (rb - ra) * w[:, None]
    qa = np.asarray(a.rotations, dtype=np.float64)
    qb = np.asarray(b.rotations, dtype=np.float64)
    rot = quat.slerp(qa, qb, w[:, None])
    # the endpoints are returned exactly rather than through the slerp formula
    rot[w == 0] = qa[w == 0]
    rot[w == 1] = qb[w == 1]
    root[w == 0] = ra[w == 0]
    root[w == 1] = rb[w == 1]
    return LocalMotion(root, rot, a.rate_hz)


def blend_contacts(ca, cb, foot):
    """Ground truth of a blend: the shared pattern on ``foot``; the other foot is
    in contact only where both sources are."""
    la = np.asarray(getattr(ca, "labels", ca), dtype=np.uint8)
    lb = np.asarray(getattr(cb, "labels", cb), dtype=np.uint8)
    if la.shape != lb.shape:
        raise ValidationError("blend_contacts: shapes differ")
    if not np.array_equal(la[:, foot], lb[:, foot]):
        raise ValidationError("blend_contacts: patterns differ on the matched foot")
    out = la & lb
    out[:, foot] = la[:, foot]
    rate = getattr(ca, "rate_hz", 100.0)
    return ContactSequence(out, rate)
