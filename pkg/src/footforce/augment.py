"""Training-time data augmentation and windowing.

Inputs are re-animated on randomly sampled skeletons and moved by random
horizontal rigid transforms, all of which leave the vGRF targets (body-weight
fractions) unchanged. Left/right mirroring swaps the target feet.

Every random draw for window ``i`` of epoch ``e`` comes from a generator
seeded with ``(seed, e, i)``, so the stream does not depend on the order in
which windows are produced.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .core import LocalMotion, Skeleton, ValidationError
from .kinematics import RigidTransform, apply_rigid, forward_kinematics, mirror

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SkeletonBasis:
    """Mean offsets plus principal directions of a set of skeletons.

    ``singular_values`` are expressed as per-skeleton standard deviations
    along each component (singular value / sqrt(n - 1)).
    """

    mean: np.ndarray  # (3J,)
    components: np.ndarray  # (K, 3J), orthonormal rows
    singular_values: np.ndarray  # (K,)
    parent: np.ndarray
    names: tuple
    foot_joints: np.ndarray

    def skeleton(self, flat):
        return Skeleton(self.parent, np.asarray(flat, dtype=np.float64).reshape(-1, 3),
                        self.names, self.foot_joints)

    def coefficients(self, skeleton):
        return self.components @ (skeleton.offset.ravel() - self.mean)


def build_skeleton_basis(skeletons):
    skeletons = list(skeletons)
    if len(skeletons) < 2:
        raise ValidationError("build_skeleton_basis needs at least 2 skeletons")
    ref = skeletons[0]
    for s in skeletons[1:]:
        if s.n_joints != ref.n_joints or not np.array_equal(s.parent, ref.parent):
            raise ValidationError("skeletons do not share one topology")
    X = np.stack([s.offset.ravel() for s in skeletons])
    mean = X.mean(axis=0)
    _, sv, vt = np.linalg.svd(X - mean, full_matrices=False)
    k = min(len(skeletons), X.shape[1])
    return SkeletonBasis(mean, vt[:k], sv[:k] / np.sqrt(len(skeletons) - 1),
                         ref.parent, ref.names, ref.foot_joints)


@dataclass(frozen=True)
class AugmentConfig:
    translation_m: float = 5.0  # uniform in [-t, t] along x and z
    rotate: bool = True  # uniform heading in [0, 2 pi)
    scale_range: tuple = (0.9, 1.1)
    mirror_p: float = 0.5
    weight_std: float = 1.0  # multiplier on the basis standard deviations
    jitter_std_m: float = 0.01
    bone_rescale: tuple = (0.95, 1.05)
    window: int = 240
    stride: int = 60
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scale_range", tuple(float(v) for v in self.scale_range))
        object.__setattr__(self, "bone_rescale", tuple(float(v) for v in self.bone_rescale))
        errs = []
        if self.translation_m < 0:
            errs.append("translation_m must be >= 0")
        for name in ("scale_range", "bone_rescale"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                errs.append(f"{name} must satisfy 0 < lo <= hi")
        if not 0 <= self.mirror_p <= 1:
            errs.append("mirror_p must lie in [0, 1]")
        if self.weight_std < 0 or self.jitter_std_m < 0:
            errs.append("std parameters must be >= 0")
        if self.window < 1 or self.stride < 1:
            errs.append("window and stride must be >= 1")
        if errs:
            raise ValidationError(errs)

    @classmethod
    def disabled(cls, window=240, stride=60, seed=0):
        """No randomness at all: the original skeleton and plain FK."""
        return cls(0.0, False, (1.0, 1.0), 0.0, 0.0, 0.0, (1.0, 1.0), window, stride, seed)

    def to_dict(self):
        d = asdict(self)
        d["scale_range"] = list(self.scale_range)
        d["bone_rescale"] = list(self.bone_rescale)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def window_rng(seed, epoch, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch), int(index)]))


def edit_morphology(skeleton, cfg, rng):
    """Jitter every non-root offset and rescale each bone length."""
    off = skeleton.offset.copy()
    bones = skeleton.parent >= 0
    n = int(bones.sum())
    off[bones] += rng.normal(0.0, 1.0, size=(n, 3)) * cfg.jitter_std_m
    off[bones] *= rng.uniform(*cfg.bone_rescale, size=(n, 1))
    return skeleton.with_offsets(off)


def sample_skeleton(basis, cfg, rng):
    w = rng.standard_normal(len(basis.singular_values)) * cfg.weight_std
    flat = basis.mean + (w * basis.singular_values) @ basis.components
    return edit_morphology(basis.skeleton(flat), cfg, rng)


def augment_window(motion, skeleton, cfg, rng):
    """Animate ``skeleton`` with the window's joint angles and move it at random.

    Returns ``(poses, mirrored)``; when ``mirrored`` the caller swaps the
    feet of the targets.
    """
    if len(motion) != cfg.window:
        raise ValidationError(f"window has {len(motion)} frames, config expects {cfg.window}")
    poses = forward_kinematics(skeleton, motion)
    angle = rng.uniform(0.0, 2.0 * np.pi) if cfg.rotate else 0.0
    t = rng.uniform(-cfg.translation_m, cfg.translation_m, size=2)
    scale = rng.uniform(*cfg.scale_range)
    if angle or t.any() or scale != 1.0:
        poses = apply_rigid(poses, RigidTransform.horizontal(angle, (t[0], 0.0, t[1]), scale))
    mirrored = bool(rng.random() < cfg.mirror_p)
    if mirrored:
        poses = mirror(poses, skeleton)
    return poses, mirrored


def make_windows(takes, cfg):
    """(take index, start frame) for every full window; short takes are skipped."""
    takes = list(takes)
    if takes:
        rates = {float(t.rate_hz) for t in takes}
        if len(rates) > 1 or any(not t.synchronized for t in takes):
            raise ValidationError("make_windows needs synchronized takes at one rate")
    out, skipped = [], 0
    for i, tk in enumerate(takes):
        n = len(tk)
        if n < cfg.window:
            skipped += 1
            continue
        out += [(i, s) for s in range(0, n - cfg.window + 1, cfg.stride)]
    if skipped:
        log.warning("make_windows: skipped %d take(s) shorter than %d frames", skipped, cfg.window)
    return out


class WindowDataset:
    """Batches of augmented input windows with their vGRF and contact targets."""

    def __init__(self, takes, cfg, basis=None, augment=True):
        self.takes = list(takes)
        for tk in self.takes:
            if tk.local_motion is None or tk.vgrf is None or tk.contacts is None:
                raise ValidationError("training takes need local motion, vGRF and contacts")
            if len(tk.local_motion) != len(tk.vgrf):
                raise ValidationError("local motion and vGRF differ in length")
        self.cfg = cfg
        self.basis = basis
        self.augment = augment
        self.windows = make_windows(self.takes, cfg)

    def __len__(self):
        return len(self.windows)

    def item(self, epoch, index):
        ti, s = self.windows[index]
        tk = self.takes[ti]
        e = s + self.cfg.window
        m = tk.local_motion
        motion = LocalMotion(m.root_translation[s:e], m.rotations[s:e], m.rate_hz)
        F = tk.vgrf.values[s:e]
        C = tk.contacts.labels[s:e]
        if not self.augment:
            return forward_kinematics(tk.skeleton, motion).positions, F, C
        rng = window_rng(self.cfg.seed, epoch, index)
        if self.basis is not None:
            sk = sample_skeleton(self.basis, self.cfg, rng)
        else:
            sk = edit_morphology(tk.skeleton, self.cfg, rng)
        poses, mirrored = augment_window(motion, sk, self.cfg, rng)
        if mirrored:
            F, C = F[:, ::-1], C[:, ::-1]
        return poses.positions, F, C

    def batch(self, epoch, indices):
        items = [self.item(epoch, i) for i in indices]
        X = np.stack([x for x, _, _ in items]).astype(np.float32)
        F = np.stack([f for _, f, _ in items]).astype(np.float32)
        C = np.stack([c for _, _, c in items]).astype(np.float32)
        return X, F, C

