"""Forward kinematics, numerical differentiation, rigid transforms, mirroring
and multi-rate resampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import quaternion as quat
from .core import LocalMotion, PoseSequence, ValidationError


def forward_kinematics(skeleton, motion):
    """Global joint positions of ``skeleton`` animated by ``motion``."""
    pos, _ = forward_kinematics_full(skeleton, motion.root_translation, motion.rotations)
    return PoseSequence(pos, motion.rate_hz)


def forward_kinematics_full(skeleton, root_translation, rotations):
    """Positions (T, J, 3) and global rotations (T, J, 4), float64."""
    rotations = np.asarray(rotations)
    if rotations.ndim != 3 or rotations.shape[1] != skeleton.n_joints:
        raise ValidationError(f"motion has {rotations.shape[1:2]} joints, "
                              f"skeleton has {skeleton.n_joints}")
    return kernels.fk_forward(skeleton.parent, skeleton.offset, root_translation, rotations)


def finite_difference(series, order, rate_hz):
    """Central differences along axis 0, one-sided at the two boundaries.

    Order 1 uses second-order one-sided stencils at the ends; order 2 repeats
    the nearest interior stencil. Output has the input length.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.shape[0] < 3:
        raise ValueError(f"finite_difference needs at least 3 frames, got {x.shape[0]}")
    out = np.empty_like(x)
    if order == 1:
        out[1:-1] = (x[2:] - x[:-2]) * (rate_hz / 2.0)
        # written as differences so that constant series give exact zeros
        out[0] = (4.0 * (x[1] - x[0]) - (x[2] - x[0])) * (rate_hz / 2.0)
        out[-1] = ((x[-3] - x[-1]) - 4.0 * (x[-2] - x[-1])) * (rate_hz / 2.0)
    elif order == 2:
        out[1:-1] = (x[2:] - 2.0 * x[1:-1] + x[:-2]) * rate_hz ** 2
        out[0] = out[1]
        out[-1] = out[-2]
    else:
        raise ValueError("order must be 1 or 2")
    return out


def resampled_length(n, src_hz, dst_hz):
    return int(math.floor((n - 1) * dst_hz / src_hz + 1e-9)) + 1


def _bracket(n, src_hz, times):
    x = np.asarray(times, dtype=np.float64) * src_hz
    i0 = np.clip(np.floor(x + 1e-9).astype(np.int64), 0, max(n - 2, 0))
    w = np.clip(x - i0, 0.0, 1.0)
    return i0, w


def interp_positions(series, src_hz, times):
    """Linear interpolation of ``series`` (sampled at ``src_hz``) at ``times`` seconds."""
    x = np.asarray(series)
    if x.shape[0] == 1:
        return np.repeat(x, len(times), axis=0).astype(np.float64)
    i0, w = _bracket(x.shape[0], src_hz, times)
    w = w.reshape((-1,) + (1,) * (x.ndim - 1))
    return (1.0 - w) * x[i0] + w * x[i0 + 1]


def interp_rotations(quats, src_hz, times):
    q = np.asarray(quats, dtype=np.float64)
    if q.shape[0] == 1:
        return np.repeat(q, len(times), axis=0)
    i0, w = _bracket(q.shape[0], src_hz, times)
    w = np.broadcast_to(w.reshape((-1,) + (1,) * (q.ndim - 2)), q[i0].shape[:-1])
    return quat.slerp(q[i0], q[i0 + 1], w)


def resample_positions(series, src_hz, dst_hz):
    x = np.asarray(series)
    if not (src_hz > 0 and dst_hz > 0):
        raise ValueError("rates must be positive")
    if src_hz == dst_hz:
        return x.copy()
    if x.shape[0] < 2:
        raise ValueError("resampling needs at least 2 frames")
    n = resampled_length(x.shape[0], src_hz, dst_hz)
    return interp_positions(x, src_hz, np.arange(n) / dst_hz)


def resample_rotations(quats, src_hz, dst_hz):
    q = np.asarray(quats)
    if not (src_hz > 0 and dst_hz > 0):
        raise ValueError("rates must be positive")
    norms = np.linalg.norm(q.astype(np.float64), axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-5):
        raise ValidationError("resample_rotations: non-unit quaternion in input")
    if src_hz == dst_hz:
        return q.copy()
    if q.shape[0] < 2:
        raise ValueError("resampling needs at least 2 frames")
    n = resampled_length(q.shape[0], src_hz, dst_hz)
    return interp_rotations(q, src_hz, np.arange(n) / dst_hz)


def resample_motion(motion, dst_hz):
    return LocalMotion(resample_positions(motion.root_translation, motion.rate_hz, dst_hz),
                       resample_rotations(motion.rotations, motion.rate_hz, dst_hz), dst_hz)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """p' = scale * (R p) + translation."""

    rotation: np.ndarray = field(default_factory=lambda: quat.identity())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64)
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise ValidationError("RigidTransform rotation must be a unit quaternion")
        if not self.scale > 0:
            raise ValidationError("RigidTransform scale must be positive")
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))

    @classmethod
    def horizontal(cls, angle, translation=(0.0, 0.0, 0.0), scale=1.0):
        return cls(quat.yaw(angle), translation, scale)


def apply_rigid(poses, xf):
    p = poses.positions.astype(np.float64)
    out = xf.scale * quat.rotate(xf.rotation, p) + xf.translation
    return PoseSequence(out, poses.rate_hz)


def mirror_permutation(skeleton):
    """Index map swapping every Left*/Right* joint with its counterpart."""
    names = list(skeleton.names)
    perm = np.arange(len(names))
    for i, n in enumerate(names):
        for a, b in (("Left", "Right"), ("Right", "Left")):
            if n.startswith(a):
                other = b + n[len(a):]
                if other not in names:
                    raise ValidationError(f"mirror: joint {n!r} has no counterpart {other!r}")
                perm[i] = names.index(other)
    return perm


def mirror(poses, skeleton):
    """Reflect across the x = 0 plane and swap left/right joint channels."""
    perm = mirror_permutation(skeleton)
    p = np.array(poses.positions, dtype=np.float64)[:, perm]
    p[..., 0] *= -1.0
    return PoseSequence(p, poses.rate_hz)
