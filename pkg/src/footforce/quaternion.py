"""Quaternion helpers, (w, x, y, z) convention, broadcasting over leading axes."""
import numpy as np
from scipy.spatial.transform import Rotation

from ._kernels_py import _qmul, _qrot


def identity(shape=()):
    q = np.zeros(tuple(shape) + (4,))
    q[..., 0] = 1.0
    return q


def mul(p, q):
    return _qmul(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64))


def conj(q):
    q = np.array(q, dtype=np.float64, copy=True)
    q[..., 1:] *= -1.0
    return q


def rotate(q, v):
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    lead = np.broadcast_shapes(q.shape[:-1], v.shape[:-1])
    return _qrot(np.broadcast_to(q, lead + (4,)), np.broadcast_to(v, lead + (3,)))


def normalize(q):
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=np.float64)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def yaw(angle):
    """Rotation about the vertical (y) axis."""
    return from_axis_angle(np.array([0.0, 1.0, 0.0]), angle)


def from_matrix(m):
    xyzw = Rotation.from_matrix(np.asarray(m).reshape(-1, 3, 3)).as_quat()
    q = np.concatenate([xyzw[:, 3:], xyzw[:, :3]], axis=-1)
    return q.reshape(np.shape(m)[:-2] + (4,))


def to_matrix(q):
    q = np.asarray(q, dtype=np.float64)
    xyzw = np.concatenate([q[..., 1:], q[..., :1]], axis=-1).reshape(-1, 4)
    return Rotation.from_quat(xyzw).as_matrix().reshape(q.shape[:-1] + (3, 3))


def angle_between(p, q):
    """Geodesic angle (radians) between unit quaternions, sign-agnostic."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    d = np.sum(p * q, axis=-1)
    perp = np.linalg.norm(p - d[..., None] * q, axis=-1)
    return 2.0 * np.arctan2(perp, np.abs(d))


def slerp(p, q, w):
    """Shortest-arc spherical interpolation; ``w`` broadcasts against p[..., 0]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)[..., None]
    dot = np.sum(p * q, axis=-1, keepdims=True)
    q = np.where(dot < 0.0, -q, q)
    dot = np.abs(dot)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    sin_t = np.sin(theta)
    small = sin_t < 1e-9
    safe = np.where(small, 1.0, sin_t)
    a = np.where(small, 1.0 - w, np.sin((1.0 - w) * theta) / safe)
    b = np.where(small, w, np.sin(w * theta) / safe)
    return normalize(a * p + b * q)
