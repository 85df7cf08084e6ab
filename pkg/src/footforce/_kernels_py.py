"""Pure numpy implementations of the hot kernels.

These are the reference versions. ``_ckernels.pyx`` mirrors them one for one
and must agree to floating point round-off.
"""
import numpy as np


def _qmul(p, q):
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ], axis=-1)


def _qrot(q, v):
    # q v q* for a possibly non-unit q (scales by |q|^2)
    w = q[..., :1]
    u = q[..., 1:]
    uv = np.sum(u * v, axis=-1, keepdims=True)
    uu = np.sum(u * u, axis=-1, keepdims=True)
    return (w * w - uu) * v + 2.0 * uv * u + 2.0 * w * np.cross(u, v)


def fk_forward(parents, offsets, root, quats):
    """Global joint positions and rotations.

    Parameters
    ----------
    parents : (J,) int array, ``parents[0] == -1`` and ``parents[j] < j``.
    offsets : (J, 3) local offsets.
    root : (T, 3) root translation.
    quats : (T, J, 4) local rotations (w, x, y, z).

    Returns
    -------
    positions : (T, J, 3)
    rotations : (T, J, 4) global rotations
    """
    T, J = quats.shape[:2]
    pos = np.empty((T, J, 3))
    glob = np.empty((T, J, 4))
    pos[:, 0] = root
    glob[:, 0] = quats[:, 0]
    for j in range(1, J):
        p = parents[j]
        glob[:, j] = _qmul(glob[:, p], quats[:, j])
        pos[:, j] = pos[:, p] + _qrot(glob[:, p], np.broadcast_to(offsets[j], (T, 3)))
    return pos, glob


def fk_backward(parents, offsets, quats, glob, grad_pos):
    """Vector-Jacobian product of :func:`fk_forward`.

    Returns ``(grad_root, grad_quats)`` with shapes (T, 3) and (T, J, 4).
    """
    T, J = quats.shape[:2]
    gp = np.array(grad_pos, dtype=np.float64, copy=True)
    gG = np.zeros((T, J, 4))
    gq = np.zeros((T, J, 4))
    for j in range(J - 1, 0, -1):
        p = parents[j]
        gp[:, p] += gp[:, j]

        # rotate(G_p, offset_j)
        g = gp[:, j]
        v = np.broadcast_to(offsets[j], (T, 3))
        w = glob[:, p, :1]
        u = glob[:, p, 1:]
        uv = np.sum(u * v, axis=-1, keepdims=True)
        ug = np.sum(u * g, axis=-1, keepdims=True)
        vg = np.sum(v * g, axis=-1, keepdims=True)
        uxv = np.cross(u, v)
        gG[:, p, :1] += 2.0 * w * vg + 2.0 * np.sum(uxv * g, axis=-1, keepdims=True)
        gG[:, p, 1:] += -2.0 * u * vg + 2.0 * v * ug + 2.0 * uv * g + 2.0 * w * np.cross(v, g)

        # G_j = G_p (x) q_j
        gj = gG[:, j]
        gw, gu = gj[:, :1], gj[:, 1:]
        q = quats[:, j]
        qw, qu = q[:, :1], q[:, 1:]
        P = glob[:, p]
        pw, pu = P[:, :1], P[:, 1:]
        gG[:, p, :1] += gw * qw + np.sum(gu * qu, axis=-1, keepdims=True)
        gG[:, p, 1:] += -gw * qu + gu * qw + np.cross(qu, gu)
        gq[:, j, :1] = gw * pw + np.sum(gu * pu, axis=-1, keepdims=True)
        gq[:, j, 1:] = -gw * pu + gu * pw + np.cross(gu, pu)
    gq[:, 0] = gG[:, 0]
    return gp[:, 0].copy(), gq


def drop_short_runs(labels, min_len):
    """Zero every maximal run of ones shorter than ``min_len`` (per column)."""
    out = np.array(labels, dtype=np.uint8, copy=True)
    if min_len <= 1 or out.shape[0] == 0:
        return out
    T = out.shape[0]
    for c in range(out.shape[1]):
        col = out[:, c]
        edges = np.diff(np.concatenate(([0], col.astype(np.int8), [0])))
        starts = np.flatnonzero(edges == 1)
        stops = np.flatnonzero(edges == -1)
        for s, e in zip(starts, stops):
            if e - s < min_len:
                col[s:min(e, T)] = 0
    return out
