# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void qmul(const double* p, const double* q, double* out) noexcept nogil:
    out[0] = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3]
    out[1] = p[0] * q[1] + p[1] * q[0] + p[2] * q[3] - p[3] * q[2]
    out[2] = p[0] * q[2] - p[1] * q[3] + p[2] * q[0] + p[3] * q[1]
    out[3] = p[0] * q[3] + p[1] * q[2] - p[2] * q[1] + p[3] * q[0]


cdef inline void qrot(const double* q, const double* v, double* out) noexcept nogil:
    cdef double w = q[0], x = q[1], y = q[2], z = q[3]
    cdef double uv = x * v[0] + y * v[1] + z * v[2]
    cdef double s = w * w - (x * x + y * y + z * z)
    out[0] = s * v[0] + 2.0 * uv * x + 2.0 * w * (y * v[2] - z * v[1])
    out[1] = s * v[1] + 2.0 * uv * y + 2.0 * w * (z * v[0] - x * v[2])
    out[2] = s * v[2] + 2.0 * uv * z + 2.0 * w * (x * v[1] - y * v[0])


def fk_forward(const cnp.int64_t[::1] parents, const double[:, ::1] offsets,
               const double[:, ::1] root, const double[:, :, ::1] quats):
    cdef Py_ssize_t T = quats.shape[0], J = quats.shape[1]
    pos_arr = np.empty((T, J, 3))
    glob_arr = np.empty((T, J, 4))
    cdef double[:, :, ::1] pos = pos_arr
    cdef double[:, :, ::1] glob = glob_arr
    cdef Py_ssize_t t, j, k, p
    cdef double r[3]
    with nogil:
        for t in range(T):
            for k in range(3):
                pos[t, 0, k] = root[t, k]
            for k in range(4):
                glob[t, 0, k] = quats[t, 0, k]
            for j in range(1, J):
                p = parents[j]
                qmul(&glob[t, p, 0], &quats[t, j, 0], &glob[t, j, 0])
                qrot(&glob[t, p, 0], &offsets[j, 0], r)
                for k in range(3):
                    pos[t, j, k] = pos[t, p, k] + r[k]
    return pos_arr, glob_arr


def fk_backward(const cnp.int64_t[::1] parents, const double[:, ::1] offsets,
                const double[:, :, ::1] quats, const double[:, :, ::1] glob,
                const double[:, :, ::1] grad_pos):
    cdef Py_ssize_t T = quats.shape[0], J = quats.shape[1]
    gp_arr = np.array(grad_pos, dtype=np.float64, copy=True)
    gG_arr = np.zeros((T, J, 4))
    gq_arr = np.zeros((T, J, 4))
    cdef double[:, :, ::1] gp = gp_arr
    cdef double[:, :, ::1] gG = gG_arr
    cdef double[:, :, ::1] gq = gq_arr
    cdef Py_ssize_t t, j, k, p
    cdef double w, x, y, z, v0, v1, v2, g0, g1, g2, uv, ug, vg
    cdef double gw, gx, gy, gz, qw, qx, qy, qz, pw, px, py, pz
    with nogil:
        for t in range(T):
            for j in range(J - 1, 0, -1):
                p = parents[j]
                for k in range(3):
                    gp[t, p, k] += gp[t, j, k]
                g0 = gp[t, j, 0]; g1 = gp[t, j, 1]; g2 = gp[t, j, 2]
                v0 = offsets[j, 0]; v1 = offsets[j, 1]; v2 = offsets[j, 2]
                w = glob[t, p, 0]; x = glob[t, p, 1]; y = glob[t, p, 2]; z = glob[t, p, 3]
                uv = x * v0 + y * v1 + z * v2
                ug = x * g0 + y * g1 + z * g2
                vg = v0 * g0 + v1 * g1 + v2 * g2
                gG[t, p, 0] += 2.0 * w * vg + 2.0 * ((y * v2 - z * v1) * g0
                                                     + (z * v0 - x * v2) * g1
                                                     + (x * v1 - y * v0) * g2)
                gG[t, p, 1] += -2.0 * x * vg + 2.0 * v0 * ug + 2.0 * uv * g0 + 2.0 * w * (v1 * g2 - v2 * g1)
                gG[t, p, 2] += -2.0 * y * vg + 2.0 * v1 * ug + 2.0 * uv * g1 + 2.0 * w * (v2 * g0 - v0 * g2)
                gG[t, p, 3] += -2.0 * z * vg + 2.0 * v2 * ug + 2.0 * uv * g2 + 2.0 * w * (v0 * g1 - v1 * g0)

                gw = gG[t, j, 0]; gx = gG[t, j, 1]; gy = gG[t, j, 2]; gz = gG[t, j, 3]
                qw = quats[t, j, 0]; qx = quats[t, j, 1]; qy = quats[t, j, 2]; qz = quats[t, j, 3]
                pw = w; px = x; py = y; pz = z
                gG[t, p, 0] += gw * qw + gx * qx + gy * qy + gz * qz
                gG[t, p, 1] += -gw * qx + gx * qw + (qy * gz - qz * gy)
                gG[t, p, 2] += -gw * qy + gy * qw + (qz * gx - qx * gz)
                gG[t, p, 3] += -gw * qz + gz * qw + (qx * gy - qy * gx)
                gq[t, j, 0] = gw * pw + gx * px + gy * py + gz * pz
                gq[t, j, 1] = -gw * px + gx * pw + (gy * pz - gz * py)
                gq[t, j, 2] = -gw * py + gy * pw + (gz * px - gx * pz)
                gq[t, j, 3] = -gw * pz + gz * pw + (gx * py - gy * px)
            for k in range(4):
                gq[t, 0, k] = gG[t, 0, k]
    return gp_arr[:, 0].copy(), gq_arr


def drop_short_runs(labels, Py_ssize_t min_len):
    out_arr = np.array(labels, dtype=np.uint8, copy=True, order="C")
    if min_len <= 1 or out_arr.shape[0] == 0:
        return out_arr
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t T = out.shape[0], C = out.shape[1]
    cdef Py_ssize_t c, t, start, k
    with nogil:
        for c in range(C):
            t = 0
            while t < T:
                if out[t, c]:
                    start = t
                    while t < T and out[t, c]:
                        t += 1
                    if t - start < min_len:
                        for k in range(start, t):
                            out[k, c] = 0
                else:
                    t += 1
    return out_arr
