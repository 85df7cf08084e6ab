"""Independent reference implementations used as test oracles.

Each one is written from the definition with plain loops and shares no code
with the package under test.
"""
import math

import numpy as np


def gaussian_smooth(x, sigma, truncate=4.0):
    """Truncated normalized Gaussian along axis 0 with half-sample reflection."""
    x = np.asarray(x, dtype=np.float64)
    r = int(truncate * sigma + 0.5)
    k = np.exp(-0.5 * (np.arange(-r, r + 1) / sigma) ** 2)
    k /= k.sum()
    n = x.shape[0]
    out = np.zeros_like(x)
    t = np.arange(n)
    for i, w in zip(range(-r, r + 1), k):
        # reflect about the outer sample edges: ... b a | a b ... | z y ...
        j = (t + i) % (2 * n)
        j = np.where(j >= n, 2 * n - 1 - j, j)
        out += w * x[j]
    return out


def contact_function(values, rate_hz, heel_mask, toe_mask, sigma_s=0.01, raw=0.05, gate=0.10,
                     min_phase_s=0.1, eps=1e-8):
    """Contact labels (T, 2, 2) computed step by step from the definition."""
    v = np.asarray(values, dtype=np.float64)
    T = v.shape[0]
    s = gaussian_smooth(v.reshape(T, -1), sigma_s * rate_hz).reshape(v.shape)
    labels = np.zeros((T, 2, 2), dtype=np.uint8)
    for f in range(2):
        # cell sums in plain sequential order, vectorized over frames only
        heel = np.zeros(T)
        toe = np.zeros(T)
        tot = np.zeros(T)
        for c in range(16):
            heel = heel + s[:, f, c] * bool(heel_mask[c])
            toe = toe + s[:, f, c] * bool(toe_mask[c])
            tot = tot + s[:, f, c]
        for t in range(T):
            h, o = heel[t], toe[t]
            if h + o > eps:
                r = tot[t] / (h + o)
                h, o = h * r, o * r
            else:
                h = o = 0.0
            if tot[t] >= gate:
                labels[t, f, 0] = h >= raw
                labels[t, f, 1] = o >= raw
    min_len = math.ceil(round(min_phase_s * rate_hz, 9))
    for f in range(2):
        for loc in range(2):
            t = 0
            while t < T:
                if labels[t, f, loc]:
                    e = t
                    while e < T and labels[e, f, loc]:
                        e += 1
                    if e - t < min_len:
                        labels[t:e, f, loc] = 0
                    t = e
                else:
                    t += 1
    return labels


def random_vgrf(rng, T):
    """Piecewise-constant blocks of per-cell force with occasional spikes,
    spanning values on both sides of the contact thresholds."""
    v = np.zeros((T, 2, 16))
    t = 0
    while t < T:
        n = int(rng.integers(1, 40))
        level = rng.choice([0.0, 0.002, 0.004, 0.01, 0.03]) * rng.uniform(0.5, 1.5, size=(2, 16))
        level *= rng.random((2, 16)) < rng.uniform(0.2, 1.0)
        v[t:t + n] = level
        t += n
    v += rng.exponential(0.002, size=v.shape) * (rng.random(v.shape) < 0.1)
    return v
