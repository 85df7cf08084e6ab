import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from footforce import kernels
from footforce import quaternion as quat

IMPLS = kernels.implementations()
needs_cython = pytest.mark.skipif("cython" not in IMPLS, reason="compiled kernels not built")


def _runs_oracle(col, min_len):
    out = list(col)
    t = 0
    while t < len(out):
        if out[t]:
            s = t
            while t < len(out) and out[t]:
                t += 1
            if t - s < min_len:
                out[s:t] = [0] * (t - s)
        else:
            t += 1
    return out


@pytest.mark.parametrize("name", sorted(IMPLS))
@given(bits=st.lists(st.booleans(), min_size=0, max_size=60), min_len=st.integers(0, 12))
def test_drop_short_runs_matches_oracle(name, bits, min_len):
    lab = np.array(bits, dtype=np.uint8).reshape(-1, 1)
    out = kernels.drop_short_runs(lab, min_len, impl=IMPLS[name])
    assert out[:, 0].tolist() == _runs_oracle(bits, min_len)


@needs_cython
def test_backends_agree(skeleton):
    rng = np.random.default_rng(0)
    q = quat.normalize(rng.normal(size=(50, 23, 4)))
    root = rng.normal(size=(50, 3))
    py, cy = IMPLS["python"], IMPLS["cython"]
    p1, g1 = kernels.fk_forward(skeleton.parent, skeleton.offset, root, q, impl=py)
    p2, g2 = kernels.fk_forward(skeleton.parent, skeleton.offset, root, q, impl=cy)
    assert np.allclose(p1, p2, atol=1e-12) and np.allclose(g1, g2, atol=1e-12)
    gp = rng.normal(size=p1.shape)
    b1 = kernels.fk_backward(skeleton.parent, skeleton.offset, q, g1, gp, impl=py)
    b2 = kernels.fk_backward(skeleton.parent, skeleton.offset, q, g2, gp, impl=cy)
    for a, b in zip(b1, b2):
        assert np.allclose(a, b, atol=1e-10)
    lab = (rng.random((300, 4)) < 0.6).astype(np.uint8)
    assert np.array_equal(kernels.drop_short_runs(lab, 5, impl=py),
                          kernels.drop_short_runs(lab, 5, impl=cy))


def test_pure_python_switch():
    env = {**os.environ, "FOOTFORCE_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "import footforce; print(footforce.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
