"""Kernel dispatch.

The compiled extension is used when it was built; otherwise the numpy
versions in ``_kernels_py`` take over. Set ``FOOTFORCE_PURE_PYTHON=1`` to
force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("FOOTFORCE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def _prep(parents, offsets):
    return (np.ascontiguousarray(parents, dtype=np.int64),
            np.ascontiguousarray(offsets, dtype=np.float64))


def fk_forward(parents, offsets, root, quats, impl=None):
    impl = impl or _impl
    parents, offsets = _prep(parents, offsets)
    return impl.fk_forward(parents, offsets,
                           np.ascontiguousarray(root, dtype=np.float64),
                           np.ascontiguousarray(quats, dtype=np.float64))


def fk_backward(parents, offsets, quats, glob, grad_pos, impl=None):
    impl = impl or _impl
    parents, offsets = _prep(parents, offsets)
    return impl.fk_backward(parents, offsets,
                            np.ascontiguousarray(quats, dtype=np.float64),
                            np.ascontiguousarray(glob, dtype=np.float64),
                            np.ascontiguousarray(grad_pos, dtype=np.float64))


def drop_short_runs(labels, min_len, impl=None):
    impl = impl or _impl
    labels = np.asarray(labels)
    flat = labels.reshape(labels.shape[0], int(np.prod(labels.shape[1:])))
    return impl.drop_short_runs(np.ascontiguousarray(flat, dtype=np.uint8),
                                int(min_len)).reshape(labels.shape)


def implementations():
    """Available backends, keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
