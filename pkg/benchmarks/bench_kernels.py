"""Timing of the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--frames 240] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from footforce import kernels
from footforce import quaternion as quat
from footforce.core import humanoid_skeleton


def _cases(frames, rng):
    sk = humanoid_skeleton()
    q = quat.normalize(rng.normal(size=(frames, sk.n_joints, 4)))
    root = rng.normal(size=(frames, 3))
    gp = rng.normal(size=(frames, sk.n_joints, 3))
    lab = (rng.random((frames * 10, 4)) < 0.6).astype(np.uint8)

    def cases(impl):
        _, glob = kernels.fk_forward(sk.parent, sk.offset, root, q, impl=impl)
        return {
            "fk_forward": lambda: kernels.fk_forward(sk.parent, sk.offset, root, q, impl=impl),
            "fk_backward": lambda: kernels.fk_backward(sk.parent, sk.offset, q, glob, gp, impl=impl),
            "drop_short_runs": lambda: kernels.drop_short_runs(lab, 10, impl=impl),
        }
    return cases


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=240)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    cases = _cases(args.frames, np.random.default_rng(0))
    impls = kernels.implementations()
    timings = {}
    for name, impl in impls.items():
        for case, fn in cases(impl).items():
            fn()
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            timings[(case, name)] = best
    print(f"{'kernel':<18}" + "".join(f"{n:>12}" for n in impls) + f"{'speedup':>10}")
    for case in ("fk_forward", "fk_backward", "drop_short_runs"):
        row = [timings[(case, n)] for n in impls]
        speed = (f"{timings[(case, 'python')] / timings[(case, 'cython')]:9.1f}x"
                 if "cython" in impls else "")
        print(f"{case:<18}" + "".join(f"{t * 1e3:10.3f}ms" for t in row) + speed)


if __name__ == "__main__":
    main()
