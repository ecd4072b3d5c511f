"""Time the compiled kernels against the pure-Python fallback.

Run from the repository root after installing the package::

    python benchmarks/bench_kernels.py [--size 5000] [--repeat 3]

Both backends are imported directly, so the ``GLTILING_PURE`` switch does not
matter here.  Outputs are compared before timing.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from gltiling import _codes, _kernels_py
from gltiling.tiling import sample_widened

try:
    from gltiling import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(size, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    A2 = sample_widened(2, rng, size)
    A3 = sample_widened(3, rng, size // 4)
    return {
        "decompose n=2": lambda k: k.decompose_batch(A2),
        "decompose n=3": lambda k: k.decompose_batch(A3),
        "assign n=2": lambda k: k.assign_batch(A2, 1e-12, 512),
        "assign n=3": lambda k: k.assign_batch(A3, 1e-12, 512),
        "overlap n=2": lambda k: k.overlap_batch(A2, 0.2, 1e-9, _codes.WIN_NONE, 512),
        "calderon n=2 smooth": lambda k: k.overlap_batch(A2, 0.2, 1e-9, _codes.WIN_COSINE, 512),
        "overlap n=3": lambda k: k.overlap_batch(A3[: size // 20], 0.2, 1e-9, _codes.WIN_NONE, 512),
    }


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-12)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=5000, help="matrices per n=2 batch")
    p.add_argument("--repeat", type=int, default=3, help="timing repeats (best is kept)")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"{'kernel':<22}{'python [s]':>12}{'cython [s]':>12}{'speed-up':>10}  outputs")
    for name, fn in cases(args.size, args.seed).items():
        same = agree(fn(_kernels_py), fn(_kernels))
        tp = best_of(lambda: fn(_kernels_py), args.repeat)
        tc = best_of(lambda: fn(_kernels), args.repeat)
        print(f"{name:<22}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x  {'match' if same else 'DIFFER'}")


if __name__ == "__main__":
    main()
