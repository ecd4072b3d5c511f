"""Seeded, chunked map used by the Monte-Carlo scans.

Samples are split into fixed-size chunks, and chunk ``i`` always draws from the
``i``-th child of ``SeedSequence(seed)``.  Results therefore do not depend on
the number of workers.
"""
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

CHUNK = 20_000


def default_workers():
    return os.cpu_count() or 1


def chunk_plan(N, chunk=CHUNK):
    """Sizes of the consecutive chunks covering ``N`` samples."""
    sizes = [chunk] * (N // chunk)
    if N % chunk:
        sizes.append(N % chunk)
    return sizes


def _call(args):
    fn, child, size, kwargs = args
    return fn(np.random.Generator(np.random.PCG64(child)), size, **kwargs)


def seeded_map(fn, N, seed, workers=1, chunk=CHUNK, **kwargs):
    """Run ``fn(rng, size, **kwargs)`` over chunks of ``N`` samples.

    Returns the list of per-chunk results in chunk order.
    """
    sizes = chunk_plan(N, chunk)
    children = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    jobs = [(fn, c, s, kwargs) for c, s in zip(children, sizes)]
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, jobs))
