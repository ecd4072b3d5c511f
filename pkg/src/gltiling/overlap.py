"""Overlap enumeration: which widened tiles ``F_o(eps) p'`` contain a given point.

The pointwise multiplicity ``N(b) = #{p' : b p'^{-1} in F_o}`` bounds the
Calderon sum from above.  Candidates are enumerated directly: the scale
exponents can only move by one step, and the shear entries are solved
diagonal by diagonal, collecting every integer that keeps the widened
coordinate inside ``(-eps, 1 + eps)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _codes
from ._backend import kernels
from ._parallel import seeded_map
from .group import GroupElement, SingularMatrixError
from .tiling import (DEFAULT_ETA, DEFAULT_GUARD, TileBoundaryError, TileIndex,
                     TileRangeError, classify_coords, f_open, sample_widened,
                     tile_matrices)


def count_integer_hits(alpha: float, L: float, eps: float) -> list:
    """Integers ``beta`` with ``[alpha, alpha + L]`` meeting ``(beta - eps, beta + 1 + eps)``."""
    lo = math.ceil(alpha - 1.0 - eps)
    hi = math.floor(alpha + L + eps)
    # strict inequalities at the open ends
    return [b for b in range(lo, hi + 1) if b + 1 + eps > alpha and b - eps < alpha + L]


def theoretical_M_bound(n: int) -> int:
    """``3^n 6^(n(n-1)/2)``, the general bound on overlapping tiles."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return 3 ** n * 6 ** (n * (n - 1) // 2)


def refined_M_bound_n2(eps: float) -> int:
    """Sharper bound for ``n = 2``: 33 for ``eps < 1/4`` and 36 for ``1/4 <= eps < 1/2``."""
    if not (0.0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    return 33 if eps < 0.25 else 36


def m_bound(n: int, eps: float) -> int:
    """Tightest available bound for the given dimension and width."""
    if n == 2 and 0.0 < eps < 0.5:
        return refined_M_bound_n2(eps)
    return theoretical_M_bound(n)


@dataclass
class OverlapReport:
    """Tiles whose widened version contains a point."""

    point: np.ndarray
    base: TileIndex
    tiles: list
    count: int
    bound: int
    windows: list = field(default_factory=list)


def _hits_to_tiles(n, hits):
    return [TileIndex(lam, tuple(int(v) for v in kp[:n - 1]), mp) for lam, kp, mp, _ in hits]


def pointwise_overlap(b, eps: float, eta: float = DEFAULT_ETA, guard: int = DEFAULT_GUARD,
                      window_kind: int = _codes.WIN_NONE) -> OverlapReport:
    """All ``p'`` in P with ``b p'^{-1}`` inside ``F_o(eps)``.

    Raises
    ------
    TileBoundaryError
        If ``b`` or one of the candidate coordinates is within ``eta`` of a face.
    """
    if not (0.0 < eps <= 0.5):
        raise ValueError("eps must lie in (0, 1/2]")
    m = b.entries if isinstance(b, GroupElement) else np.asarray(b, dtype=float)
    n = m.shape[0]
    st, base, hits = kernels.overlap_point(m, eps, eta, window_kind, guard)
    if st == _codes.SINGULAR:
        raise SingularMatrixError("matrix is numerically singular")
    if st == _codes.OVERFLOW:
        raise TileRangeError(f"scale exponent beyond guard {guard}")
    if st == _codes.BOUNDARY:
        raise TileBoundaryError("point is within eta of a tile face")
    lam, kappa, mu = base
    base_idx = TileIndex(lam, tuple(int(v) for v in kappa[:n - 1]), mu)
    return OverlapReport(m, base_idx, _hits_to_tiles(n, hits), len(hits), m_bound(n, eps),
                         [h[3] for h in hits])


def brute_force_overlap(b, eps: float, eta: float = DEFAULT_ETA, reach: int = 2, pad: int = 2) -> list:
    """Reference enumeration by exhaustive search (``n = 2``).

    Sweeps ``|lam' - lam|, |kappa' - kappa| <= reach`` and, for each shear entry,
    every integer in the hull of the widened interval padded by ``pad``; every
    candidate is tested with an independent decomposition of ``b p'^{-1}``.
    Returns the sorted list of tile keys classified inside (``None`` if any
    candidate lands on a face).
    """
    m = np.asarray(b, dtype=float)
    n = m.shape[0]
    if n != 2:
        raise ValueError("the exhaustive search is implemented for n = 2 only")
    q, r = np.linalg.qr(m)
    r = r * np.sign(np.diag(r))[:, None]
    s = abs(np.prod(np.diag(r))) ** (1.0 / n)
    w = np.diag(r) / s
    y = r / np.diag(r)[:, None]
    lam = math.floor(math.log2(s))
    kappa = [math.floor(math.log2(v)) for v in w[:n - 1]]
    iu = list(zip(*np.triu_indices(n, 1)))
    keys = []
    for dl in range(-reach, reach + 1):
        for dk in itertools.product(range(-reach, reach + 1), repeat=n - 1):
            kp = [k + d for k, d in zip(kappa, dk)]
            kf = np.array(kp + [-sum(kp)], dtype=float)
            # integer hull of the widened shear interval, padded
            ranges = []
            for i, j in iu:
                z = y[i, j] * 2.0 ** (kf[i] - kf[j])
                ranges.append(range(math.floor(z - 1 - eps) - pad, math.ceil(z + eps) + pad + 1))
            keys.extend((lam + dl, *kp, *mus) for mus in itertools.product(*ranges))
    keys = np.array(keys, dtype=np.int64)
    mu = np.zeros((len(keys), n, n), dtype=np.int64)
    mu[:, iu[0][0], iu[0][1]] = keys[:, n]
    P = tile_matrices(keys[:, 0], keys[:, 1:n], mu)
    c = m[None] @ np.linalg.inv(P)
    q2, r2 = np.linalg.qr(c)
    d = np.diagonal(r2, axis1=1, axis2=2)
    r2 = r2 * np.sign(d)[:, :, None]
    d = np.abs(d)
    s2 = np.prod(d, axis=1) ** (1.0 / n)
    code = classify_coords(s2, d[:, :n - 1] / s2[:, None], r2 / d[:, :, None], f_open(eps), eta)
    if np.any(code == _codes.C_EDGE):
        return None
    return sorted(tuple(int(v) for v in k) for k in keys[code == _codes.C_IN])


@dataclass
class OverlapSummary:
    n: int
    eps: float
    samples: int
    evaluated: int
    boundary: int
    max_count: Optional[int]
    min_count: Optional[int]
    histogram: dict
    theoretical_bound: int
    refined_bound: Optional[int]

    @property
    def passed(self) -> bool:
        if self.evaluated == 0:
            return True
        bound = self.refined_bound if self.refined_bound is not None else self.theoretical_bound
        return self.min_count >= 1 and self.max_count <= bound <= self.theoretical_bound

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["histogram"] = {str(k): v for k, v in sorted(self.histogram.items())}
        d["passed"] = self.passed
        return d


def _scan_chunk(rng, size, n, eps, eta, guard):
    B = sample_widened(n, rng, size)
    counts, _, status = kernels.overlap_batch(B, eps, eta, _codes.WIN_NONE, guard)
    ok = status == _codes.OK
    vals, freq = np.unique(counts[ok], return_counts=True)
    return dict(zip(vals.tolist(), freq.tolist())), int((~ok).sum())


def overlap_scan(n: int, eps: float, N: int, seed: int, eta: float = DEFAULT_ETA,
                 guard: int = DEFAULT_GUARD, workers: int = 1) -> OverlapSummary:
    """Histogram of pointwise overlap counts over ``N`` seeded samples."""
    if not (0.0 < eps <= 0.5):
        raise ValueError("eps must lie in (0, 1/2]")
    hist: dict = {}
    boundary = 0
    if N > 0:
        for h, nb in seeded_map(_scan_chunk, N, seed, workers, n=n, eps=eps, eta=eta, guard=guard):
            boundary += nb
            for k, v in h.items():
                hist[k] = hist.get(k, 0) + v
    refined = refined_M_bound_n2(eps) if (n == 2 and eps < 0.5) else None
    evaluated = sum(hist.values())
    return OverlapSummary(n, eps, N, evaluated, boundary, max(hist) if hist else None,
                          min(hist) if hist else None, hist, theoretical_M_bound(n), refined)


@dataclass
class HitCountSummary:
    samples: int
    L: float
    max_count: int
    min_count: int
    attained_max: int
    mismatches: int
    failing: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.mismatches == 0 and self.max_count <= 6

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def hit_count_scan(N: int, seed: int, L: float = 4.0) -> HitCountSummary:
    """Compare :func:`count_integer_hits` with a sweep over a wide integer window.

    ``alpha`` is uniform in [-50, 50] and ``eps`` uniform in (0, 1/2].  The
    reference tests every integer in ``floor(alpha) + [-L - 4, L + 4]`` for a
    nonempty intersection.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    alpha = rng.uniform(-50.0, 50.0, N)
    eps = 0.5 - rng.uniform(0.0, 0.5, N)
    reach = int(math.ceil(L)) + 4
    beta = np.floor(alpha)[:, None] + np.arange(-reach, reach + 1)[None, :]
    ref = ((alpha[:, None] < beta + 1 + eps[:, None]) & (alpha[:, None] + L > beta - eps[:, None])).sum(axis=1)
    got = np.array([len(count_integer_hits(a, L, e)) for a, e in zip(alpha, eps)])
    bad = np.flatnonzero(got != ref)
    return HitCountSummary(N, L, int(got.max(initial=0)), int(got.min()) if N else 0, int((got == 6).sum()),
                           int(bad.size), [[float(alpha[i]), float(eps[i])] for i in bad[:5]])
