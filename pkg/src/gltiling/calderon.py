"""Calderon sums ``sum_p g(b p^{-1})^2`` and sampled frame-bound certification.

For a window ``g`` squeezed between the indicators of the closed tile and the
widened tile, the sum is at least 1 (some tile contains ``b``) and at most the
pointwise overlap count.  Multiplied by the cube volume ``|R|`` these give the
lower and upper frame bounds.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _codes
from ._backend import kernels
from ._parallel import seeded_map
from .group import GroupElement, SingularMatrixError
from .overlap import m_bound
from .tiling import (DEFAULT_ETA, DEFAULT_GUARD, TileBoundaryError,
                     TileRangeError, sample_widened)
from .window import WindowSpec

DEFAULT_R_VOLUME = 78400.0
LOWER_TOL = 1e-12


def calderon_batch(B, spec: WindowSpec, eta: float = DEFAULT_ETA, guard: int = DEFAULT_GUARD):
    """Calderon sums, overlap counts and status codes for a stack of matrices."""
    counts, sums, status = kernels.overlap_batch(np.asarray(B, dtype=float), spec.epsilon, eta,
                                                 spec.code, guard)
    return sums, counts, status


def calderon_sum(b, spec: WindowSpec, eta: float = DEFAULT_ETA, guard: int = DEFAULT_GUARD) -> float:
    """``sum_p g(b p^{-1})^2`` over all tiles ``p`` whose widened version contains ``b``.

    Raises
    ------
    TileBoundaryError
        If ``b`` is within ``eta`` of a tile face.
    """
    m = b.entries if isinstance(b, GroupElement) else np.asarray(b, dtype=float)
    sums, counts, status = calderon_batch(m[None], spec, eta, guard)
    st = int(status[0])
    if st == _codes.SINGULAR:
        raise SingularMatrixError("matrix is numerically singular")
    if st == _codes.OVERFLOW:
        raise TileRangeError(f"scale exponent beyond guard {guard}")
    if st == _codes.BOUNDARY:
        raise TileBoundaryError("point is within eta of a tile face")
    return float(sums[0])


@dataclass
class FrameBoundReport:
    """Sampled frame bounds for one window."""

    n: int
    epsilon: float
    window_kind: str
    samples: int
    evaluated: int
    boundary: int
    min_sum: float
    max_sum: float
    max_count: int
    R_volume: float
    A_emp: float
    B_emp: float
    cond: float
    A_theory: float
    B_theory: float
    M_bound: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (not self.violations and self.min_sum >= 1.0 - LOWER_TOL
                and self.max_sum <= self.max_count + 1e-12 and self.max_count <= self.M_bound
                and self.cond <= self.M_bound)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _scan_chunk(rng, size, n, spec, eta, guard, keep_rows):
    B = sample_widened(n, rng, size)
    sums, counts, status = calderon_batch(B, spec, eta, guard)
    ok = status == _codes.OK
    s, c, Bk = sums[ok], counts[ok], B[ok]
    bad = (s < 1.0 - LOWER_TOL) | (s > c + 1e-12)
    viol = [{"b": Bk[i].tolist(), "sum": float(s[i]), "count": int(c[i])} for i in np.flatnonzero(bad)[:5]]
    rows = np.column_stack([Bk.reshape(len(Bk), -1), s]) if keep_rows else None
    return (int(ok.sum()), int((~ok).sum()), float(s.min(initial=np.inf)), float(s.max(initial=-np.inf)),
            int(c.max(initial=0)), viol, rows)


def frame_bound_scan(n: int, spec: WindowSpec, N: int, seed: int, R_volume: float = DEFAULT_R_VOLUME,
                     eta: float = DEFAULT_ETA, guard: int = DEFAULT_GUARD, workers: int = 1,
                     rows_out: Optional[io.TextIOBase] = None) -> FrameBoundReport:
    """Estimate ``A = |R| min sum`` and ``B = |R| max sum`` from ``N`` seeded samples.

    If ``rows_out`` is given, one CSV row per evaluated sample (matrix entries
    and the sum) is written to it.
    """
    if not R_volume > 0:
        raise ValueError("cube volume must be positive")
    parts = seeded_map(_scan_chunk, N, seed, workers, n=n, spec=spec, eta=eta, guard=guard,
                       keep_rows=rows_out is not None)
    evaluated = sum(p[0] for p in parts)
    if evaluated == 0:
        raise ValueError("every sample was rejected as a boundary point")
    lo = min(p[2] for p in parts)
    hi = max(p[3] for p in parts)
    if rows_out is not None:
        names = [f"b{i + 1}{j + 1}" for i in range(n) for j in range(n)]
        rows_out.write("# " + ",".join(names + ["calderon_sum"]) + "\n")
        w = csv.writer(rows_out, lineterminator="\n")
        for p in parts:
            for r in p[6]:
                w.writerow([repr(float(v)) for v in r])
    M = m_bound(n, spec.epsilon)
    return FrameBoundReport(
        n=n, epsilon=spec.epsilon, window_kind=spec.kind, samples=N, evaluated=evaluated,
        boundary=sum(p[1] for p in parts), min_sum=lo, max_sum=hi,
        max_count=max(p[4] for p in parts), R_volume=float(R_volume),
        A_emp=R_volume * lo, B_emp=R_volume * hi, cond=hi / lo,
        A_theory=float(R_volume), B_theory=float(M * R_volume), M_bound=M,
        violations=[v for p in parts for v in p[5]][:5])
