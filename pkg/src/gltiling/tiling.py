"""The tiling system (F, P) of GL_n(R): tile indices, tile assignment and region membership.

F is the set of matrices ``s k w y`` with ``s, w_i`` in ``[1, 2)`` and ``y_ij`` in
``[0, 1)``.  P consists of the upper-triangular matrices ``2^lam U_mu D_kappa`` with
``D_kappa = diag(2^kappa_i)`` (``sum kappa_i = 0``) and ``U_mu`` unit upper
triangular with integer entries.  Every invertible matrix lies in exactly one
translate ``F p``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _codes
from ._backend import kernels
from ._parallel import seeded_map
from .group import (GroupElement, SingularMatrixError, random_orthogonal,
                    recompose_batch)

DEFAULT_GUARD = 512
DEFAULT_ETA = 1e-9
FLOOR_TOL = 1e-12

INSIDE = "inside"
OUTSIDE = "outside"
BOUNDARY = "boundary"


class TileBoundaryError(ValueError):
    """The point lies (numerically) on a tile boundary."""


class TileRangeError(OverflowError):
    """A scale exponent exceeds the overflow guard."""


@dataclass(frozen=True, eq=False)
class TileIndex:
    """Discrete parameters ``(lam, kappa, mu)`` of an element of P.

    ``kappa`` holds the first ``n-1`` exponents; ``mu`` is stored as an
    ``n x n`` integer array whose strictly upper part is used.
    """

    lam: int
    kappa: tuple
    mu: np.ndarray

    def __post_init__(self):
        kappa = tuple(int(k) for k in np.atleast_1d(self.kappa))
        n = len(kappa) + 1
        mu = np.triu(np.asarray(self.mu, dtype=np.int64).reshape(n, n), 1)
        mu.setflags(write=False)
        object.__setattr__(self, "lam", int(self.lam))
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return len(self.kappa) + 1

    @property
    def kappa_full(self) -> tuple:
        return self.kappa + (-sum(self.kappa),)

    def key(self) -> tuple:
        iu = np.triu_indices(self.n, 1)
        return (self.lam,) + self.kappa + tuple(int(v) for v in self.mu[iu])

    def __eq__(self, other):
        return isinstance(other, TileIndex) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        iu = np.triu_indices(self.n, 1)
        return f"TileIndex(lam={self.lam}, kappa={self.kappa}, mu={tuple(int(v) for v in self.mu[iu])})"

    def max_exponent(self) -> int:
        return max(abs(self.lam), *(abs(k) for k in self.kappa_full))

    def to_matrix(self) -> np.ndarray:
        """The matrix ``2^lam U_mu D_kappa``."""
        n = self.n
        col = np.exp2(self.lam + np.array(self.kappa_full, dtype=float))
        u = self.mu.astype(float) + np.eye(n)
        return u * col[None, :]

    def inverse_matrix(self) -> np.ndarray:
        """``p^{-1} = 2^-lam D_kappa^{-1} U_mu^{-1}``, exact for moderate indices."""
        n = self.n
        u = self.mu.astype(float) + np.eye(n)
        uinv = np.eye(n)
        for j in range(n):
            for i in range(j - 1, -1, -1):
                uinv[i, j] = -u[i, i + 1:j + 1] @ uinv[i + 1:j + 1, j]
        row = np.exp2(-self.lam - np.array(self.kappa_full, dtype=float))
        return row[:, None] * uinv

    @classmethod
    def identity(cls, n: int) -> "TileIndex":
        return cls(0, (0,) * (n - 1), np.zeros((n, n), dtype=np.int64))

    @classmethod
    def from_key(cls, n: int, key) -> "TileIndex":
        key = [int(v) for v in key]
        mu = np.zeros((n, n), dtype=np.int64)
        mu[np.triu_indices(n, 1)] = key[n:]
        return cls(key[0], tuple(key[1:n]), mu)


@dataclass(frozen=True)
class TileCoords:
    """Coordinates ``(s, w, y, k)`` inside F.

    ``boundary`` is set when some coordinate sat within the floor tolerance of
    a tile face, so that the half-open convention decided the tile.
    """

    s: float
    w: np.ndarray
    y: np.ndarray
    k: np.ndarray
    boundary: bool = False

    @property
    def n(self) -> int:
        return self.k.shape[0]

    def matrix(self) -> np.ndarray:
        n = self.n
        w = np.append(self.w, 1.0 / np.prod(self.w))
        return self.s * self.k @ (w[:, None] * (np.triu(self.y, 1) + np.eye(n)))


@dataclass(frozen=True)
class RegionKind:
    """One of F, its closure, or the widened open set F_o(eps)."""

    tag: str
    eps: float = 0.0

    def __post_init__(self):
        if self.tag not in ("F", "F-closure", "F-open"):
            raise ValueError(f"unknown region tag {self.tag!r}")
        if self.tag == "F-open" and not (0.0 < self.eps <= 0.5):
            raise ValueError("eps must lie in (0, 1/2]")

    def intervals(self):
        """``((lo, hi, closed_lo, closed_hi) for s and w, same for y)``."""
        if self.tag == "F":
            return (1.0, 2.0, True, False), (0.0, 1.0, True, False)
        if self.tag == "F-closure":
            return (1.0, 2.0, True, True), (0.0, 1.0, True, True)
        e = self.eps
        return (1.0 - e, 2.0 + e, False, False), (-e, 1.0 + e, False, False)


F = RegionKind("F")
F_CLOSURE = RegionKind("F-closure")


def f_open(eps: float) -> RegionKind:
    return RegionKind("F-open", eps)


def _classify_interval(t, lo, hi, closed_lo, closed_hi, eta):
    t = np.asarray(t, dtype=float)
    inside = ((t > lo) | (closed_lo & (t == lo))) & ((t < hi) | (closed_hi & (t == hi)))
    code = np.where(inside, _codes.C_IN, _codes.C_OUT)
    if eta > 0:
        edge = (np.abs(t - lo) <= eta * max(1.0, abs(lo))) | (np.abs(t - hi) <= eta * max(1.0, abs(hi)))
        code = np.where(edge, _codes.C_EDGE, code)
    return code


def classify_coords(s, w, y, region: RegionKind, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Vectorized membership codes (``_codes.C_IN/C_OUT/C_EDGE``).

    ``s`` has shape ``(N,)``, ``w`` ``(N, n-1)`` and ``y`` ``(N, n, n)``.  A point
    is outside as soon as one coordinate is clearly outside; otherwise it is on
    the boundary if one coordinate is within ``eta`` of an endpoint.
    """
    sw, yy = region.intervals()
    s = np.atleast_1d(np.asarray(s, dtype=float))
    w = np.asarray(w, dtype=float).reshape(len(s), -1)
    y = np.asarray(y, dtype=float).reshape(len(s), w.shape[1] + 1, -1)
    n = w.shape[1] + 1
    iu = np.triu_indices(n, 1)
    codes = [_classify_interval(s, *sw, eta)[:, None],
             _classify_interval(w, *sw, eta),
             _classify_interval(y[:, iu[0], iu[1]], *yy, eta)]
    c = np.concatenate(codes, axis=1)
    out = np.any(c == _codes.C_OUT, axis=1)
    edge = np.any(c == _codes.C_EDGE, axis=1)
    return np.where(out, _codes.C_OUT, np.where(edge, _codes.C_EDGE, _codes.C_IN))


_CODE_NAMES = {_codes.C_IN: INSIDE, _codes.C_OUT: OUTSIDE, _codes.C_EDGE: BOUNDARY}


def membership(a, region: RegionKind, eta: float = DEFAULT_ETA) -> str:
    """Classify a matrix as ``"inside"``, ``"outside"`` or ``"boundary"`` of a region."""
    m = a.entries if isinstance(a, GroupElement) else np.asarray(a, dtype=float)
    s, K, W, Y, ok = kernels.decompose_batch(m[None])
    if not ok[0]:
        raise SingularMatrixError("matrix is numerically singular")
    code = classify_coords(s, W[:, :-1], Y, region, eta)[0]
    return _CODE_NAMES[int(code)]


def membership_batch(A, region: RegionKind, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Membership codes for a stack of matrices; singular rows get ``C_OUT``."""
    s, K, W, Y, ok = kernels.decompose_batch(np.asarray(A, dtype=float))
    code = classify_coords(np.where(ok, s, 0.0), np.where(ok[:, None], W[:, :-1], 0.0),
                           np.where(ok[:, None, None], Y, 0.0), region, eta)
    return np.where(ok, code, _codes.C_OUT)


def tile_assign(a, guard: int = DEFAULT_GUARD, tol: float = FLOOR_TOL, strict: bool = False):
    """Find the unique ``p`` in P and coordinates in F with ``a = (s k w y) p``.

    Points within ``tol`` of a tile face are resolved by the half-open ranges
    of F and marked with ``coords.boundary``; ``strict=True`` raises instead.

    Returns
    -------
    index : TileIndex
    coords : TileCoords

    Raises
    ------
    SingularMatrixError, TileRangeError
    TileBoundaryError
        Only with ``strict=True``.
    """
    m = a.entries if isinstance(a, GroupElement) else np.asarray(a, dtype=float)
    lam, kappa, mu, sc, wc, yc, K, status = kernels.assign_batch(m[None], tol, guard)
    st = int(status[0])
    if st == _codes.SINGULAR:
        raise SingularMatrixError("matrix is numerically singular")
    if st == _codes.OVERFLOW:
        raise TileRangeError(f"scale exponent beyond guard {guard}")
    if st == _codes.BOUNDARY and strict:
        raise TileBoundaryError("point lies on a tile boundary")
    n = m.shape[0]
    index = TileIndex(int(lam[0]), tuple(int(v) for v in kappa[0, :n - 1]), mu[0])
    return index, TileCoords(float(sc[0]), wc[0].copy(), np.triu(yc[0], 1), K[0], st == _codes.BOUNDARY)


def tile_point(index: TileIndex, coords: TileCoords, guard: int = DEFAULT_GUARD) -> GroupElement:
    """The matrix ``(s k w y) p`` for a tile index and coordinates in F."""
    if index.max_exponent() > guard:
        raise TileRangeError(f"scale exponent beyond guard {guard}")
    return GroupElement(coords.matrix() @ index.to_matrix())


def tile_matrices(lam, kappa, mu) -> np.ndarray:
    """Vectorized ``to_matrix``; ``kappa`` has ``n-1`` columns."""
    lam = np.asarray(lam)
    kappa = np.asarray(kappa)
    kf = np.concatenate([kappa, -kappa.sum(axis=1, keepdims=True)], axis=1)
    n = kf.shape[1]
    col = np.exp2(lam[:, None] + kf.astype(float))
    u = np.triu(np.asarray(mu, dtype=float), 1) + np.eye(n)
    return u * col[:, None, :]


def random_tile_indices(n: int, rng: np.random.Generator, size: int, bound: int):
    """Index arrays ``(lam, kappa, mu)`` with every free entry uniform in ``[-bound, bound]``."""
    lam = rng.integers(-bound, bound + 1, size)
    kappa = rng.integers(-bound, bound + 1, (size, n - 1))
    mu = np.zeros((size, n, n), dtype=np.int64)
    iu = np.triu_indices(n, 1)
    mu[:, iu[0], iu[1]] = rng.integers(-bound, bound + 1, (size, len(iu[0])))
    return lam, kappa, mu


def sample_fundamental(n: int, rng: np.random.Generator, size: int):
    """Uniform coordinates in F with Haar ``k``: returns ``(s, k, w, y)``."""
    s = rng.uniform(1.0, 2.0, size)
    w = rng.uniform(1.0, 2.0, (size, n - 1))
    y = np.zeros((size, n, n))
    iu = np.triu_indices(n, 1)
    y[:, iu[0], iu[1]] = rng.uniform(0.0, 1.0, (size, len(iu[0])))
    return s, random_orthogonal(n, rng, size), w, y


def sample_widened(n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Test matrices: widened coordinate box, then a random P-translate.

    Coordinates are uniform with ``s, w_i`` in ``[1/2, 4]`` and ``y_ij`` in
    ``[-2, 3]``, ``k`` is Haar, and the translate has index entries in ``[-2, 2]``.
    """
    s = rng.uniform(0.5, 4.0, size)
    w = rng.uniform(0.5, 4.0, (size, n - 1))
    y = np.zeros((size, n, n))
    iu = np.triu_indices(n, 1)
    y[:, iu[0], iu[1]] = rng.uniform(-2.0, 3.0, (size, len(iu[0])))
    k = random_orthogonal(n, rng, size)
    p = tile_matrices(*random_tile_indices(n, rng, size, 2))
    return recompose_batch(s, k, w, y) @ p


@dataclass
class EquivarianceReport:
    n: int
    samples: int
    failures: int
    boundary: int
    max_coord_error: float
    failing: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _equivariance_chunk(rng, size, n, bound, guard):
    s, k, w, y = sample_fundamental(n, rng, size)
    lam, kappa, mu = random_tile_indices(n, rng, size, bound)
    A = recompose_batch(s, k, w, y) @ tile_matrices(lam, kappa, mu)
    L, Kp, M, sc, wc, yc, K, status = kernels.assign_batch(A, FLOOR_TOL, guard)
    ok = status == _codes.OK
    iu = np.triu_indices(n, 1)
    same = (L == lam) & np.all(Kp[:, :n - 1] == kappa, axis=1) & np.all(M[:, iu[0], iu[1]] == mu[:, iu[0], iu[1]], axis=1)
    err = np.maximum.reduce([np.abs(sc - s), np.abs(wc - w).max(axis=1),
                             np.abs(yc - y)[:, iu[0], iu[1]].max(axis=1), np.abs(K - k).reshape(size, -1).max(axis=1)])
    bad = ok & ~(same & (err <= 1e-9))
    bad |= ~ok & (status != _codes.BOUNDARY)
    fails = [A[i].tolist() for i in np.flatnonzero(bad)[:5]]
    return int(bad.sum()), int((status == _codes.BOUNDARY).sum()), float(np.max(err[ok], initial=0.0)), fails


def equivariance_check(n: int, N: int, seed: int, bound: int = 3, guard: int = DEFAULT_GUARD,
                       workers: int = 1) -> EquivarianceReport:
    """Assign ``f p`` for random ``f`` in F and known ``p``; count wrong recoveries."""
    parts = seeded_map(_equivariance_chunk, N, seed, workers, n=n, bound=bound, guard=guard)
    failing = [f for p in parts for f in p[3]][:5]
    return EquivarianceReport(n, N, sum(p[0] for p in parts), sum(p[1] for p in parts),
                              max((p[2] for p in parts), default=0.0), failing)


@dataclass
class CoverageReport:
    n: int
    samples: int
    failures: int
    boundary: int
    roundtrip_failures: int
    failing: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.roundtrip_failures == 0


def _coverage_chunk(rng, size, n, eta, guard):
    A = sample_widened(n, rng, size)
    L, Kp, M, sc, wc, yc, K, status = kernels.assign_batch(A, max(eta, FLOOR_TOL), guard)
    ok = status == _codes.OK
    P = tile_matrices(L, Kp[:, :n - 1], M)
    rec = recompose_batch(np.where(ok, sc, 1.0), K, np.where(ok[:, None], wc, 1.0), yc) @ P
    rel = np.abs(rec - A).reshape(size, -1).max(axis=1) / np.abs(A).reshape(size, -1).max(axis=1)
    rt_bad = ok & ~(rel <= 1e-10)
    # the assigned tile contains the point ...
    code = membership_batch(A @ np.linalg.inv(P), F, eta)
    # ... and no neighbouring tile does (open-box enumeration with no widening)
    counts, _, ostat = kernels.overlap_batch(A, 0.0, eta, _codes.WIN_NONE, guard)
    boundary = ~ok | (ostat != _codes.OK) | (code == _codes.C_EDGE)
    inside = code == _codes.C_IN
    bad = ~boundary & ~(inside & (counts == 1))
    fails = [A[i].tolist() for i in np.flatnonzero(bad | rt_bad)[:5]]
    return int(bad.sum()), int(boundary.sum()), int(rt_bad.sum()), fails


def coverage_check(n: int, N: int, seed: int, eta: float = DEFAULT_ETA, guard: int = DEFAULT_GUARD,
                   workers: int = 1) -> CoverageReport:
    """Check that every sampled matrix lies in exactly one tile.

    Boundary samples (within ``eta`` of a tile face) are counted, not judged.
    """
    parts = seeded_map(_coverage_chunk, N, seed, workers, n=n, eta=eta, guard=guard)
    failing = [f for p in parts for f in p[3]][:5]
    return CoverageReport(n, N, sum(p[0] for p in parts), sum(p[1] for p in parts),
                          sum(p[2] for p in parts), failing)
