"""Matrices of GL_n(R), the affine group M_n(R) x| GL_n(R), Iwasawa factors and Haar measure."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._backend import kernels
from ._parallel import seeded_map


class SingularMatrixError(ValueError):
    """Raised when a matrix is numerically singular."""


def det_tolerance(entries: np.ndarray, rel: float = 1e-12) -> float:
    """Singularity threshold ``rel * max|entry|**n``."""
    entries = np.asarray(entries, dtype=float)
    return rel * float(np.abs(entries).max()) ** entries.shape[0]


@dataclass(frozen=True)
class GroupElement:
    """An invertible ``n x n`` real matrix with its cached determinant."""

    entries: np.ndarray
    det: float = field(init=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ValueError(f"expected a square matrix of size >= 2, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        d = float(np.linalg.det(a))
        if not abs(d) > det_tolerance(a):
            raise SingularMatrixError(f"|det| = {abs(d):.3e} below tolerance")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "det", d)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.entries @ other.entries)

    def inverse(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.entries))

    @classmethod
    def identity(cls, n: int) -> "GroupElement":
        return cls(np.eye(n))


@dataclass(frozen=True)
class AffineElement:
    """Element ``[x, h]`` of the affine group acting by ``y -> h y + x``."""

    x: np.ndarray
    h: GroupElement

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.shape != self.h.entries.shape:
            raise ValueError("translation and dilation parts differ in shape")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.h.n

    @classmethod
    def identity(cls, n: int) -> "AffineElement":
        return cls(np.zeros((n, n)), GroupElement.identity(n))


def affine_multiply(a: AffineElement, b: AffineElement) -> AffineElement:
    """Group product ``[x_a + h_a x_b, h_a h_b]``."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    return AffineElement(a.x + a.h.entries @ b.x, a.h @ b.h)


def affine_inverse(a: AffineElement) -> AffineElement:
    """Group inverse ``[-h^{-1} x, h^{-1}]``."""
    hinv = a.h.inverse()
    return AffineElement(-hinv.entries @ a.x, hinv)


@dataclass(frozen=True)
class IwasawaFactors:
    """The factorization ``a = s k w y``.

    Attributes
    ----------
    s : float
        ``|det a|**(1/n)``.
    k : ndarray
        Orthogonal matrix (determinant +1 or -1).
    w : ndarray
        The first ``n-1`` diagonal entries of ``w``; the last is implied by ``det w = 1``.
    y : ndarray
        Unit upper-triangular matrix (only the strictly upper part is free).
    """

    s: float
    k: np.ndarray
    w: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        k = np.array(self.k, dtype=float)
        w = np.atleast_1d(np.array(self.w, dtype=float))
        y = np.array(self.y, dtype=float)
        n = k.shape[0]
        if w.shape != (n - 1,) or y.shape != (n, n):
            raise ValueError("inconsistent factor shapes")
        if not (self.s > 0 and np.all(w > 0)):
            raise ValueError("s and w must be positive")
        y = np.triu(y, 1) + np.eye(n)
        for arr in (k, w, y):
            arr.setflags(write=False)
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.k.shape[0]

    @property
    def w_full(self) -> np.ndarray:
        return np.append(self.w, 1.0 / np.prod(self.w))


def iwasawa_decompose(a) -> IwasawaFactors:
    """Factor an invertible matrix as ``s k w y``.

    Raises
    ------
    SingularMatrixError
        If ``a`` fails the determinant tolerance.
    """
    m = a.entries if isinstance(a, GroupElement) else np.asarray(a, dtype=float)
    s, K, W, Y, ok = kernels.decompose_batch(m[None])
    if not ok[0]:
        raise SingularMatrixError("matrix is numerically singular")
    return IwasawaFactors(float(s[0]), K[0], W[0, :-1], Y[0])


def iwasawa_recompose(f: IwasawaFactors) -> GroupElement:
    """Inverse of :func:`iwasawa_decompose`."""
    return GroupElement(f.s * f.k @ (f.w_full[:, None] * f.y))


def recompose_batch(s, k, w, y) -> np.ndarray:
    """Vectorized ``s k diag(w, prod(w)^-1) y``; ``w`` has ``n-1`` columns."""
    s = np.asarray(s, dtype=float)
    w = np.asarray(w, dtype=float)
    wf = np.concatenate([w, 1.0 / np.prod(w, axis=1, keepdims=True)], axis=1)
    n = wf.shape[1]
    yy = np.triu(np.asarray(y, dtype=float), 1) + np.eye(n)
    return s[:, None, None] * np.einsum("tij,tjk->tik", k, wf[:, :, None] * yy)


def haar_density_coords(s, w) -> np.ndarray:
    """Haar density ``s^-1 prod_i w_i^(2(n-i)-1)``; ``w`` has shape (..., n-1)."""
    w = np.asarray(w, dtype=float)
    n = w.shape[-1] + 1
    expo = 2 * (n - np.arange(1, n)) - 1
    return np.prod(w ** expo, axis=-1) / np.asarray(s, dtype=float)


def haar_density(f: IwasawaFactors) -> float:
    """Haar density at the given factors, relative to ``ds dk dw dy``."""
    return float(haar_density_coords(f.s, f.w))


def random_orthogonal(n: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Haar-distributed samples from O_n (both components)."""
    shape = (1 if size is None else size, n, n)
    q, r = np.linalg.qr(rng.standard_normal(shape))
    d = np.sign(np.diagonal(r, axis1=1, axis2=2))
    d[d == 0] = 1.0
    q = q * d[:, None, :]
    flip = rng.random(shape[0]) < 0.5
    q[flip, :, 0] *= -1.0
    return q[0] if size is None else q


@dataclass(frozen=True)
class CoordBox:
    """Box in Iwasawa coordinates, optionally cut down by a matrix predicate.

    ``w`` holds ``n-1`` intervals; ``y`` is one interval applied to every
    strictly upper entry.  ``predicate`` maps a stack of matrices to a boolean
    mask and is applied on top of the box.
    """

    s: tuple
    w: Sequence[tuple]
    y: tuple
    predicate: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def n(self) -> int:
        return len(self.w) + 1

    def volume(self) -> float:
        n = self.n
        v = max(self.s[1] - self.s[0], 0.0)
        for lo, hi in self.w:
            v *= max(hi - lo, 0.0)
        return v * max(self.y[1] - self.y[0], 0.0) ** (n * (n - 1) // 2)

    @classmethod
    def fundamental(cls, n: int, eps: float = 0.0) -> "CoordBox":
        """The box of F (``eps = 0``) or of F_o(eps)."""
        return cls((1.0 - eps, 2.0 + eps), [(1.0 - eps, 2.0 + eps)] * (n - 1), (-eps, 1.0 + eps))


def sample_coord_box(box: CoordBox, rng: np.random.Generator, size: int):
    """Uniform samples ``(s, k, w, y)`` from a coordinate box with Haar ``k``."""
    n = box.n
    s = rng.uniform(box.s[0], box.s[1], size)
    w = np.column_stack([rng.uniform(lo, hi, size) for lo, hi in box.w])
    y = np.zeros((size, n, n))
    iu = np.triu_indices(n, 1)
    y[:, iu[0], iu[1]] = rng.uniform(box.y[0], box.y[1], (size, len(iu[0])))
    k = random_orthogonal(n, rng, size)
    return s, k, w, y


def _haar_chunk(rng, size, box):
    s, k, w, y = sample_coord_box(box, rng, size)
    val = haar_density_coords(s, w)
    if box.predicate is not None:
        val = val * box.predicate(recompose_batch(s, k, w, y))
    return float(val.sum()), float((val ** 2).sum()), size


def haar_measure_mc(region: CoordBox, N: int, seed: int, workers: int = 1):
    """Monte-Carlo Haar measure of a coordinate region.

    Returns
    -------
    estimate, stderr : float
        Estimate of the integral of the Haar density over the region (the
        O_n marginal has total mass one) and its standard error.
    """
    if N <= 0:
        raise ValueError("N must be positive")
    vol = region.volume()
    if vol == 0.0:
        return 0.0, 0.0
    parts = seeded_map(_haar_chunk, N, seed, workers, box=region)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / N
    var = max(s2 / N - mean ** 2, 0.0)
    return vol * mean, vol * np.sqrt(var / N)


@dataclass
class RoundTripReport:
    n: int
    samples: int
    max_rel_error: float
    max_orth_defect: float
    max_structure_defect: float

    def passed(self, tol: float = 1e-10) -> bool:
        return max(self.max_rel_error, self.max_orth_defect, self.max_structure_defect) <= tol


def random_well_conditioned(n: int, rng: np.random.Generator, size: int, min_det: float = 1e-3) -> np.ndarray:
    """Matrices with entries uniform in [-2, 2], resampled while ``|det| < min_det``."""
    out = rng.uniform(-2.0, 2.0, (size, n, n))
    bad = np.abs(np.linalg.det(out)) < min_det
    while bad.any():
        out[bad] = rng.uniform(-2.0, 2.0, (int(bad.sum()), n, n))
        bad = np.abs(np.linalg.det(out)) < min_det
    return out


def roundtrip_check(n: int, N: int, seed: int) -> RoundTripReport:
    """Decompose and recompose ``N`` random matrices; report the worst defects.

    The structure defect covers ``det w = 1``, the unit diagonal of ``y`` and
    the lower triangle of ``y``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    A = random_well_conditioned(n, rng, N)
    s, K, W, Y, ok = kernels.decompose_batch(A)
    if not ok.all():
        raise SingularMatrixError("a well-conditioned sample was rejected as singular")
    rec = recompose_batch(s, K, W[:, :-1], Y)
    rel = np.abs(rec - A).reshape(N, -1).max(axis=1) / np.abs(A).reshape(N, -1).max(axis=1)
    eye = np.eye(n)
    orth = np.abs(np.einsum("tji,tjk->tik", K, K) - eye).reshape(N, -1).max(axis=1)
    struct = np.maximum(np.abs(np.prod(W, axis=1) - 1.0),
                        np.abs(np.tril(Y) - eye).reshape(N, -1).max(axis=1))
    return RoundTripReport(n, N, float(rel.max(initial=0.0)), float(orth.max(initial=0.0)),
                           float(struct.max(initial=0.0)))
