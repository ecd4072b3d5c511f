"""The explicit discrete frame for 2x2 matrices.

Frame elements are indexed by a tile ``p`` and a lattice index ``m`` in Z^4.  In
the Fourier domain the element is ``|det p|^-1 g(b p^-1) e_m(b p^-1)`` where
``e_m(u) = exp(2 pi i tr(gamma_m u))`` on the cube R and ``gamma_m`` pairs
``m_k`` with the ``k``-th row-major entry of ``u``.

Signals live on a uniform grid whose spacing along each axis is the cube side
divided by an integer ``Q``.  For every tile used, the sheared grid ``b p^-1``
then has an integer number of samples per cube period, and the per-tile
transform is evaluated exactly by folding and FFTs.  Analysis and synthesis
are exact adjoints on the grid, so the frame operator is the multiplication
by ``|R| sum_p g(b p^-1)^2`` up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ._backend import kernels
from .calderon import calderon_batch
from .overlap import m_bound
from .spectral import SpectralSignal
from .tiling import DEFAULT_ETA, DEFAULT_GUARD, TileIndex, TileRangeError
from .window import WindowSpec, ramp_profile

MAX_TILE_COEFFS = 1 << 22


class GridError(ValueError):
    """The grid cannot resolve a tile (incommensurate or too coarse)."""


@dataclass(frozen=True)
class CubeR:
    """Axis-aligned box in matrix entries, row-major ``(u11, u12, u21, u22)``."""

    lo: tuple = (-7.0, -10.0, -7.0, -10.0)
    hi: tuple = (7.0, 10.0, 7.0, 10.0)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 4 or len(hi) != 4 or any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("cube needs four increasing intervals")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def sides(self) -> np.ndarray:
        return np.array(self.hi) - np.array(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains(self, U) -> np.ndarray:
        """Strict containment for a stack of 2x2 matrices."""
        u = np.asarray(U, dtype=float).reshape(-1, 4)
        return np.all((u > np.array(self.lo)) & (u < np.array(self.hi)), axis=1)


def lattice_gamma(m, cube: CubeR = CubeR(), transposed: bool = False) -> np.ndarray:
    """Frequency matrix for the lattice index ``m = (m1, m2, m3, m4)``.

    ``tr(gamma u) = sum_k m_k u_k / side_k`` with ``u_k`` the row-major entries,
    so ``gamma = [[m1/L1, m3/L3], [m2/L2, m4/L4]]``.  ``transposed=True`` gives
    the naive transposed placement, which is *not* orthonormal on R.
    """
    m = np.asarray(m, dtype=float)
    L = cube.sides
    g = np.array([[m[0] / L[0], m[2] / L[2]], [m[1] / L[1], m[3] / L[3]]])
    return g.T if transposed else g


def e_gamma(m, U, cube: CubeR = CubeR(), transposed: bool = False) -> np.ndarray:
    """``|R|^-1/2 1_R(u) exp(2 pi i tr(gamma u))`` for a stack of matrices ``U``."""
    U = np.asarray(U, dtype=float).reshape(-1, 2, 2)
    g = lattice_gamma(m, cube, transposed)
    phase = np.einsum("ij,tji->t", g, U)
    return cube.contains(U) * np.exp(2j * np.pi * phase) / math.sqrt(cube.volume)


def gram_entry(m, mp, cube: CubeR = CubeR(), transposed: bool = False, order: int = 64) -> complex:
    """``<e_m, e_m'>`` on R by tensor Gauss-Legendre quadrature.

    The integrand factorizes over the four entries; each factor is integrated
    with ``order`` nodes per panel over enough panels to resolve the oscillation.
    """
    g = lattice_gamma(m, cube, transposed) - lattice_gamma(mp, cube, transposed)
    freq = g.T.reshape(-1)  # frequency attached to u11, u12, u21, u22
    x, w = np.polynomial.legendre.leggauss(order)
    val = 1.0 + 0j
    for f, a, b in zip(freq, cube.lo, cube.hi):
        panels = max(1, int(math.ceil(abs(f) * (b - a))) * 2)
        edges = np.linspace(a, b, panels + 1)
        acc = 0j
        for lo, hi in zip(edges[:-1], edges[1:]):
            t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            acc += 0.5 * (hi - lo) * np.dot(w, np.exp(2j * np.pi * f * t))
        val *= acc
    return complex(val / cube.volume)


def gram_pairs(count: int, seed: int, reach: int = 6) -> list:
    """Index pairs for an orthonormality check.

    One in five pairs is diagonal, two in five differ only in ``(m2, m3)`` (the
    entries a transposed pairing would mix up) and the rest are arbitrary.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for i in range(count):
        m = rng.integers(-reach, reach + 1, 4)
        mp = m.copy()
        if i % 5 in (1, 2):
            while np.array_equal(mp, m):
                mp[1:3] = rng.integers(-reach, reach + 1, 2)
        elif i % 5 in (3, 4):
            mp = rng.integers(-reach, reach + 1, 4)
        out.append((m, mp))
    return out


def orthonormality_defect(count: int, seed: int, transposed: bool = False, cube: CubeR = CubeR()) -> float:
    """``max |<e_m, e_m'> - delta_mm'|`` over :func:`gram_pairs`."""
    worst = 0.0
    for m, mp in gram_pairs(count, seed):
        delta = float(np.array_equal(m, mp))
        worst = max(worst, abs(gram_entry(m, mp, cube, transposed) - delta))
    return worst


@dataclass
class TileCoefficients:
    """Coefficients of one tile on the block ``m_start + [0, shape)``."""

    tile: TileIndex
    m_start: tuple
    values: np.ndarray

    def m_axis(self, k: int) -> np.ndarray:
        return self.m_start[k] + np.arange(self.values.shape[k])

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def energy_radius(self, frac: float = 1e-6) -> int:
        """Smallest ``r`` with ``sum_{max|m_k| <= r} |c|^2 >= (1 - frac) * total``."""
        total = self.energy()
        if total == 0.0:
            return 0
        grids = np.meshgrid(*(np.abs(self.m_axis(k)) for k in range(4)), indexing="ij")
        rad = np.maximum.reduce(grids).reshape(-1)
        e = (np.abs(self.values) ** 2).reshape(-1)
        order = np.argsort(rad, kind="stable")
        cum = np.cumsum(e[order])
        r_sorted = rad[order]
        i = int(np.searchsorted(cum, (1.0 - frac) * total))
        i = min(i, len(cum) - 1)
        return int(r_sorted[i])


def commensurate_grid(center=(1.0, 0.0, 0.0, 1.0), count: int = 32, Q: int = 32,
                      cube: CubeR = CubeR(), offset=(0.137, 0.291, 0.413, 0.067)):
    """Grid ``(mins, maxs, counts)`` with spacing ``side_k / Q`` around ``center``.

    ``offset`` shifts the grid by a fraction of a cell so that grid points avoid
    tile faces generically.
    """
    h = cube.sides / Q
    c = np.asarray(center, dtype=float).reshape(4)
    mins = c - 0.5 * (count - 1) * h + np.asarray(offset) * h
    maxs = mins + (count - 1) * h
    return mins, maxs, (count,) * 4


def _fold(X, N):
    """Sum the last axis modulo ``N``."""
    Q = X.shape[-1]
    if Q <= N:
        pad = [(0, 0)] * (X.ndim - 1) + [(0, N - Q)]
        return np.pad(X, pad)
    r = -Q % N
    if r:
        X = np.pad(X, [(0, 0)] * (X.ndim - 1) + [(0, r)])
    return X.reshape(X.shape[:-1] + (X.shape[-1] // N, N)).sum(axis=-2)


def _unfold(X, Q):
    """Periodic extension of the last axis to length ``Q`` (adjoint of :func:`_fold`)."""
    N = X.shape[-1]
    return X[..., np.arange(Q) % N]


@dataclass(frozen=True)
class _RowGeometry:
    """Constants of the per-row transform for one tile."""

    Na: int
    Nb: int
    ha: float
    hb: float
    oa: float
    ob: float
    La: float
    Lb: float
    P11: float
    P12: float
    P22: float


def _row_forward(X, g: _RowGeometry, ma, mb):
    # X has the row's (a, b) axes last
    Qa = X.shape[-2]
    Y = np.fft.fft(_fold(X, g.Nb), axis=-1)[..., mb % g.Nb]
    ka = np.arange(Qa)
    Y = Y * np.exp(-2j * np.pi * np.outer(ka, mb) * (g.ha * g.P12 / g.Lb))
    Y = np.moveaxis(Y, -2, -1)
    Y = np.fft.fft(_fold(Y, g.Na), axis=-1)[..., ma % g.Na]
    Y = np.moveaxis(Y, -1, -2)
    phase = np.add.outer(ma * (g.oa * g.P11 / g.La), mb * ((g.oa * g.P12 + g.ob * g.P22) / g.Lb))
    return Y * np.exp(-2j * np.pi * phase)


def _row_adjoint(C, g: _RowGeometry, ma, mb, Qa, Qb):
    phase = np.add.outer(ma * (g.oa * g.P11 / g.La), mb * ((g.oa * g.P12 + g.ob * g.P22) / g.Lb))
    Y = C * np.exp(2j * np.pi * phase)
    Y = np.moveaxis(Y, -2, -1)
    Z = np.zeros_like(Y)
    Z[..., ma % g.Na] = Y
    Y = _unfold(g.Na * np.fft.ifft(Z, axis=-1), Qa)
    Y = np.moveaxis(Y, -1, -2)
    ka = np.arange(Qa)
    Y = Y * np.exp(2j * np.pi * np.outer(ka, mb) * (g.ha * g.P12 / g.Lb))
    Z = np.zeros_like(Y)
    Z[..., mb % g.Nb] = Y
    return _unfold(g.Nb * np.fft.ifft(Z, axis=-1), Qb)


def _near_lattice(v, shifts, eta):
    """True where ``v - c`` is within ``eta`` of an integer for some ``c`` in ``shifts``."""
    out = np.zeros(v.shape, dtype=bool)
    tol = eta * np.maximum(1.0, np.abs(v))
    for c in shifts:
        d = v - c
        out |= np.abs(d - np.round(d)) <= tol
    return out


def _near_dyadic(v, marks, eta):
    """True where ``v / c`` is within relative ``eta`` of a power of two for some ``c``."""
    out = np.zeros(v.shape, dtype=bool)
    for c in marks:
        t = np.log2(v / c)
        out |= np.abs(np.exp2(t - np.round(t)) - 1.0) <= eta
    return out


class Frame2D:
    """The frame on one grid: tile windows, analysis, synthesis and the frame operator.

    Parameters
    ----------
    grid : SpectralSignal
        Any signal on the target grid (only its metadata is used).
    spec : WindowSpec
    cube : CubeR
    eta : float
        Grid points whose coordinates fall within ``eta`` of a window breakpoint
        for some tile are evaluated at a slightly perturbed matrix and flagged.
    """

    def __init__(self, grid: SpectralSignal, spec: WindowSpec, cube: CubeR = CubeR(),
                 eta: float = DEFAULT_ETA, guard: int = DEFAULT_GUARD):
        self.spec = spec
        self.cube = cube
        self.eta = eta
        self.guard = guard
        self.mins = grid.mins.copy()
        self.maxs = grid.maxs.copy()
        self.counts = grid.counts
        self.h = grid.spacing
        self.dV = grid.cell_volume
        pts = grid.points().reshape(-1, 2, 2)
        self._coords(pts)

    # coordinates -------------------------------------------------------
    def _decompose(self, pts):
        s, K, W, Y, ok = kernels.decompose_batch(pts)
        return s, W[:, 0], Y[:, 0, 1], ok

    def _faces(self, s, w, y):
        e = self.spec.epsilon
        marks = (1.0 - e, 1.0, 2.0 + e)
        bad = _near_dyadic(s, marks, self.eta) | _near_dyadic(w, marks, self.eta)
        kap = np.floor(np.log2(w)).astype(np.int64)
        for dk in (-2, -1, 0, 1, 2):
            v = y * np.exp2(2.0 * (kap + dk))
            bad |= _near_lattice(v, (0.0, e, -e), self.eta)
        return bad

    def _coords(self, pts):
        s, w, y, ok = self._decompose(pts)
        regular = ok.copy()
        s, w, y = np.where(ok, s, np.nan), np.where(ok, w, np.nan), np.where(ok, y, np.nan)
        flagged = np.zeros(len(pts), dtype=bool)
        todo = ok & self._faces(np.where(ok, s, 1.5), np.where(ok, w, 1.5), np.where(ok, y, 0.5))
        E = np.array([[0.613, -0.377], [0.291, 0.829]])
        step = 8.0 * self.eta
        for _ in range(20):
            if not np.any(todo):
                break
            idx = np.flatnonzero(todo)
            flagged[idx] = True
            scale = np.abs(pts[idx]).reshape(len(idx), -1).max(axis=1)
            moved = pts[idx] + step * scale[:, None, None] * E
            s2, w2, y2, ok2 = self._decompose(moved)
            s[idx], w[idx], y[idx] = s2, w2, y2
            still = self._faces(s2, w2, y2) | ~ok2
            todo[:] = False
            todo[idx[still]] = True
            step *= 2.0
        if np.any(todo):
            raise GridError("could not move grid points off the tile faces")
        self.regular = regular
        self.s, self.w, self.y = s, w, y
        self.flags = np.flatnonzero(flagged).tolist()

    # tiles -------------------------------------------------------------
    def tiles_for(self, mask) -> list:
        """Tiles whose window is nonzero at some grid point selected by ``mask``."""
        mask = np.asarray(mask, dtype=bool).reshape(-1)
        if np.any(mask & ~self.regular):
            raise GridError("signal is nonzero at a singular grid point")
        s, w, y = self.s[mask], self.w[mask], self.y[mask]
        lam = np.floor(np.log2(s)).astype(np.int64)
        kap = np.floor(np.log2(w)).astype(np.int64)
        found = set()
        for dl in (-1, 0, 1):
            for dk in (-1, 0, 1):
                lp, kp = lam + dl, kap + dk
                v = y * np.exp2(2.0 * kp)
                base = np.floor(v).astype(np.int64)
                for dm in (-1, 0, 1):
                    mp = base + dm
                    g = self._window(s * np.exp2(-lp.astype(float)), w * np.exp2(-kp.astype(float)), v - mp)
                    hit = g > 0
                    if np.any(hit):
                        keys = np.unique(np.column_stack([lp[hit], kp[hit], mp[hit]]), axis=0)
                        found.update(map(tuple, keys.tolist()))
        return [TileIndex(l, (k,), np.array([[0, m], [0, 0]])) for l, k, m in sorted(found)]

    def _window(self, s, w, y):
        e, k = self.spec.epsilon, self.spec.kind
        return (ramp_profile(s, 1.0, 2.0, e, k) * ramp_profile(w, 1.0, 2.0, e, k)
                * ramp_profile(y, 0.0, 1.0, e, k))

    def window_on_grid(self, tile: TileIndex) -> np.ndarray:
        """``g(b p^-1)`` at every grid point (zero at singular points)."""
        k = tile.kappa[0]
        mu = int(tile.mu[0, 1])
        out = np.zeros(self.s.shape)
        ok = self.regular
        out[ok] = self._window(self.s[ok] * 2.0 ** (-tile.lam), self.w[ok] * 2.0 ** (-k),
                               self.y[ok] * 4.0 ** k - mu)
        return out.reshape(self.counts)

    def geometry(self, tile: TileIndex):
        """Row geometries for a tile; raises :class:`GridError` if unresolved."""
        if tile.max_exponent() > self.guard:
            raise TileRangeError(f"scale exponent beyond guard {self.guard}")
        P = tile.inverse_matrix()
        L = self.cube.sides
        rows = []
        for r, (a, b) in enumerate(((0, 1), (2, 3))):
            Na = L[a] / (self.h[a] * P[0, 0])
            Nb = L[b] / (self.h[b] * P[1, 1])
            for N in (Na, Nb):
                if abs(N - round(N)) > 1e-9 * N or round(N) < 2:
                    raise GridError(f"grid does not resolve tile {tile}: {N:.6g} samples per period")
            rows.append(_RowGeometry(int(round(Na)), int(round(Nb)), self.h[a], self.h[b],
                                     self.mins[a], self.mins[b], L[a], L[b], P[0, 0], P[0, 1], P[1, 1]))
        size = rows[0].Na * rows[0].Nb * rows[1].Na * rows[1].Nb
        if size > MAX_TILE_COEFFS:
            raise GridError(f"tile {tile} needs {size} coefficients (limit {MAX_TILE_COEFFS})")
        return rows

    @staticmethod
    def _default_start(rows):
        r1, r2 = rows
        return (-(r1.Na // 2), -(r1.Nb // 2), -(r2.Na // 2), -(r2.Nb // 2))

    # transforms --------------------------------------------------------
    def analysis(self, values, tile: TileIndex, m_start=None, window=None) -> TileCoefficients:
        """Coefficients ``|det p|^-1 dV sum_b f(b) g(b p^-1) exp(-2 pi i tr(gamma b p^-1))``."""
        rows = self.geometry(tile)
        if m_start is None:
            m_start = self._default_start(rows)
        g = self.window_on_grid(tile) if window is None else window
        X = np.asarray(values, dtype=np.complex128).reshape(self.counts) * g
        r1, r2 = rows
        m = [m_start[0] + np.arange(r1.Na), m_start[1] + np.arange(r1.Nb),
             m_start[2] + np.arange(r2.Na), m_start[3] + np.arange(r2.Nb)]
        X = np.moveaxis(X, (0, 1), (2, 3))        # (b21, b22, b11, b12)
        X = _row_forward(X, r1, m[0], m[1])
        X = np.moveaxis(X, (2, 3), (0, 1))        # (m1, m2, b21, b22)
        X = _row_forward(X, r2, m[2], m[3])
        scale = self.dV / abs(np.linalg.det(tile.to_matrix()))
        return TileCoefficients(tile, tuple(int(v) for v in m_start), scale * X)

    def synthesis_tile(self, coeffs: TileCoefficients, window=None) -> np.ndarray:
        """Adjoint of :meth:`analysis` for one tile."""
        rows = self.geometry(coeffs.tile)
        r1, r2 = rows
        shape = (r1.Na, r1.Nb, r2.Na, r2.Nb)
        if coeffs.values.shape != shape:
            raise GridError(f"coefficient block has shape {coeffs.values.shape}, expected {shape}")
        m = [coeffs.m_axis(k) for k in range(4)]
        Q = self.counts
        X = _row_adjoint(coeffs.values, r2, m[2], m[3], Q[2], Q[3])
        X = np.moveaxis(X, (0, 1), (2, 3))
        X = _row_adjoint(X, r1, m[0], m[1], Q[0], Q[1])
        X = np.moveaxis(X, (2, 3), (0, 1))
        g = self.window_on_grid(coeffs.tile) if window is None else window
        return X * g / abs(np.linalg.det(coeffs.tile.to_matrix()))

    def synthesize(self, blocks: Iterable[TileCoefficients]) -> np.ndarray:
        out = np.zeros(self.counts, dtype=np.complex128)
        for blk in blocks:
            out += self.synthesis_tile(blk)
        return out

    def symbol(self, tiles: Sequence[TileIndex]) -> np.ndarray:
        """``|R| sum_p g(b p^-1)^2`` over the given tiles."""
        acc = np.zeros(self.counts)
        for t in tiles:
            acc += self.window_on_grid(t) ** 2
        return self.cube.volume * acc

    def frame_operator(self, values, tiles: Sequence[TileIndex], on_tile=None) -> np.ndarray:
        """``S f = sum_p A_p^* A_p f`` through the full analysis/synthesis path.

        ``on_tile(coeffs, window)`` is called with each tile's coefficients.
        """
        out = np.zeros(self.counts, dtype=np.complex128)
        for t in tiles:
            g = self.window_on_grid(t)
            c = self.analysis(values, t, window=g)
            if on_tile is not None:
                on_tile(c, g)
            out += self.synthesis_tile(c, window=g)
        return out


# ---------------------------------------------------------------------------
# test signals


@dataclass(frozen=True)
class Bump:
    """Gaussian bump in ``(log s, log w, y)``, constant along the orthogonal factor."""

    s0: float
    w0: float
    y0: float
    sigma: tuple = (0.08, 0.1, 0.2)
    amplitude: complex = 1.0


def bump_values(points, bumps: Sequence[Bump], ramp=(0.0, 0.0, 0.0, 0.0), cutoff: float = 6.0):
    """Sum of bumps truncated at ``cutoff`` standard deviations, times a phase ramp."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2, 2)
    s, K, W, Y, ok = kernels.decompose_batch(pts)
    out = np.zeros(len(pts), dtype=np.complex128)
    ls, lw, y = np.log(np.where(ok, s, 1.0)), np.log(np.where(ok, W[:, 0], 1.0)), np.where(ok, Y[:, 0, 1], 0.0)
    for b in bumps:
        d2 = (((ls - math.log(b.s0)) / b.sigma[0]) ** 2 + ((lw - math.log(b.w0)) / b.sigma[1]) ** 2
              + ((y - b.y0) / b.sigma[2]) ** 2)
        out += np.where(ok & (d2 <= cutoff ** 2), b.amplitude * np.exp(-0.5 * d2), 0.0)
    phase = pts.reshape(-1, 4) @ np.asarray(ramp, dtype=float)
    return out * np.exp(2j * np.pi * phase)


def random_bumps(rng: np.random.Generator, count: int = 2, spec: Optional[WindowSpec] = None):
    """Bumps centred at random points away from the tile faces."""
    out = []
    e = 0.0 if spec is None else spec.epsilon
    while len(out) < count:
        s0 = rng.uniform(0.8, 0.95)
        w0 = rng.uniform(0.85, 1.2)
        y0 = rng.uniform(-0.4, 0.4)
        # keep centres off the dyadic faces of s and w and the integer faces of y
        if min(abs(math.log2(s0 / c) - round(math.log2(s0 / c))) for c in (1.0, 1 - e, 2 + e)) < 1e-3:
            continue
        if min(abs(math.log2(w0 / c) - round(math.log2(w0 / c))) for c in (1.0, 1 - e, 2 + e)) < 1e-3:
            continue
        if abs(y0 - round(y0)) < 1e-3:
            continue
        amp = complex(np.exp(2j * np.pi * rng.random()) * rng.uniform(0.5, 1.0))
        out.append(Bump(s0, w0, y0, amplitude=amp))
    return out


def test_signal(seed: int, count: int = 32, Q: int = 32, n_bumps: int = 2, cube: CubeR = CubeR(),
                spec: Optional[WindowSpec] = None) -> SpectralSignal:
    """Random bump signal on the default commensurate grid."""
    rng = np.random.Generator(np.random.PCG64(seed))
    bumps = random_bumps(rng, n_bumps, spec)
    ramp = rng.uniform(-0.05, 0.05, 4)
    mins, maxs, counts = commensurate_grid((0.0, 0.0, 0.0, 0.0), count, Q, cube)
    grid = SpectralSignal(mins, maxs, counts, np.zeros(counts))
    return grid.like(bump_values(grid.points(), bumps, ramp).reshape(counts))


# ---------------------------------------------------------------------------
# operations on signals


def _frame(f: SpectralSignal, spec: WindowSpec, cube: CubeR, frame: Optional[Frame2D]) -> Frame2D:
    if frame is not None:
        if frame.counts != f.counts or not np.array_equal(frame.mins, f.mins) or not np.array_equal(frame.maxs, f.maxs):
            raise GridError("signal and frame use different grids")
        return frame
    return Frame2D(f, spec, cube)


def analysis_coefficients(f: SpectralSignal, p: TileIndex, spec: WindowSpec, gamma_range=None,
                          cube: CubeR = CubeR(), frame: Optional[Frame2D] = None) -> TileCoefficients:
    """Frame coefficients of ``f`` for tile ``p``.

    ``gamma_range`` is ``((lo1, hi1), ..., (lo4, hi4))`` (inclusive); by default
    a full centred period of lattice indices is returned, which carries all of
    the coefficient energy of the tile.
    """
    fr = _frame(f, spec, cube, frame)
    if gamma_range is None:
        return fr.analysis(f.values, p)
    rows = fr.geometry(p)
    periods = (rows[0].Na, rows[0].Nb, rows[1].Na, rows[1].Nb)
    lo = [int(a) for a, _ in gamma_range]
    hi = [int(b) for _, b in gamma_range]
    for a, b, N in zip(lo, hi, periods):
        if b < a or b - a + 1 > N:
            raise GridError(f"lattice range [{a}, {b}] exceeds the {N} samples per period")
    blk = fr.analysis(f.values, p, m_start=lo)
    sl = tuple(slice(0, b - a + 1) for a, b in zip(lo, hi))
    return TileCoefficients(p, tuple(lo), blk.values[sl])


def direct_coefficient(f: SpectralSignal, p: TileIndex, m, spec: WindowSpec, cube: CubeR = CubeR(),
                       frame: Optional[Frame2D] = None) -> complex:
    """One coefficient by direct summation (reference for the FFT path)."""
    fr = _frame(f, spec, cube, frame)
    g = fr.window_on_grid(p).reshape(-1)
    sel = np.flatnonzero(g * np.abs(f.values.reshape(-1)) > 0)
    pts = f.points().reshape(-1, 2, 2)[sel]
    U = pts @ p.inverse_matrix()
    phase = np.einsum("ij,tji->t", lattice_gamma(m, cube), U)
    val = np.sum(f.values.reshape(-1)[sel] * g[sel] * np.exp(-2j * np.pi * phase))
    return complex(f.cell_volume * val / abs(np.linalg.det(p.to_matrix())))


def support_tiles(f: SpectralSignal, spec: WindowSpec, cube: CubeR = CubeR(),
                  frame: Optional[Frame2D] = None) -> list:
    fr = _frame(f, spec, cube, frame)
    return fr.tiles_for(f.values.reshape(-1) != 0)


def frame_operator_symbol(b, spec: WindowSpec, cube: CubeR = CubeR(), eta: float = DEFAULT_ETA) -> float:
    """``|R|`` times the Calderon sum at ``b``."""
    from .calderon import calderon_sum
    return cube.volume * calderon_sum(b, spec, eta)


def synthesize(blocks: Iterable[TileCoefficients], grid: SpectralSignal, spec: WindowSpec,
               cube: CubeR = CubeR(), frame: Optional[Frame2D] = None) -> SpectralSignal:
    """``sum_{p, m} c_{p, m}`` times the Fourier samples of the frame elements."""
    fr = _frame(grid, spec, cube, frame)
    return grid.like(fr.synthesize(blocks), flags=fr.flags)


@dataclass
class Reconstruction:
    signal: SpectralSignal
    symbol_min: float
    symbol_max: float
    tiles: int
    rel_error: float
    flags: list = field(default_factory=list)


def _check_symbol(sym, support, volume):
    vals = sym.reshape(-1)[support]
    if vals.size and vals.min() < volume * (1.0 - 1e-9):
        raise AssertionError(f"frame symbol {vals.min():.6g} below |R| = {volume:g}")
    return (float(vals.min()), float(vals.max())) if vals.size else (float("nan"), float("nan"))


def reconstruct_canonical(f: SpectralSignal, spec: WindowSpec, cube: CubeR = CubeR(), full: bool = True,
                          frame: Optional[Frame2D] = None) -> Reconstruction:
    """Apply the frame operator and divide by its symbol.

    With ``full=False`` the multiplier identity ``S f = symbol * f`` replaces the
    analysis/synthesis pass.
    """
    fr = _frame(f, spec, cube, frame)
    support = np.flatnonzero(f.values.reshape(-1) != 0)
    tiles = fr.tiles_for(f.values.reshape(-1) != 0)
    sym = fr.symbol(tiles)
    lo, hi = _check_symbol(sym, support, cube.volume)
    Sf = fr.frame_operator(f.values, tiles) if full else sym * f.values
    out = np.zeros(f.counts, dtype=np.complex128)
    nz = sym > 0
    out[nz] = Sf[nz] / sym[nz]
    rec = f.like(out, flags=fr.flags)
    err = _rel_error(rec.values, f.values)
    return Reconstruction(rec, lo, hi, len(tiles), err, fr.flags)


def _rel_error(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a))


@dataclass
class IterationResult:
    signal: SpectralSignal
    history: list
    ratios: list
    bound_ratio: float
    A: float
    B: float


def default_bounds(spec: WindowSpec, cube: CubeR = CubeR(), A=None, B=None):
    """Theoretical frame bounds: ``A = |R|`` and ``B = |R|`` (indicator) or ``M |R|``."""
    A = cube.volume if A is None else float(A)
    if B is None:
        B = cube.volume * (1 if spec.kind == "indicator" else m_bound(2, spec.epsilon))
    return A, float(B)


def reconstruct_frame_algorithm(f: SpectralSignal, spec: WindowSpec, iterations: int,
                                A: Optional[float] = None, B: Optional[float] = None,
                                operator: str = "multiplier", cube: CubeR = CubeR(),
                                frame: Optional[Frame2D] = None) -> IterationResult:
    """Frame algorithm ``f_{k+1} = f_k + 2/(A+B) (S f - S f_k)`` from ``f_0 = 0``.

    ``A`` and ``B`` default to ``|R|`` and ``M |R|``.  ``operator`` chooses the
    multiplier form of ``S`` or the full analysis/synthesis path.  The history
    holds the relative grid-L2 error after each iteration.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    fr = _frame(f, spec, cube, frame)
    A, B = default_bounds(spec, cube, A, B)
    mask = f.values.reshape(-1) != 0
    tiles = fr.tiles_for(mask)
    if operator == "multiplier":
        sym = fr.symbol(tiles)
        apply = lambda v: sym * v
    elif operator == "full":
        apply = lambda v: fr.frame_operator(v, tiles)
    else:
        raise ValueError(f"unknown operator {operator!r}")
    Sf = apply(f.values)
    x = np.zeros(f.counts, dtype=np.complex128)
    lam = 2.0 / (A + B)
    hist = [1.0]
    for _ in range(iterations):
        x = x + lam * (Sf - apply(x))
        e = _rel_error(x, f.values)
        if e > hist[-1] * (1 + 1e-9) and e > 1e-13:
            raise AssertionError("frame algorithm diverged; the frame bounds are violated")
        hist.append(e)
    ratios = [b / a for a, b in zip(hist[:-1], hist[1:]) if a > 1e-13]
    return IterationResult(f.like(x, flags=fr.flags), hist, ratios, (B - A) / (B + A), A, B)


def r_containment(N: int, seed: int, eps: float = 0.5, cube: CubeR = CubeR()) -> int:
    """Number of sampled points of ``F_o(eps)`` that fall outside the cube (should be 0)."""
    from .group import recompose_batch, random_orthogonal
    rng = np.random.Generator(np.random.PCG64(seed))
    bad = 0
    done = 0
    while done < N:
        m = min(200_000, N - done)
        s = rng.uniform(1 - eps, 2 + eps, m)
        w = rng.uniform(1 - eps, 2 + eps, (m, 1))
        y = np.zeros((m, 2, 2))
        y[:, 0, 1] = rng.uniform(-eps, 1 + eps, m)
        A = recompose_batch(s, random_orthogonal(2, rng, m), w, y)
        bad += int((~cube.contains(A)).sum())
        done += m
    return bad


def symbol_crosscheck(fr: Frame2D, tiles, points_idx, spec: WindowSpec, eta: float = DEFAULT_ETA):
    """Compare the grid symbol with the Calderon sum from the overlap enumeration."""
    pts = None
    sym = fr.symbol(tiles).reshape(-1)[points_idx]
    mins, maxs, counts = fr.mins, fr.maxs, fr.counts
    grid = SpectralSignal(mins, maxs, counts, np.zeros(counts))
    pts = grid.points().reshape(-1, 2, 2)[points_idx]
    sums, _, status = calderon_batch(pts, spec, eta)
    ok = status == 0
    return sym[ok], fr.cube.volume * sums[ok]


# ---------------------------------------------------------------------------
# end-to-end demo


@dataclass
class DemoConfig:
    """Settings of the n = 2 frame demo."""

    count: int = 32
    Q: int = 32
    seed: int = 0
    bumps: int = 2
    kind: str = "smooth"
    epsilon: float = 0.2
    iterations: int = 40
    full: bool = True
    crosscheck_points: int = 200
    coeff_threshold: float = 1e-8

    def window(self) -> WindowSpec:
        return WindowSpec(self.kind, self.epsilon)


def _adjoint_defect(fr: Frame2D, tile: TileIndex, rng) -> float:
    shape = tuple(int(v) for v in (r for g in fr.geometry(tile) for r in (g.Na, g.Nb)))
    x = rng.standard_normal(fr.counts) + 1j * rng.standard_normal(fr.counts)
    y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    blk = fr.analysis(x, tile)
    lhs = np.vdot(y, blk.values)
    rhs = fr.dV * np.vdot(fr.synthesis_tile(TileCoefficients(tile, blk.m_start, y)), x)
    return float(abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))


def run_frame_demo(cfg: DemoConfig, signal: Optional[SpectralSignal] = None, coeff_csv=None,
                   history_csv=None) -> dict:
    """Generate a test signal and run every reconstruction path on it.

    Returns a JSON-ready report.  ``coeff_csv`` receives the coefficients above
    ``cfg.coeff_threshold`` and ``history_csv`` the frame-algorithm errors.
    """
    spec = cfg.window()
    cube = CubeR()
    f = signal if signal is not None else test_signal(cfg.seed, cfg.count, cfg.Q, cfg.bumps, cube, spec)
    fr = Frame2D(f, spec, cube)
    mask = f.values.reshape(-1) != 0
    support = np.flatnonzero(mask)
    tiles = fr.tiles_for(mask)
    sym = fr.symbol(tiles)
    s_lo, s_hi = _check_symbol(sym, support, cube.volume)

    fast = reconstruct_canonical(f, spec, cube, full=False, frame=fr)
    report = {
        "grid": {"min": fr.mins.tolist(), "max": fr.maxs.tolist(), "counts": list(fr.counts)},
        "support_points": int(support.size),
        "flagged_points": len(fr.flags),
        "tiles": [list(t.key()) for t in tiles],
        "R_volume": cube.volume,
        "symbol_min": s_lo,
        "symbol_max": s_hi,
        "cond_emp": s_hi / s_lo,
        "M_bound": 1 if spec.kind == "indicator" else m_bound(2, spec.epsilon),
        "fast_rel_error": fast.rel_error,
    }

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    pick = rng.choice(support, size=min(cfg.crosscheck_points, support.size), replace=False)
    a, b = symbol_crosscheck(fr, tiles, np.sort(pick), spec)
    report["symbol_vs_calderon"] = float(np.max(np.abs(a - b) / b)) if a.size else 0.0
    report["adjoint_defect"] = _adjoint_defect(fr, tiles[0], rng) if tiles else 0.0

    if cfg.full:
        parseval = []
        radius = []
        blocks = []

        def visit(c, g):
            target = cube.volume * fr.dV * float(np.sum(np.abs(f.values) ** 2 * g ** 2))
            e = c.energy()
            parseval.append(abs(e - target) / target if target > 0 else e)
            radius.append(c.energy_radius())
            if coeff_csv is not None:
                keep = np.abs(c.values) > cfg.coeff_threshold
                if keep.any():
                    blocks.append(TileCoefficients(c.tile, c.m_start, np.where(keep, c.values, 0)))

        Sf = fr.frame_operator(f.values, tiles, on_tile=visit)
        out = np.zeros(f.counts, dtype=np.complex128)
        nz = sym > 0
        out[nz] = Sf[nz] / sym[nz]
        report["full_rel_error"] = _rel_error(out, f.values)
        report["full_vs_fast"] = _rel_error(out, fast.signal.values)
        report["parseval_max_rel"] = max(parseval, default=0.0)
        report["energy_box_radius"] = max(radius, default=0)
        if coeff_csv is not None:
            from .spectral import write_coefficients_csv
            report["coefficients_written"] = write_coefficients_csv(
                coeff_csv, blocks, cfg.coeff_threshold,
                comment=f"frame coefficients with |c| > {cfg.coeff_threshold:g}")

    cons = reconstruct_frame_algorithm(f, spec, cfg.iterations, cube=cube, frame=fr)
    emp = reconstruct_frame_algorithm(f, spec, cfg.iterations, A=s_lo, B=s_hi, cube=cube, frame=fr)
    report["frame_algorithm"] = {
        "iterations": cfg.iterations,
        "conservative": {"A": cons.A, "B": cons.B, "bound_ratio": cons.bound_ratio,
                         "max_ratio": max(cons.ratios, default=0.0), "final_error": cons.history[-1]},
        "empirical": {"A": emp.A, "B": emp.B, "bound_ratio": emp.bound_ratio,
                      "max_ratio": max(emp.ratios, default=0.0), "final_error": emp.history[-1]},
        "iterations_to_1e-12": next((i for i, e in enumerate(cons.history) if e <= 1e-12), None),
    }
    if history_csv is not None:
        with open(history_csv, "w") as fh:
            fh.write("# iteration,conservative_error,empirical_error\n")
            for i, (x, y) in enumerate(zip(cons.history, emp.history)):
                fh.write(f"{i},{x!r},{y!r}\n")
    return report


def demo_failures(report: dict, full_tol: float = 1e-6, fast_tol: float = 1e-10) -> list:
    """Names of the demo checks that did not pass."""
    bad = []
    if report["fast_rel_error"] > fast_tol:
        bad.append("fast_rel_error")
    if report.get("full_rel_error", 0.0) > full_tol:
        bad.append("full_rel_error")
    if report.get("parseval_max_rel", 0.0) > 1e-6:
        bad.append("parseval_max_rel")
    if report["adjoint_defect"] > 1e-8:
        bad.append("adjoint_defect")
    if report["symbol_vs_calderon"] > 1e-9:
        bad.append("symbol_vs_calderon")
    if report["cond_emp"] > report["M_bound"] * (1 + 1e-12):
        bad.append("cond_emp")
    fa = report["frame_algorithm"]
    for key in ("conservative", "empirical"):
        if fa[key]["max_ratio"] > fa[key]["bound_ratio"] + 1e-9:
            bad.append(f"frame_algorithm.{key}")
    return bad
