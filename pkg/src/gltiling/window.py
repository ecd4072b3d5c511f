"""Fourier-domain windows squeezed between the indicators of the closed and the widened tile.

A window is a product of one-dimensional profiles in the Iwasawa coordinates
``s, w_i, y_ij`` and does not depend on the orthogonal factor.  Each profile is
1 on the plateau ``[lo, hi]``, 0 outside ``(lo - eps, hi + eps)`` and follows a
raised-cosine ramp in between (or drops straight to 0 for the indicator kind).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from . import _codes
from ._backend import kernels
from .group import GroupElement, SingularMatrixError

KINDS = ("indicator", "smooth")
RAMPS = ("raised-cosine",)


@dataclass(frozen=True)
class WindowSpec:
    """Window family and its transition width."""

    kind: str = "smooth"
    epsilon: float = 0.2
    ramp: str = "raised-cosine"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.ramp not in RAMPS:
            raise ValueError(f"ramp must be one of {RAMPS}")
        if not (0.0 < self.epsilon <= 0.5):
            raise ValueError("epsilon must lie in (0, 1/2]")

    @property
    def code(self) -> int:
        return _codes.WIN_INDICATOR if self.kind == "indicator" else _codes.WIN_COSINE

    @property
    def support_width(self) -> float:
        """How far beyond the closed tile the window can be nonzero."""
        return 0.0 if self.kind == "indicator" else self.epsilon

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        return cls(kind=d["kind"], epsilon=float(d["epsilon"]), ramp=d.get("ramp", "raised-cosine"))

    @classmethod
    def from_json(cls, text: str) -> "WindowSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ScaledWindow:
    """A window multiplied by a constant amplitude."""

    spec: WindowSpec
    amplitude: float = 1.0


Window = Union[WindowSpec, ScaledWindow]


def _split(window: Window):
    if isinstance(window, ScaledWindow):
        return window.spec, window.amplitude
    return window, 1.0


def ramp_profile(t, lo: float, hi: float, eps: float, kind: str = "smooth") -> np.ndarray:
    """One-dimensional profile: plateau on ``[lo, hi]`` with raised-cosine edges of width ``eps``."""
    t = np.asarray(t, dtype=float)
    out = ((t >= lo) & (t <= hi)).astype(float)
    if kind == "indicator":
        return out
    rise = (t > lo - eps) & (t < lo)
    fall = (t > hi) & (t < hi + eps)
    out = np.where(rise, np.sin(0.5 * np.pi * (t - lo + eps) / eps) ** 2, out)
    out = np.where(fall, np.sin(0.5 * np.pi * (hi + eps - t) / eps) ** 2, out)
    return out


def window_coords(window: Window, s, w, y) -> np.ndarray:
    """Window values from coordinate arrays ``s (N,)``, ``w (N, n-1)``, ``y (N, n, n)``."""
    spec, amp = _split(window)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    w = np.asarray(w, dtype=float).reshape(len(s), -1)
    n = w.shape[1] + 1
    y = np.asarray(y, dtype=float).reshape(len(s), n, n)
    e, k = spec.epsilon, spec.kind
    g = ramp_profile(s, 1.0, 2.0, e, k)
    g = g * np.prod(ramp_profile(w, 1.0, 2.0, e, k), axis=1)
    iu = np.triu_indices(n, 1)
    g = g * np.prod(ramp_profile(y[:, iu[0], iu[1]], 0.0, 1.0, e, k), axis=1)
    return amp * g


def window_eval_batch(window: Window, A) -> np.ndarray:
    """Window values at a stack of matrices; raises on singular input."""
    s, K, W, Y, ok = kernels.decompose_batch(np.asarray(A, dtype=float))
    if not np.all(ok):
        raise SingularMatrixError("window evaluated at a singular matrix")
    return window_coords(window, s, W[:, :-1], Y)


def window_eval(window: Window, a) -> float:
    """Window value at one matrix."""
    m = a.entries if isinstance(a, GroupElement) else np.asarray(a, dtype=float)
    return float(window_eval_batch(window, m[None])[0])


def _gauss_panels(f, breaks, order):
    x, wts = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        t = 0.5 * (b - a) * x + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.dot(wts, f(t)))
    return total


def _axis_integrals(spec: WindowSpec, n: int, order: int, scale: float = 1.0):
    e, k = spec.epsilon, spec.kind
    we = spec.support_width
    sb = np.array([1 - we, 1, 2, 2 + we]) * scale
    I_s = _gauss_panels(lambda t: ramp_profile(t / scale, 1.0, 2.0, e, k) ** 2 / t, sb, order)
    wb = [1 - we, 1, 2, 2 + we]
    I_w = [_gauss_panels(lambda t, p=2 * (n - i) - 1: ramp_profile(t, 1.0, 2.0, e, k) ** 2 * t ** p, wb, order)
           for i in range(1, n)]
    I_y = _gauss_panels(lambda t: ramp_profile(t, 0.0, 1.0, e, k) ** 2, [-we, 0, 1, 1 + we], order)
    return I_s * np.prod(I_w) * I_y ** (n * (n - 1) // 2)


def entry_box_n2(spec: WindowSpec, lam_shift: int = 0):
    """Half-widths of the entry box containing the window's support (``n = 2``), by column."""
    e = spec.support_width
    c1 = (2 + e) ** 2
    c2 = (2 + e) * np.hypot((2 + e) * (1 + e), 1.0 / (1 - e))
    return np.array([c1, c2]) * 2.0 ** lam_shift


def admissibility_integral(window: Window, n: int, method: str = "coords-quadrature",
                           N: int = 1_000_000, seed: int = 0, order: int = 64, lam_shift: int = 0):
    """Integral of ``|g|^2`` against Haar measure.

    Parameters
    ----------
    method : {"coords-quadrature", "entry-mc"}
        ``coords-quadrature`` integrates in Iwasawa coordinates with a
        normalized O_n factor (tensor Gauss-Legendre, panels split at the ramp
        breakpoints).  ``entry-mc`` (``n = 2``) averages ``|g(h)|^2 / |det h|^2``
        over a box of matrix entries, i.e. uses Lebesgue measure on entries.
    lam_shift : int
        Evaluate the window translated to the tile with ``lam = lam_shift``.

    Returns
    -------
    value, error : float
        For the quadrature the error is the change from halving ``order``;
        for Monte Carlo it is one standard error.
    """
    spec, amp = _split(window)
    scale = 2.0 ** lam_shift
    if method == "coords-quadrature":
        hi = _axis_integrals(spec, n, order, scale)
        lo = _axis_integrals(spec, n, max(order // 2, 2), scale)
        return float(amp ** 2 * hi), float(amp ** 2 * abs(hi - lo))
    if method == "entry-mc":
        if n != 2:
            raise ValueError("entry-mc is available for n = 2 only")
        if N <= 0:
            raise ValueError("N must be positive")
        c1, c2 = entry_box_n2(spec, lam_shift)
        half = np.array([[c1, c2], [c1, c2]])
        vol = float(np.prod(2 * half))
        rng = np.random.Generator(np.random.PCG64(seed))
        acc = acc2 = 0.0
        done = 0
        while done < N:
            m = min(200_000, N - done)
            h = rng.uniform(-1.0, 1.0, (m, 2, 2)) * half
            det = np.abs(h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] * h[:, 1, 0])
            good = det > 1e-12
            val = np.zeros(m)
            if np.any(good):
                s, K, W, Y, ok = kernels.decompose_batch(h[good])
                g = np.zeros(good.sum())
                g[ok] = window_coords(spec, s[ok] / scale, W[ok, :-1], Y[ok])
                val[good] = g ** 2 / det[good] ** 2
            acc += val.sum()
            acc2 += (val ** 2).sum()
            done += m
        mean = acc / N
        err = np.sqrt(max(acc2 / N - mean ** 2, 0.0) / N)
        return float(amp ** 2 * vol * mean), float(amp ** 2 * vol * err)
    raise ValueError(f"unsupported method {method!r}")


def normalize_to_wavelet(window: Window, n: int, order: int = 64):
    """Scale a window so that its admissibility integral equals one.

    Returns
    -------
    c : float
        Factor applied on top of the current amplitude.
    scaled : ScaledWindow
    """
    spec, amp = _split(window)
    value, _ = admissibility_integral(window, n, "coords-quadrature", order=order)
    if not value > 0:
        raise ValueError("window has zero admissibility integral")
    c = float(value ** -0.5)
    return c, ScaledWindow(spec, amp * c)
