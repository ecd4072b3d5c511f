"""Pure-Python/numpy implementation of the hot kernels.

This module is the reference the compiled ``_kernels`` extension is checked
against, and the fallback used when the extension is unavailable (or when
``GLTILING_PURE=1`` is set).  All functions take and return numpy arrays with
the same shapes and dtypes as their compiled counterparts.
"""
import itertools
import math

import numpy as np

from ._codes import (BOUNDARY, C_EDGE, C_IN, C_OUT, OK, OVERFLOW, SINGULAR,
                     WIN_COSINE, WIN_INDICATOR, WIN_NONE)


def decompose_batch(A):
    """Iwasawa factors of a stack of square matrices.

    Returns ``(s, K, W, Y, ok)`` with ``A[i] = s[i] K[i] diag(W[i]) Y[i]``,
    ``W`` holding all ``n`` diagonal entries (product one) and ``Y`` unit upper
    triangular.  Rows with ``ok == False`` were rejected as numerically singular
    and carry NaNs.
    """
    A = np.asarray(A, dtype=np.float64)
    N, n, _ = A.shape
    Q, R = np.linalg.qr(A)
    d = np.diagonal(R, axis1=1, axis2=2)
    sgn = np.where(d < 0, -1.0, 1.0)
    R = R * sgn[:, :, None]
    Q = Q * sgn[:, None, :]
    R = np.triu(R)
    diag = np.diagonal(R, axis1=1, axis2=2).copy()
    scale = np.abs(A).reshape(N, -1).max(axis=1)
    det = np.prod(diag, axis=1)
    ok = (det > 1e-12 * scale ** n) & np.all(diag > 0, axis=1)
    det = np.where(ok, det, np.nan)
    diag = np.where(ok[:, None], diag, np.nan)
    s = det ** (1.0 / n)
    W = diag / s[:, None]
    Y = R / diag[:, :, None]
    return s, Q, W, Y, ok


def _split_pow2(x):
    """Return ``(e, m)`` with ``x = m * 2**e`` and ``m`` in ``[1, 2)``."""
    m, e = math.frexp(x)
    return e - 1, 2.0 * m


def _near_integer(v, tol):
    return abs(v - round(v)) <= tol * max(1.0, abs(v))


def _classify(t, lo, hi, closed_lo, closed_hi, eta):
    if eta > 0.0 and (abs(t - lo) <= eta * max(1.0, abs(lo))
                      or abs(t - hi) <= eta * max(1.0, abs(hi))):
        # an edge hit only matters if the value is not clearly outside
        return C_EDGE
    above = t > lo or (closed_lo and t == lo)
    below = t < hi or (closed_hi and t == hi)
    return C_IN if (above and below) else C_OUT


def _assign_one(s, W, Y, tol, guard):
    n = W.shape[0]
    lam, sc = _split_pow2(s)
    status = OK
    if _near_integer(sc, tol) or abs(sc - 2.0) <= tol * 2.0:
        status = BOUNDARY
    kappa = np.zeros(n, dtype=np.int64)
    wc = np.empty(n - 1)
    for i in range(n - 1):
        kappa[i], wc[i] = _split_pow2(W[i])
        if abs(wc[i] - 1.0) <= tol or abs(wc[i] - 2.0) <= 2.0 * tol:
            status = BOUNDARY
    kappa[n - 1] = -kappa[: n - 1].sum()
    if abs(lam) > guard or np.any(np.abs(kappa) > guard):
        return lam, kappa, None, sc, wc, None, OVERFLOW
    mu = np.zeros((n, n), dtype=np.int64)
    y = np.zeros((n, n))
    for d in range(1, n):
        for i in range(n - d):
            j = i + d
            v = Y[i, j] * 2.0 ** (int(kappa[i]) - int(kappa[j]))
            for k in range(i + 1, j):
                v -= y[i, k] * mu[k, j]
            f = math.floor(v)
            if _near_integer(v, tol):
                status = BOUNDARY
            mu[i, j] = f
            y[i, j] = v - f
    return lam, kappa, mu, sc, wc, y, status


def assign_batch(A, tol=1e-12, guard=512):
    """Tile index and tile coordinates of a stack of matrices.

    Returns ``(lam, kappa, mu, sc, wc, yc, K, status)``.  ``kappa`` has all
    ``n`` entries (the last one is minus the sum of the others); ``mu`` and
    ``yc`` are strictly upper triangular.
    """
    A = np.asarray(A, dtype=np.float64)
    N, n, _ = A.shape
    s, K, W, Y, ok = decompose_batch(A)
    lam = np.zeros(N, dtype=np.int64)
    kappa = np.zeros((N, n), dtype=np.int64)
    mu = np.zeros((N, n, n), dtype=np.int64)
    sc = np.full(N, np.nan)
    wc = np.full((N, n - 1), np.nan)
    yc = np.zeros((N, n, n))
    status = np.zeros(N, dtype=np.int8)
    for t in range(N):
        if not ok[t]:
            status[t] = SINGULAR
            continue
        l, kap, m, s1, w1, y1, st = _assign_one(s[t], W[t], Y[t], tol, guard)
        status[t] = st
        if st == OVERFLOW:
            continue
        lam[t], kappa[t], mu[t], sc[t], wc[t], yc[t] = l, kap, m, s1, w1, y1
    return lam, kappa, mu, sc, wc, yc, K, status


def ramp(t, lo, hi, eps, kind):
    """Scalar window profile: plateau on ``[lo, hi]``, zero off ``(lo-eps, hi+eps)``."""
    if lo <= t <= hi:
        return 1.0
    if kind == WIN_INDICATOR:
        return 0.0
    if lo - eps < t < lo:
        return math.sin(0.5 * math.pi * (t - lo + eps) / eps) ** 2
    if hi < t < hi + eps:
        return math.sin(0.5 * math.pi * (hi + eps - t) / eps) ** 2
    return 0.0


def window_from_coords(s, w, y, eps, kind):
    """Window value from tile coordinates (``w`` has ``n-1`` entries)."""
    n = len(w) + 1
    g = ramp(s, 1.0, 2.0, eps, kind)
    for i in range(n - 1):
        if g == 0.0:
            return 0.0
        g *= ramp(w[i], 1.0, 2.0, eps, kind)
    for i in range(n):
        for j in range(i + 1, n):
            if g == 0.0:
                return 0.0
            g *= ramp(y[i, j], 0.0, 1.0, eps, kind)
    return g


def _tile_inverse(lam, kappa, mu):
    """Inverse of the P-element with the given index, computed exactly."""
    n = len(kappa)
    U = np.eye(n)
    U[np.triu_indices(n, 1)] = mu[np.triu_indices(n, 1)]
    Uinv = np.eye(n)
    # back substitution; entries stay integers
    for j in range(n):
        for i in range(j - 1, -1, -1):
            acc = 0.0
            for k in range(i + 1, j + 1):
                acc += U[i, k] * Uinv[k, j]
            Uinv[i, j] = -acc
    Dinv = np.array([2.0 ** (-int(k)) for k in kappa])
    return 2.0 ** (-int(lam)) * (Dinv[:, None] * Uinv)


def _confirm(Rb, lam, kappa, mu, eps, eta):
    """Classify ``b p^{-1}`` against F_o using the triangular factor of ``b``."""
    n = Rb.shape[0]
    T = Rb @ _tile_inverse(lam, kappa, mu)
    d = np.diag(T).copy()
    s = float(np.prod(d)) ** (1.0 / n)
    w = d / s
    y = T / d[:, None]
    worst = C_IN
    c = _classify(s, 1.0 - eps, 2.0 + eps, False, False, eta)
    if c == C_OUT:
        return C_OUT, None
    worst = max(worst, c)
    for i in range(n - 1):
        c = _classify(w[i], 1.0 - eps, 2.0 + eps, False, False, eta)
        if c == C_OUT:
            return C_OUT, None
        worst = max(worst, c)
    for i in range(n):
        for j in range(i + 1, n):
            c = _classify(y[i, j], -eps, 1.0 + eps, False, False, eta)
            if c == C_OUT:
                return C_OUT, None
            worst = max(worst, c)
    return worst, (s, w[: n - 1], np.triu(y, 1))


def overlap_point(b, eps, eta=1e-9, kind=WIN_NONE, guard=512):
    """All P-elements ``p'`` with ``b p'^{-1}`` in F_o, for one matrix ``b``.

    Returns ``(status, base, hits)``: ``base`` is the ``(lam, kappa, mu)`` of the
    tile containing ``b`` and ``hits`` a list of ``(lam, kappa, mu, g)`` with
    ``g`` the window value at ``b p'^{-1}`` (1.0 when ``kind`` is WIN_NONE).
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    s, K, W, Y, ok = decompose_batch(b[None])
    if not ok[0]:
        return SINGULAR, None, []
    s, W, Y = float(s[0]), W[0], Y[0]
    lam, kappa, mu, sc, wc, yc, st = _assign_one(s, W, Y, max(eta, 1e-12), guard)
    if st != OK:
        return st, None, []
    if abs(lam) + 1 > guard or np.any(np.abs(kappa) + 2 > guard):
        return OVERFLOW, None, []
    base = (int(lam), kappa.copy(), mu.copy())
    Rb = s * (W[:, None] * Y)
    pairs = [(i, i + d) for d in range(1, n) for i in range(n - d)]
    hits = []
    flagged = False
    for dl in (-1, 0, 1):
        lp = lam + dl
        if _classify(s * 2.0 ** (-lp), 1.0 - eps, 2.0 + eps, False, False, eta) == C_OUT:
            continue
        for dk in itertools.product((-1, 0, 1), repeat=n - 1):
            kp = np.empty(n, dtype=np.int64)
            kp[: n - 1] = kappa[: n - 1] + np.array(dk, dtype=np.int64)
            kp[n - 1] = -kp[: n - 1].sum()
            if any(_classify(W[i] * 2.0 ** (-int(kp[i])), 1.0 - eps, 2.0 + eps,
                             False, False, eta) == C_OUT for i in range(n - 1)):
                continue
            Z = Y * np.exp2((kp[:, None] - kp[None, :]).astype(np.float64))
            mp = np.zeros((n, n), dtype=np.int64)
            yp = np.zeros((n, n))

            def descend(idx):
                nonlocal flagged
                if idx == len(pairs):
                    c, coords = _confirm(Rb, lp, kp, mp, eps, eta)
                    if c == C_OUT:
                        return
                    if c == C_EDGE:
                        flagged = True
                        return
                    g = 1.0
                    if kind != WIN_NONE:
                        g = window_from_coords(coords[0], coords[1], coords[2], eps, kind)
                    hits.append((int(lp), kp.copy(), mp.copy(), g))
                    return
                i, j = pairs[idx]
                alpha = Z[i, j]
                for k in range(i + 1, j):
                    alpha -= yp[i, k] * mp[k, j]
                pad = max(eta, 1e-12) * (1.0 + abs(alpha))
                lo = math.ceil(alpha - 1.0 - eps - pad)
                hi = math.floor(alpha + eps + pad)
                for m in range(lo, hi + 1):
                    if _classify(alpha - m, -eps, 1.0 + eps, False, False, eta) == C_OUT:
                        continue
                    mp[i, j] = m
                    yp[i, j] = alpha - m
                    descend(idx + 1)
                mp[i, j] = 0
                yp[i, j] = 0.0

            descend(0)
    if flagged:
        return BOUNDARY, base, hits
    return OK, base, hits


def overlap_batch(B, eps, eta=1e-9, kind=WIN_NONE, guard=512):
    """Pointwise overlap counts and Calderon sums for a stack of matrices.

    Returns ``(counts, sums, status)``; ``sums`` is the sum of squared window
    values over the overlapping tiles (equal to ``counts`` for WIN_NONE).
    """
    B = np.asarray(B, dtype=np.float64)
    N = B.shape[0]
    counts = np.zeros(N, dtype=np.int64)
    sums = np.zeros(N)
    status = np.zeros(N, dtype=np.int8)
    for t in range(N):
        st, base, hits = overlap_point(B[t], eps, eta, kind, guard)
        status[t] = st
        if st != OK:
            continue
        counts[t] = len(hits)
        sums[t] = sum(h[3] ** 2 for h in hits)
    return counts, sums, status
