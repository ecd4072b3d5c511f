# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Iwasawa factorization, tile assignment and overlap enumeration.

Semantics match ``_kernels_py`` exactly except for floating-point rounding in
the orthogonal-triangular factorization (Householder here, LAPACK there).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport frexp, floor, ceil, fabs, sqrt, pow, sin, ldexp, round as cround

cnp.import_array()

cdef enum:
    NM = 8
    NN = 64

cdef enum:
    S_OK = 0
    S_BOUNDARY = 1
    S_SINGULAR = 2
    S_OVERFLOW = 3
    K_NONE = 0
    K_INDICATOR = 1
    K_COSINE = 2
    CL_IN = 0
    CL_OUT = 1
    CL_EDGE = 2

cdef double PI = 3.141592653589793


cdef int _qr(const double* A, int n, double* Q, double* R) nogil:
    """Householder QR of a row-major ``n x n`` matrix with diag(R) >= 0."""
    cdef int i, j, k
    cdef double v[NM]
    cdef double nrm, alpha, dot
    for i in range(n * n):
        R[i] = A[i]
        Q[i] = 0.0
    for i in range(n):
        Q[i * n + i] = 1.0
    for k in range(n - 1):
        nrm = 0.0
        for i in range(k, n):
            nrm += R[i * n + k] * R[i * n + k]
        nrm = sqrt(nrm)
        if nrm == 0.0:
            continue
        alpha = -nrm if R[k * n + k] >= 0 else nrm
        for i in range(k, n):
            v[i] = R[i * n + k]
        v[k] -= alpha
        nrm = 0.0
        for i in range(k, n):
            nrm += v[i] * v[i]
        nrm = sqrt(nrm)
        if nrm == 0.0:
            continue
        for i in range(k, n):
            v[i] /= nrm
        for j in range(n):
            dot = 0.0
            for i in range(k, n):
                dot += v[i] * R[i * n + j]
            for i in range(k, n):
                R[i * n + j] -= 2.0 * dot * v[i]
        for i in range(n):
            dot = 0.0
            for j in range(k, n):
                dot += Q[i * n + j] * v[j]
            for j in range(k, n):
                Q[i * n + j] -= 2.0 * dot * v[j]
    for i in range(n):
        for j in range(i):
            R[i * n + j] = 0.0
        if R[i * n + i] < 0:
            for j in range(n):
                R[i * n + j] = -R[i * n + j]
                Q[j * n + i] = -Q[j * n + i]
    return 0


cdef int _decomp(const double* A, int n, double* s, double* K, double* W, double* Y) nogil:
    """Fill ``s, K, W, Y``; return 1 when ``A`` passes the singularity test."""
    cdef double R[NN]
    cdef double det = 1.0, scale = 0.0
    cdef int i, j
    for i in range(n * n):
        if fabs(A[i]) > scale:
            scale = fabs(A[i])
    _qr(A, n, K, R)
    for i in range(n):
        det *= R[i * n + i]
    if not (det > 1e-12 * pow(scale, n)):
        return 0
    for i in range(n):
        if not (R[i * n + i] > 0):
            return 0
    s[0] = pow(det, 1.0 / n)
    for i in range(n):
        W[i] = R[i * n + i] / s[0]
        for j in range(n):
            Y[i * n + j] = R[i * n + j] / R[i * n + i]
    return 1


cdef inline int _split_pow2(double x, double* m) nogil:
    cdef int e
    cdef double f = frexp(x, &e)
    m[0] = 2.0 * f
    return e - 1


cdef inline bint _near_integer(double v, double tol) nogil:
    return fabs(v - cround(v)) <= tol * (fabs(v) if fabs(v) > 1.0 else 1.0)


cdef inline int _classify(double t, double lo, double hi, double eta) nogil:
    """Open-interval classification with an ``eta`` edge band."""
    if eta > 0.0:
        if fabs(t - lo) <= eta * (fabs(lo) if fabs(lo) > 1.0 else 1.0):
            return CL_EDGE
        if fabs(t - hi) <= eta * (fabs(hi) if fabs(hi) > 1.0 else 1.0):
            return CL_EDGE
    if t > lo and t < hi:
        return CL_IN
    return CL_OUT


cdef int _assign_core(double s, const double* W, const double* Y, int n, double tol,
                      int guard, int* lam, int* kappa, long* mu, double* sc,
                      double* wc, double* yc) nogil:
    cdef int status = S_OK
    cdef int i, j, k, d, ksum = 0
    cdef double v, f
    lam[0] = _split_pow2(s, sc)
    if _near_integer(sc[0], tol) or fabs(sc[0] - 2.0) <= tol * 2.0:
        status = S_BOUNDARY
    for i in range(n - 1):
        kappa[i] = _split_pow2(W[i], &wc[i])
        ksum += kappa[i]
        if fabs(wc[i] - 1.0) <= tol or fabs(wc[i] - 2.0) <= 2.0 * tol:
            status = S_BOUNDARY
    kappa[n - 1] = -ksum
    if lam[0] > guard or lam[0] < -guard:
        return S_OVERFLOW
    for i in range(n):
        if kappa[i] > guard or kappa[i] < -guard:
            return S_OVERFLOW
    for i in range(n * n):
        mu[i] = 0
        yc[i] = 0.0
    for d in range(1, n):
        for i in range(n - d):
            j = i + d
            v = Y[i * n + j] * ldexp(1.0, kappa[i] - kappa[j])
            for k in range(i + 1, j):
                v -= yc[i * n + k] * <double>mu[k * n + j]
            f = floor(v)
            if _near_integer(v, tol):
                status = S_BOUNDARY
            mu[i * n + j] = <long>f
            yc[i * n + j] = v - f
    return status


def decompose_batch(A):
    """Iwasawa factors of a stack of square matrices; see ``_kernels_py``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t N = a.shape[0], t
    cdef int n = a.shape[1], i
    if n > NM:
        raise ValueError("compiled kernels support n <= %d" % NM)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.full(N, np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] K = np.zeros((N, n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W = np.full((N, n), np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Y = np.full((N, n, n), np.nan)
    cdef cnp.ndarray[cnp.npy_bool, ndim=1] ok = np.zeros(N, dtype=bool)
    cdef double sv
    cdef double Wt[NM]
    cdef double Yt[NN]
    cdef double Kt[NN]
    for t in range(N):
        if _decomp(&a[t, 0, 0], n, &sv, Kt, Wt, Yt):
            ok[t] = True
            s[t] = sv
            for i in range(n):
                W[t, i] = Wt[i]
            for i in range(n * n):
                Y[t, i // n, i % n] = Yt[i]
        for i in range(n * n):
            K[t, i // n, i % n] = Kt[i]
    return s, K, W, Y, ok


def assign_batch(A, double tol=1e-12, int guard=512):
    """Tile index and coordinates of a stack of matrices; see ``_kernels_py``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t N = a.shape[0], t
    cdef int n = a.shape[1], i, st
    if n > NM:
        raise ValueError("compiled kernels support n <= %d" % NM)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lam = np.zeros(N, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] kappa = np.zeros((N, n), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=3] mu = np.zeros((N, n, n), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sc = np.full(N, np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] wc = np.full((N, n - 1), np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] yc = np.zeros((N, n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=3] K = np.zeros((N, n, n))
    cdef cnp.ndarray[cnp.int8_t, ndim=1] status = np.zeros(N, dtype=np.int8)
    cdef double sv, scv
    cdef double Wt[NM]
    cdef double Yt[NN]
    cdef double Kt[NN]
    cdef double wct[NM]
    cdef double yct[NN]
    cdef int lt
    cdef int kt[NM]
    cdef long mt[NN]
    for t in range(N):
        if not _decomp(&a[t, 0, 0], n, &sv, Kt, Wt, Yt):
            status[t] = S_SINGULAR
            continue
        for i in range(n * n):
            K[t, i // n, i % n] = Kt[i]
        st = _assign_core(sv, Wt, Yt, n, tol, guard, &lt, kt, mt, &scv, wct, yct)
        status[t] = st
        if st == S_OVERFLOW:
            continue
        lam[t] = lt
        sc[t] = scv
        for i in range(n):
            kappa[t, i] = kt[i]
        for i in range(n - 1):
            wc[t, i] = wct[i]
        for i in range(n * n):
            mu[t, i // n, i % n] = mt[i]
            yc[t, i // n, i % n] = yct[i]
    return lam, kappa, mu, sc, wc, yc, K, status


cdef inline double _ramp(double t, double lo, double hi, double eps, int kind) nogil:
    if t >= lo and t <= hi:
        return 1.0
    if kind == K_INDICATOR:
        return 0.0
    if t > lo - eps and t < lo:
        return sin(0.5 * PI * (t - lo + eps) / eps) ** 2
    if t > hi and t < hi + eps:
        return sin(0.5 * PI * (hi + eps - t) / eps) ** 2
    return 0.0


cdef struct Ctx:
    int n
    int npairs
    int pi[NN]
    int pj[NN]
    double Rb[NN]
    double Z[NN]
    int lp
    int kp[NM]
    long mp[NN]
    double yp[NN]
    double eps
    double eta
    int kind
    long count
    double total
    int flagged


cdef int _confirm(Ctx* c, double* g) nogil:
    """Classify ``b p'^{-1}`` for the candidate held in ``c``; window value in ``g``."""
    cdef int n = c.n, i, j, k, cl, worst = CL_IN
    cdef double Uinv[NN]
    cdef double M[NN]
    cdef double T[NN]
    cdef double d[NM]
    cdef double acc, s, prod = 1.0, scale
    for i in range(n * n):
        Uinv[i] = 0.0
    for i in range(n):
        Uinv[i * n + i] = 1.0
    for j in range(n):
        for i in range(j - 1, -1, -1):
            acc = 0.0
            for k in range(i + 1, j + 1):
                acc += <double>c.mp[i * n + k] * Uinv[k * n + j]
            Uinv[i * n + j] = -acc
    scale = ldexp(1.0, -c.lp)
    # p'^{-1} = 2^{-lam} D^{-1} U^{-1}
    for i in range(n):
        for j in range(n):
            M[i * n + j] = scale * ldexp(Uinv[i * n + j], -c.kp[i])
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += c.Rb[i * n + k] * M[k * n + j]
            T[i * n + j] = acc
    for i in range(n):
        d[i] = T[i * n + i]
        prod *= d[i]
    s = pow(prod, 1.0 / n)
    cl = _classify(s, 1.0 - c.eps, 2.0 + c.eps, c.eta)
    if cl == CL_OUT:
        return CL_OUT
    if cl > worst:
        worst = cl
    for i in range(n - 1):
        cl = _classify(d[i] / s, 1.0 - c.eps, 2.0 + c.eps, c.eta)
        if cl == CL_OUT:
            return CL_OUT
        if cl > worst:
            worst = cl
    for i in range(n):
        for j in range(i + 1, n):
            cl = _classify(T[i * n + j] / d[i], -c.eps, 1.0 + c.eps, c.eta)
            if cl == CL_OUT:
                return CL_OUT
            if cl > worst:
                worst = cl
    if worst != CL_IN or c.kind == K_NONE:
        g[0] = 1.0
        return worst
    g[0] = _ramp(s, 1.0, 2.0, c.eps, c.kind)
    for i in range(n - 1):
        g[0] *= _ramp(d[i] / s, 1.0, 2.0, c.eps, c.kind)
    for i in range(n):
        for j in range(i + 1, n):
            g[0] *= _ramp(T[i * n + j] / d[i], 0.0, 1.0, c.eps, c.kind)
    return worst


cdef void _descend(Ctx* c, int idx, list hits):
    cdef int i, j, k, n = c.n, cl
    cdef long m, lo, hi
    cdef double alpha, pad, g
    if idx == c.npairs:
        cl = _confirm(c, &g)
        if cl == CL_OUT:
            return
        if cl == CL_EDGE:
            c.flagged = 1
            return
        c.count += 1
        c.total += g * g
        if hits is not None:
            kp = np.array([c.kp[i] for i in range(n)], dtype=np.int64)
            mp = np.zeros((n, n), dtype=np.int64)
            for i in range(n):
                for j in range(i + 1, n):
                    mp[i, j] = c.mp[i * n + j]
            hits.append((c.lp, kp, mp, g))
        return
    i = c.pi[idx]
    j = c.pj[idx]
    alpha = c.Z[i * n + j]
    for k in range(i + 1, j):
        alpha -= c.yp[i * n + k] * <double>c.mp[k * n + j]
    pad = (c.eta if c.eta > 1e-12 else 1e-12) * (1.0 + fabs(alpha))
    lo = <long>ceil(alpha - 1.0 - c.eps - pad)
    hi = <long>floor(alpha + c.eps + pad)
    m = lo
    while m <= hi:
        if _classify(alpha - <double>m, -c.eps, 1.0 + c.eps, c.eta) != CL_OUT:
            c.mp[i * n + j] = m
            c.yp[i * n + j] = alpha - <double>m
            _descend(c, idx + 1, hits)
        m += 1
    c.mp[i * n + j] = 0
    c.yp[i * n + j] = 0.0


cdef int _overlap_core(const double* b, int n, double eps, double eta, int kind,
                       int guard, Ctx* c, int* base_lam, int* base_kappa,
                       long* base_mu, int* have_base, list hits):
    cdef bint skip
    cdef double s, scv
    cdef double K[NN]
    cdef double W[NM]
    cdef double Y[NN]
    cdef double wct[NM]
    cdef double yct[NN]
    cdef int st, i, j, d, dl, combo, ncombo, rem, ksum
    cdef int lam
    have_base[0] = 0
    if not _decomp(b, n, &s, K, W, Y):
        return S_SINGULAR
    st = _assign_core(s, W, Y, n, eta if eta > 1e-12 else 1e-12, guard, &lam,
                      base_kappa, base_mu, &scv, wct, yct)
    if st != S_OK:
        return st
    have_base[0] = 1
    base_lam[0] = lam
    if lam + 1 > guard or lam - 1 < -guard:
        return S_OVERFLOW
    for i in range(n):
        if base_kappa[i] + 2 > guard or base_kappa[i] - 2 < -guard:
            return S_OVERFLOW
    c.n = n
    c.eps = eps
    c.eta = eta
    c.kind = kind
    c.count = 0
    c.total = 0.0
    c.flagged = 0
    c.npairs = 0
    for d in range(1, n):
        for i in range(n - d):
            c.pi[c.npairs] = i
            c.pj[c.npairs] = i + d
            c.npairs += 1
    for i in range(n):
        for j in range(n):
            c.Rb[i * n + j] = s * W[i] * Y[i * n + j]
            c.mp[i * n + j] = 0
            c.yp[i * n + j] = 0.0
    ncombo = 1
    for i in range(n - 1):
        ncombo *= 3
    for dl in range(-1, 2):
        c.lp = lam + dl
        if _classify(ldexp(s, -c.lp), 1.0 - eps, 2.0 + eps, eta) == CL_OUT:
            continue
        for combo in range(ncombo):
            # mixed-radix digits in the same order as itertools.product
            rem = combo
            ksum = 0
            for i in range(n - 2, -1, -1):
                c.kp[i] = base_kappa[i] + (rem % 3) - 1
                rem //= 3
            skip = False
            for i in range(n - 1):
                ksum += c.kp[i]
                if _classify(ldexp(W[i], -c.kp[i]), 1.0 - eps, 2.0 + eps, eta) == CL_OUT:
                    skip = True
            if skip:
                continue
            c.kp[n - 1] = -ksum
            for i in range(n):
                for j in range(n):
                    c.Z[i * n + j] = ldexp(Y[i * n + j], c.kp[i] - c.kp[j])
            _descend(c, 0, hits)
    if c.flagged:
        return S_BOUNDARY
    return S_OK


def overlap_point(b, double eps, double eta=1e-9, int kind=K_NONE, int guard=512):
    """All P-elements whose widened tile contains ``b``; see ``_kernels_py``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(b, dtype=np.float64)
    cdef int n = a.shape[0], st, i
    if n > NM:
        raise ValueError("compiled kernels support n <= %d" % NM)
    cdef Ctx c
    cdef int bl
    cdef int bk[NM]
    cdef long bm[NN]
    cdef int have_base
    hits = []
    st = _overlap_core(&a[0, 0], n, eps, eta, kind, guard, &c, &bl, bk, bm, &have_base, hits)
    if not have_base or st == S_OVERFLOW:
        return st, None, []
    base_k = np.array([bk[i] for i in range(n)], dtype=np.int64)
    base_m = np.zeros((n, n), dtype=np.int64)
    for i in range(n * n):
        base_m[i // n, i % n] = bm[i]
    return st, (bl, base_k, base_m), hits


def overlap_batch(B, double eps, double eta=1e-9, int kind=K_NONE, int guard=512):
    """Pointwise overlap counts and Calderon sums; see ``_kernels_py``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] a = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t N = a.shape[0], t
    cdef int n = a.shape[1], st
    if n > NM:
        raise ValueError("compiled kernels support n <= %d" % NM)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(N, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sums = np.zeros(N)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] status = np.zeros(N, dtype=np.int8)
    cdef Ctx c
    cdef int bl
    cdef int bk[NM]
    cdef long bm[NN]
    cdef int have_base
    for t in range(N):
        st = _overlap_core(&a[t, 0, 0], n, eps, eta, kind, guard, &c, &bl, bk, bm, &have_base, None)
        status[t] = st
        if st == S_OK:
            counts[t] = c.count
            sums[t] = c.total
    return counts, sums, status
