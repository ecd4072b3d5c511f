import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gltiling import _codes
from gltiling.group import recompose_batch, random_orthogonal
from gltiling.tiling import (BOUNDARY, F, classify_coords, F_CLOSURE, INSIDE, OUTSIDE, RegionKind, TileBoundaryError,
                             TileCoords, TileIndex, TileRangeError, coverage_check, equivariance_check,
                             f_open, membership, membership_batch, sample_fundamental, tile_assign,
                             tile_matrices, tile_point)


def test_tile_matrix_layout():
    p = TileIndex(1, (2, -1), np.array([[0, 3, -2], [0, 0, 5], [0, 0, 0]]))
    kf = [2, -1, -1]
    expect = np.zeros((3, 3))
    mu = {(0, 1): 3, (0, 2): -2, (1, 2): 5}
    for i in range(3):
        expect[i, i] = 2.0 ** (1 + kf[i])
        for j in range(i + 1, 3):
            expect[i, j] = 2.0 ** (1 + kf[j]) * mu[(i, j)]
    np.testing.assert_array_equal(p.to_matrix(), expect)
    np.testing.assert_allclose(p.inverse_matrix() @ p.to_matrix(), np.eye(3), atol=1e-14)


def test_tile_index_key_roundtrip():
    p = TileIndex(-3, (1,), np.array([[0, 4], [0, 0]]))
    assert TileIndex.from_key(2, p.key()) == p
    assert hash(TileIndex.from_key(2, p.key())) == hash(p)


def test_assign_identity():
    idx, c = tile_assign(np.eye(3))
    assert idx == TileIndex.identity(3)
    assert c.s == 1.0 and np.all(c.w == 1.0) and np.all(c.y == 0.0)
    np.testing.assert_allclose(c.k, np.eye(3), atol=1e-15)
    assert c.boundary


def test_assign_diagonal():
    idx, c = tile_assign(np.diag([4.0, 1.0]))
    assert idx.key() == (1, 1, 0)
    assert c.s == pytest.approx(1.0) and c.w[0] == pytest.approx(1.0) and c.y[0, 1] == 0.0


def test_assign_shear():
    idx, c = tile_assign(np.array([[1.0, 1.5], [0.0, 1.0]]))
    assert idx.key() == (0, 0, 1)
    assert c.y[0, 1] == pytest.approx(0.5)


def test_assign_strict_rejects_faces():
    with pytest.raises(TileBoundaryError):
        tile_assign(np.eye(2), strict=True)
    idx, c = tile_assign(np.array([[1.3, 0.2], [0.1, 1.1]]), strict=True)
    assert not c.boundary


def test_assign_overflow_guard():
    with pytest.raises(TileRangeError):
        tile_assign(np.diag([2.0 ** 40, 2.0 ** 40]), guard=10)


@pytest.mark.parametrize("a", [np.eye(2), np.diag([4.0, 1.0]), np.array([[1.0, 1.5], [0.0, 1.0]])])
def test_tile_point_inverts_assign(a):
    np.testing.assert_allclose(tile_point(*tile_assign(a)).entries, a, atol=1e-14)


@settings(max_examples=300, deadline=None)
@given(n=st.integers(2, 3), seed=st.integers(0, 2 ** 32 - 1),
       lam=st.integers(-3, 3), kap=st.lists(st.integers(-3, 3), min_size=2, max_size=2),
       mu=st.lists(st.integers(-3, 3), min_size=3, max_size=3))
def test_assign_recovers_known_tile(n, seed, lam, kap, mu):
    rng = np.random.Generator(np.random.PCG64(seed))
    s, k, w, y = sample_fundamental(n, rng, 1)
    M = np.zeros((n, n), dtype=np.int64)
    M[np.triu_indices(n, 1)] = mu[:n * (n - 1) // 2]
    p = TileIndex(lam, tuple(kap[:n - 1]), M)
    a = recompose_batch(s, k, w, y)[0] @ p.to_matrix()
    idx, c = tile_assign(a)
    assert idx == p
    assert c.s == pytest.approx(s[0], abs=1e-9)
    np.testing.assert_allclose(c.w, w[0], atol=1e-9)
    np.testing.assert_allclose(c.y, np.triu(y[0], 1), atol=1e-9)
    # |det| = (s 2^lam)^n
    assert abs(np.linalg.det(a)) == pytest.approx((c.s * 2.0 ** idx.lam) ** n, rel=1e-10)


@pytest.mark.parametrize("n,N", [(2, 20_000), (3, 5_000)])
def test_equivariance_scan(n, N):
    rep = equivariance_check(n, N, seed=4)
    assert rep.failures == 0
    assert rep.max_coord_error <= 1e-9


@pytest.mark.parametrize("n,N", [(2, 20_000), (3, 5_000)])
def test_coverage_scan(n, N):
    rep = coverage_check(n, N, seed=5)
    assert rep.passed
    assert rep.boundary < N // 100


def test_scans_do_not_depend_on_workers():
    a = equivariance_check(2, 45_000, seed=1, workers=1)
    b = equivariance_check(2, 45_000, seed=1, workers=3)
    assert a == b


def _coords_matrix(s, w, y, k=None):
    n = 2
    k = np.eye(n) if k is None else k
    Y = np.array([[1.0, y], [0.0, 1.0]])
    return recompose_batch(np.array([s]), k[None], np.array([[w]]), Y[None])[0]


def test_membership_plateau_point():
    k = random_orthogonal(2, np.random.default_rng(0))
    a = _coords_matrix(1.5, 1.5, 0.5, k)
    for region in (F, F_CLOSURE, f_open(0.2)):
        assert membership(a, region) == INSIDE


def test_membership_endpoint():
    a = 2.0 * np.eye(2)    # s = 2, w = 1, y = 0
    assert membership(a, F, eta=0.0) == OUTSIDE
    assert membership(a, F_CLOSURE, eta=0.0) == INSIDE
    assert membership(a, f_open(0.2), eta=0.0) == INSIDE
    assert membership(a, F) == BOUNDARY


def test_membership_open_endpoint():
    a = _coords_matrix(0.75, 1.5, 0.5)
    assert membership(a, f_open(0.25), eta=0.0) == OUTSIDE


def test_region_validation():
    with pytest.raises(ValueError):
        f_open(0.6)
    with pytest.raises(ValueError):
        RegionKind("G")


def test_region_monotonicity(rng):
    s, k, w, y = sample_fundamental(2, rng, 5000)
    s = s * rng.uniform(0.5, 1.5, s.shape)
    A = recompose_batch(s, k, w, y)
    inner = membership_batch(A, F)
    closed = membership_batch(A, F_CLOSURE)
    for eps in (0.05, 0.25, 0.5):
        wide = membership_batch(A, f_open(eps))
        assert np.all(closed[inner == _codes.C_IN] == _codes.C_IN)
        assert np.all(wide[closed == _codes.C_IN] == _codes.C_IN)


def test_closure_points_have_nearby_interior_points(rng):
    # closed-box points approached from inside F
    s = rng.choice([1.0, 2.0], 200)
    w = rng.choice([1.0, 2.0], (200, 1))
    y = np.zeros((200, 2, 2))
    y[:, 0, 1] = rng.choice([0.0, 1.0], 200)
    k = random_orthogonal(2, rng, 200)
    A = recompose_batch(s, k, w, y)
    assert np.all(classify_coords(s, w, y, F_CLOSURE, 0.0) == _codes.C_IN)
    assert np.all(classify_coords(s, w, y, F, 0.0)[s == 2.0] == _codes.C_OUT)
    d = 1e-7
    s2 = np.where(s == 2.0, s - d, s + d)
    w2 = np.where(w == 2.0, w - d, w + d)
    y2 = y.copy()
    y2[:, 0, 1] = np.where(y[:, 0, 1] == 1.0, 1.0 - d, d)
    B = recompose_batch(s2, k, w2, y2)
    assert np.all(membership_batch(B, F, 0.0) == _codes.C_IN)
    assert np.max(np.abs(A - B)) < 10 * d


def test_exact_face_counts_as_boundary():
    idx, c = tile_assign(np.diag([2.0, 2.0]))
    assert c.boundary


def test_backends_agree_on_assignment(backend, rng):
    from gltiling import _kernels_py
    A = rng.uniform(-3, 3, (2000, 3, 3))
    ref = _kernels_py.assign_batch(A, 1e-12, 512)
    got = backend.assign_batch(A, 1e-12, 512)
    for i in (0, 1, 2, 7):
        np.testing.assert_array_equal(got[i], ref[i])
    for i in (3, 4, 5, 6):
        np.testing.assert_allclose(got[i], ref[i], atol=1e-10)


def test_tile_matrices_matches_to_matrix(rng):
    lam = rng.integers(-3, 4, 20)
    kap = rng.integers(-3, 4, (20, 2))
    mu = np.triu(rng.integers(-3, 4, (20, 3, 3)), 1)
    P = tile_matrices(lam, kap, mu)
    for i in range(20):
        np.testing.assert_array_equal(P[i], TileIndex(int(lam[i]), tuple(kap[i]), mu[i]).to_matrix())
