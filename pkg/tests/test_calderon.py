import io

import numpy as np
import pytest

from gltiling import _codes
from gltiling.calderon import calderon_batch, calderon_sum, frame_bound_scan
from gltiling.group import recompose_batch, random_orthogonal
from gltiling.overlap import pointwise_overlap
from gltiling.tiling import TileBoundaryError, TileIndex, random_tile_indices, sample_widened, tile_matrices
from gltiling.window import WindowSpec, window_eval_batch

SMOOTH = WindowSpec("smooth", 0.2)
INDICATOR = WindowSpec("indicator", 0.2)


def test_sum_equals_window_sum_over_enumerated_tiles(rng):
    # independent evaluation: windows of b p'^-1 for every enumerated tile
    for b in sample_widened(2, rng, 50):
        tiles = pointwise_overlap(b, 0.2).tiles
        P_inv = np.array([t.inverse_matrix() for t in tiles])
        ref = float(np.sum(window_eval_batch(SMOOTH, b[None] @ P_inv) ** 2))
        assert calderon_sum(b, SMOOTH) == pytest.approx(ref, abs=1e-12)


def test_indicator_sum_is_one(rng):
    B = sample_widened(3, rng, 5000)
    sums, counts, status = calderon_batch(B, INDICATOR)
    ok = status == _codes.OK
    assert ok.mean() > 0.99
    np.testing.assert_allclose(sums[ok], 1.0, atol=1e-12)


def test_deep_interior_sum_is_one(rng):
    k = random_orthogonal(2, rng)
    p = TileIndex(-2, (1,), np.array([[0, -3], [0, 0]]))
    b = recompose_batch(np.array([1.5]), k[None], np.array([[1.5]]),
                        np.array([[[1.0, 0.5], [0.0, 1.0]]]))[0] @ p.to_matrix()
    assert calderon_sum(b, SMOOTH) == pytest.approx(1.0, abs=1e-12)


def test_boundary_point_raises():
    with pytest.raises(TileBoundaryError):
        calderon_sum(np.eye(2), SMOOTH)


def test_sum_is_invariant_under_diagonal_tiles(rng):
    # right multiplication by 2^lam D_kappa permutes P, so the sum is unchanged
    B = sample_widened(2, rng, 2000)
    lam, kap, mu = random_tile_indices(2, rng, 2000, 2)
    BP = B @ tile_matrices(lam, kap, np.zeros_like(mu))
    s0, _, st0 = calderon_batch(B, SMOOTH)
    s1, _, st1 = calderon_batch(BP, SMOOTH)
    ok = (st0 == 0) & (st1 == 0)
    np.testing.assert_allclose(s0[ok], s1[ok], atol=1e-12)


def test_sheared_tile_is_not_a_pointwise_symmetry():
    # p' p leaves P when p' has kappa' < 0 and p has a shear, so the sum moves;
    # the sampled extrema agree regardless
    rng = np.random.Generator(np.random.PCG64(0))
    B = sample_widened(2, rng, 20_000)
    lam, kap, mu = random_tile_indices(2, rng, 20_000, 2)
    s0, _, st0 = calderon_batch(B, SMOOTH)
    s1, _, st1 = calderon_batch(B @ tile_matrices(lam, kap, mu), SMOOTH)
    ok = (st0 == 0) & (st1 == 0)
    assert np.max(np.abs(s0[ok] - s1[ok])) > 0.1
    assert s0[ok].min() == pytest.approx(s1[ok].min(), abs=1e-6)
    assert s0[ok].max() == pytest.approx(s1[ok].max(), rel=1e-3)


def test_indicator_is_below_smooth(rng):
    B = sample_widened(2, rng, 5000)
    si, _, a = calderon_batch(B, INDICATOR)
    ss, _, b = calderon_batch(B, SMOOTH)
    ok = (a == 0) & (b == 0)
    assert np.all(si[ok] <= ss[ok] + 1e-15)


def test_frame_bound_scan_smooth_n2():
    rep = frame_bound_scan(2, SMOOTH, 20_000, seed=7)
    assert rep.passed
    assert 1.0 - 1e-12 <= rep.min_sum and rep.max_sum <= 33
    assert rep.cond <= 33
    assert rep.A_theory == 78400.0 and rep.B_theory == 33 * 78400.0
    assert rep.evaluated + rep.boundary == rep.samples


def test_frame_bound_scan_indicator_is_tight():
    rep = frame_bound_scan(2, INDICATOR, 20_000, seed=7)
    assert rep.A_emp == pytest.approx(78400.0, abs=1e-8)
    assert rep.B_emp == pytest.approx(78400.0, abs=1e-8)
    assert rep.cond == pytest.approx(1.0, abs=1e-12)


def test_frame_bound_scan_n3():
    rep = frame_bound_scan(3, SMOOTH, 2_000, seed=1)
    assert rep.passed and rep.cond <= 5832


def test_frame_bound_scan_rows():
    buf = io.StringIO()
    rep = frame_bound_scan(2, SMOOTH, 100, seed=2, rows_out=buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == rep.evaluated + 1
    assert len(lines[1].split(",")) == 5


def test_frame_bound_scan_errors():
    with pytest.raises(ValueError):
        frame_bound_scan(2, SMOOTH, 10, seed=0, R_volume=0.0)
    with pytest.raises(ValueError):
        frame_bound_scan(2, SMOOTH, 0, seed=0)
