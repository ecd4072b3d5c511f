import math

import numpy as np
import pytest

from gltiling.frame2d import (CubeR, DemoConfig, Frame2D, GridError, TileCoefficients, _check_symbol,
                              analysis_coefficients, commensurate_grid, demo_failures, direct_coefficient,
                              e_gamma, frame_operator_symbol, gram_entry, lattice_gamma,
                              orthonormality_defect, r_containment, reconstruct_canonical,
                              reconstruct_frame_algorithm, run_frame_demo, support_tiles, synthesize,
                              test_signal as make_signal)
from gltiling.overlap import pointwise_overlap
from gltiling.spectral import SpectralSignal, read_coefficients_csv, write_coefficients_csv
from gltiling.tiling import TileIndex
from gltiling.window import WindowSpec

SMOOTH = WindowSpec("smooth", 0.2)
INDICATOR = WindowSpec("indicator", 0.2)
CUBE = CubeR()


def small_signal(seed, **kw):
    return make_signal(seed, count=16, Q=16, **kw)


@pytest.fixture(scope="module")
def sig():
    return small_signal(1)


@pytest.fixture(scope="module")
def frame(sig):
    return Frame2D(sig, SMOOTH)


def tile(lam, kap, mu):
    return TileIndex(lam, (kap,), np.array([[0, mu], [0, 0]]))


# cube and lattice -------------------------------------------------------------


def test_cube_volume():
    assert CUBE.volume == 78400.0
    assert tuple(CUBE.sides) == (14.0, 20.0, 14.0, 20.0)
    with pytest.raises(ValueError):
        CubeR(lo=(0, 0, 0, 0), hi=(1, 1, 1, 0))


def test_trace_pairing(rng):
    u = rng.normal(size=(2, 2))
    m = rng.integers(-5, 6, 4)
    g = lattice_gamma(m)
    expected = sum(mk * uk / L for mk, uk, L in zip(m, u.reshape(-1), CUBE.sides))
    assert np.trace(g @ u) == pytest.approx(expected)


def test_e_gamma_values():
    U = np.array([[[1.0, 2.0], [3.0, 4.0]], [[8.0, 0.0], [0.0, 0.0]]])
    v = e_gamma((1, 0, 0, 0), U)
    assert abs(v[0]) == pytest.approx(1 / 280.0)
    assert v[0] == pytest.approx(np.exp(2j * np.pi / 14) / 280.0)
    assert v[1] == 0


def _closed_form_gram(m, mp, transposed):
    # product of int_a^b exp(2 pi i f t) dt over the four entries
    d = lattice_gamma(m, transposed=transposed) - lattice_gamma(mp, transposed=transposed)
    val = 1.0 + 0j
    for f, a, b in zip(d.T.reshape(-1), CUBE.lo, CUBE.hi):
        val *= (b - a) if f == 0 else (np.exp(2j * np.pi * f * b) - np.exp(2j * np.pi * f * a)) / (2j * np.pi * f)
    return val / CUBE.volume


@pytest.mark.parametrize("transposed", [False, True])
def test_gram_entry_matches_closed_form(rng, transposed):
    for _ in range(20):
        m, mp = rng.integers(-6, 7, 4), rng.integers(-6, 7, 4)
        mp[0], mp[3] = m[0], m[3]
        assert gram_entry(m, mp, transposed=transposed) == pytest.approx(
            _closed_form_gram(m, mp, transposed), abs=1e-12)


def test_orthonormality_and_transposed_failure():
    assert orthonormality_defect(50, seed=0) <= 1e-8
    assert orthonormality_defect(50, seed=0, transposed=True) > 1e-3


def test_widened_tile_fits_in_cube():
    assert r_containment(200_000, seed=0) == 0
    assert r_containment(20_000, seed=0, cube=CubeR(lo=(-5, -10, -5, -10), hi=(5, 10, 5, 10))) > 0


# signals and files ------------------------------------------------------------


def test_signal_roundtrip(tmp_path, sig):
    s = sig.like(sig.values * (1 + 1j) + 1e-300, flags=[3, 1])
    path = tmp_path / "sig.bin"
    s.save(path)
    back = SpectralSignal.load(path)
    assert back.values.tobytes() == s.values.tobytes()
    assert np.array_equal(back.mins, s.mins) and np.array_equal(back.maxs, s.maxs)
    assert back.counts == s.counts and back.flags == [1, 3]
    head = path.read_bytes().split(b"\n")[1]
    assert b"interleaved re,im float64 little-endian" in head


def test_signal_rejects_bad_files(tmp_path, sig):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nothing here")
    with pytest.raises(ValueError):
        SpectralSignal.load(bad)
    sig.save(bad)
    bad.write_bytes(bad.read_bytes()[:-16])
    with pytest.raises(ValueError):
        SpectralSignal.load(bad)
    with pytest.raises(ValueError):
        SpectralSignal([0] * 4, [1] * 4, (1, 2, 2, 2), np.zeros((1, 2, 2, 2)))


def test_signal_inner_product(sig):
    assert sig.inner(sig).real == pytest.approx(sig.norm() ** 2)


def test_coefficient_csv_roundtrip(tmp_path, sig, frame):
    t = support_tiles(sig, SMOOTH, frame=frame)[0]
    blk = frame.analysis(sig.values, t)
    path = tmp_path / "c.csv"
    rows = write_coefficients_csv(path, [blk], threshold=1e-6, comment="test")
    back = read_coefficients_csv(path)
    assert len(back) == rows > 0
    for lam, kap, mu, *m, c in back[:50]:
        assert (lam, kap, mu) == t.key()
        assert c == blk.values[tuple(np.array(m) - blk.m_start)]


# analysis and synthesis ------------------------------------------------------------


def test_zero_signal_has_zero_coefficients(sig, frame):
    t = support_tiles(sig, SMOOTH, frame=frame)[0]
    c = analysis_coefficients(sig.like(np.zeros(sig.counts)), t, SMOOTH, frame=frame)
    assert not np.any(c.values)


@pytest.mark.parametrize("seed", range(10))
def test_parseval_per_tile(seed):
    f = small_signal(seed)
    fr = Frame2D(f, SMOOTH)
    for t in support_tiles(f, SMOOTH, frame=fr):
        g = fr.window_on_grid(t)
        target = CUBE.volume * f.cell_volume * np.sum(np.abs(f.values) ** 2 * g ** 2)
        assert fr.analysis(f.values, t, window=g).energy() == pytest.approx(target, rel=1e-10)


def test_fft_coefficients_match_direct_sums(sig, frame, rng):
    for t in support_tiles(sig, SMOOTH, frame=frame)[:4]:
        blk = frame.analysis(sig.values, t)
        for _ in range(3):
            i = tuple(rng.integers(0, n) for n in blk.values.shape)
            m = np.array(blk.m_start) + i
            assert blk.values[i] == pytest.approx(direct_coefficient(sig, t, m, SMOOTH, frame=frame), abs=1e-12)
        # indices beyond one period are reached through gamma_range
        m = (40, -33, 7, 25)
        sub = analysis_coefficients(sig, t, SMOOTH, gamma_range=[(v, v) for v in m], frame=frame)
        assert sub.values.shape == (1, 1, 1, 1)
        assert sub.values[0, 0, 0, 0] == pytest.approx(direct_coefficient(sig, t, m, SMOOTH, frame=frame),
                                                       abs=1e-12)


def test_gamma_range_is_checked(sig, frame):
    t = support_tiles(sig, SMOOTH, frame=frame)[0]
    with pytest.raises(GridError):
        analysis_coefficients(sig, t, SMOOTH, gamma_range=[(0, 1000)] * 4, frame=frame)


def test_analysis_synthesis_adjoint(sig, frame, rng):
    for t in support_tiles(sig, SMOOTH, frame=frame)[:3]:
        x = rng.normal(size=sig.counts) + 1j * rng.normal(size=sig.counts)
        blk = frame.analysis(x, t)
        c = rng.normal(size=blk.values.shape) + 1j * rng.normal(size=blk.values.shape)
        lhs = np.vdot(c, blk.values)
        y = synthesize([TileCoefficients(t, blk.m_start, c)], sig, SMOOTH, frame=frame)
        rhs = sig.like(x).inner(y)
        assert abs(lhs - rhs) <= 1e-8 * abs(lhs)


def test_synthesis_of_analysis_is_multiplier(sig, frame):
    tiles = support_tiles(sig, SMOOTH, frame=frame)
    blocks = [frame.analysis(sig.values, t) for t in tiles]
    out = synthesize(blocks, sig, SMOOTH, frame=frame)
    np.testing.assert_allclose(out.values, frame.symbol(tiles) * sig.values, atol=1e-9 * np.abs(sig.values).max()
                               * CUBE.volume)


def test_zero_coefficients_synthesize_zero(sig, frame):
    t = support_tiles(sig, SMOOTH, frame=frame)[0]
    blk = frame.analysis(sig.values, t)
    out = synthesize([TileCoefficients(t, blk.m_start, np.zeros_like(blk.values))], sig, SMOOTH, frame=frame)
    assert not np.any(out.values)


def test_single_element_lives_on_its_tile(sig, frame):
    t = support_tiles(sig, SMOOTH, frame=frame)[0]
    blk = frame.analysis(sig.values, t)
    c = np.zeros_like(blk.values)
    c[1, 2, 0, 3] = 1.0
    out = frame.synthesize([TileCoefficients(t, blk.m_start, c)])
    g = frame.window_on_grid(t)
    assert np.all(out[g == 0] == 0)
    assert np.any(out[g > 0] != 0)


def test_coefficients_vanish_on_far_tiles(frame, sig):
    # f supported where one tile's window lives
    t0 = tile(-1, 0, 0)
    g0 = frame.window_on_grid(t0)
    f = sig.like(g0 * np.exp(1j * np.arange(g0.size).reshape(g0.shape)))
    pts = f.points().reshape(-1, 2, 2)[g0.reshape(-1) > 0]
    reach = set()
    for b in pts:
        reach.update(t.key() for t in pointwise_overlap(b, SMOOTH.epsilon, eta=0.0).tiles)
    for t in (tile(-1, 0, 3), tile(-1, 1, -4), tile(-2, 0, 0)):
        if t.key() in reach:
            continue
        try:
            c = frame.analysis(f.values, t)
        except GridError:
            continue
        assert not np.any(c.values)
    for key in reach:
        assert key in {x.key() for x in support_tiles(f, SMOOTH, frame=frame)}


def test_indicator_energy_matches_tile_volume():
    # Riemann sum of the indicator over its tile against the closed form:
    # Lebesgue volume of F p is |det p|^2 * 8 pi * int s^3 ds int w dw = |det p|^2 * 45 pi
    mins, maxs, counts = commensurate_grid((0, 0, 0, 0), count=40, Q=80)
    grid = SpectralSignal(mins, maxs, counts, np.zeros(counts))
    fr = Frame2D(grid, INDICATOR)
    g = fr.window_on_grid(tile(-1, 0, 0))
    assert g.sum() * grid.cell_volume == pytest.approx(45 * math.pi / 16, rel=0.05)


def test_grid_errors(sig, frame):
    with pytest.raises(GridError):
        frame.geometry(tile(-5, 0, 0))       # fewer than two samples per period
    with pytest.raises(GridError):
        frame.geometry(tile(3, 0, 0))        # too many coefficients
    mins, maxs, counts = sig.mins, sig.mins + 15 * 0.9, sig.counts
    odd = SpectralSignal(mins, maxs, counts, np.zeros(counts))
    with pytest.raises(GridError):
        Frame2D(odd, SMOOTH).geometry(tile(-1, 0, 0))


def test_boundary_grid_points_are_flagged():
    # the centre point of an odd grid around the identity sits on a face
    mins, maxs, counts = commensurate_grid((1, 0, 0, 1), count=15, Q=16, offset=(0, 0, 0, 0))
    grid = SpectralSignal(mins, maxs, counts, np.zeros(counts))
    fr = Frame2D(grid, INDICATOR)
    centre = np.ravel_multi_index((7, 7, 7, 7), counts)
    assert centre in fr.flags
    # after the nudge the point is inside exactly one closed tile
    tiles = fr.tiles_for(np.arange(np.prod(counts)) == centre)
    assert fr.symbol(tiles).reshape(-1)[centre] == CUBE.volume


# reconstruction ----------------------------------------------------------------


def test_reconstruct_zero_signal(sig):
    r = reconstruct_canonical(sig.like(np.zeros(sig.counts)), SMOOTH, full=True)
    assert not np.any(r.signal.values) and r.tiles == 0


def test_reconstruct_indicator_is_identity():
    f = small_signal(2, spec=INDICATOR)
    for full in (False, True):
        r = reconstruct_canonical(f, INDICATOR, full=full)
        assert r.rel_error <= 1e-12
        assert r.symbol_min == r.symbol_max == CUBE.volume


def test_reconstruct_smooth(sig, frame):
    fast = reconstruct_canonical(sig, SMOOTH, full=False, frame=frame)
    full = reconstruct_canonical(sig, SMOOTH, full=True, frame=frame)
    assert fast.rel_error <= 1e-10
    assert full.rel_error <= 1e-6
    assert CUBE.volume <= fast.symbol_min <= fast.symbol_max <= 33 * CUBE.volume


def test_symbol_below_lower_bound_fails():
    with pytest.raises(AssertionError):
        _check_symbol(np.array([78400.0, 70000.0]), np.array([0, 1]), 78400.0)


def test_symbol_matches_calderon_sums(sig, frame):
    tiles = support_tiles(sig, SMOOTH, frame=frame)
    sym = frame.symbol(tiles).reshape(-1)
    pts = sig.points().reshape(-1, 2, 2)
    for i in np.flatnonzero(sig.values.reshape(-1))[:40]:
        assert sym[i] == pytest.approx(frame_operator_symbol(pts[i], SMOOTH), rel=1e-12)


def test_symbol_examples(rng):
    b = np.array([[1.3, 0.2], [-0.4, 1.1]])
    assert frame_operator_symbol(b, INDICATOR) == CUBE.volume
    v = frame_operator_symbol(b, SMOOTH)
    assert CUBE.volume <= v <= 33 * CUBE.volume
    p = tile(1, -1, 0)
    assert frame_operator_symbol(b @ p.to_matrix(), SMOOTH) == pytest.approx(v, rel=1e-12)


def test_frame_algorithm_indicator_converges_in_one_step():
    f = small_signal(2, spec=INDICATOR)
    it = reconstruct_frame_algorithm(f, INDICATOR, 3)
    assert it.history[1] <= 1e-12


def test_frame_algorithm_rates(sig, frame):
    cons = reconstruct_frame_algorithm(sig, SMOOTH, 30, frame=frame)
    assert cons.bound_ratio == pytest.approx(32 / 34)
    assert max(cons.ratios) <= cons.bound_ratio + 1e-12
    tiles = support_tiles(sig, SMOOTH, frame=frame)
    sym = frame.symbol(tiles).reshape(-1)[sig.values.reshape(-1) != 0]
    emp = reconstruct_frame_algorithm(sig, SMOOTH, 30, A=sym.min(), B=sym.max(), frame=frame)
    assert max(emp.ratios) <= emp.bound_ratio + 1e-12
    assert emp.history[-1] < cons.history[-1]
    full = reconstruct_frame_algorithm(sig, SMOOTH, 3, operator="full", frame=frame)
    np.testing.assert_allclose(full.history, cons.history[:4], rtol=1e-8)


def test_frame_algorithm_errors(sig, frame):
    with pytest.raises(ValueError):
        reconstruct_frame_algorithm(sig, SMOOTH, 0, frame=frame)
    with pytest.raises(AssertionError):
        reconstruct_frame_algorithm(sig, SMOOTH, 5, A=CUBE.volume / 20, B=CUBE.volume / 20, frame=frame)


def test_frame_requires_matching_grid(sig):
    other = make_signal(1, count=16, Q=16)
    other = SpectralSignal(other.mins + 0.1, other.maxs + 0.1, other.counts, other.values)
    with pytest.raises(GridError):
        reconstruct_canonical(other, SMOOTH, frame=Frame2D(sig, SMOOTH))


def test_energy_radius():
    v = np.zeros((4, 4, 4, 4), dtype=complex)
    v[2, 2, 2, 2] = 1.0       # m = 0
    v[3, 2, 2, 2] = 1e-2      # radius 1, energy share 1e-4
    blk = TileCoefficients(tile(0, 0, 0), (-2, -2, -2, -2), v)
    assert blk.energy_radius(1e-6) == 1
    assert blk.energy_radius(1e-3) == 0


@pytest.mark.parametrize("kind", ["smooth", "indicator"])
def test_demo_report(tmp_path, kind):
    cfg = DemoConfig(count=16, Q=16, seed=3, kind=kind, iterations=10)
    rep = run_frame_demo(cfg, coeff_csv=tmp_path / "c.csv", history_csv=tmp_path / "h.csv")
    assert demo_failures(rep) == []
    hist = np.loadtxt(tmp_path / "h.csv", delimiter=",")
    assert hist.shape == (11, 3)
    assert rep["coefficients_written"] == len(read_coefficients_csv(tmp_path / "c.csv"))
    if kind == "indicator":
        assert rep["cond_emp"] == 1.0
        assert rep["frame_algorithm"]["iterations_to_1e-12"] == 1
    else:
        assert rep["cond_emp"] <= 33
