"""End-to-end acceptance criteria 1-8 at their stated sample sizes and tolerances.

Each test prints one ``PASS``/``FAIL`` line (also collected into the terminal
summary) and then asserts the same condition.
"""
import math
import time

import numpy as np
import pytest

from conftest import CRITERIA
from gltiling import BACKEND
from gltiling.calderon import frame_bound_scan
from gltiling.frame2d import CubeR, DemoConfig, demo_failures, orthonormality_defect, r_containment, run_frame_demo
from gltiling.group import CoordBox, haar_measure_mc, roundtrip_check
from gltiling.overlap import brute_force_overlap, hit_count_scan, overlap_scan, pointwise_overlap
from gltiling.tiling import TileBoundaryError, equivariance_check, sample_widened
from gltiling.window import WindowSpec, admissibility_integral

pytestmark = pytest.mark.acceptance

SEED = 20240601


def record(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
    CRITERIA[number] = line
    print(line)
    assert ok, line


def test_criterion_1_iwasawa_roundtrip():
    t = time.perf_counter()
    reps = [roundtrip_check(n, 10_000, SEED + n) for n in (2, 3, 4)]
    dt = time.perf_counter() - t
    rel = max(r.max_rel_error for r in reps)
    orth = max(r.max_orth_defect for r in reps)
    ok = rel <= 1e-10 and orth <= 1e-10 and all(r.passed(1e-10) for r in reps) and dt < 10
    record(1, "Iwasawa round-trip, 1e4 per n in {2,3,4}", ok,
           f"rel {rel:.2e}, orth {orth:.2e}, {dt:.1f} s")


def test_criterion_2_tiling_equivariance():
    t = time.perf_counter()
    r2 = equivariance_check(2, 100_000, SEED)
    r3 = equivariance_check(3, 10_000, SEED + 1)
    dt = time.perf_counter() - t
    ok = r2.failures == 0 and r3.failures == 0 and dt < 60
    record(2, "known-tile recovery, 1e5 (n=2) + 1e4 (n=3)", ok,
           f"failures {r2.failures}+{r3.failures}, coord error {max(r2.max_coord_error, r3.max_coord_error):.2e}, "
           f"boundary {r2.boundary}+{r3.boundary}, {dt:.1f} s")


def _brute_force_agreement(count, eps, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    compared = mismatches = 0
    for b in sample_widened(2, rng, count):
        try:
            got = sorted(t.key() for t in pointwise_overlap(b, eps).tiles)
        except TileBoundaryError:
            continue
        ref = brute_force_overlap(b, eps)
        if ref is None:
            continue
        compared += 1
        mismatches += got != ref
    return compared, mismatches


def test_criterion_3_overlap_bounds():
    t = time.perf_counter()
    a = overlap_scan(2, 0.2, 100_000, SEED)
    b = overlap_scan(2, 0.3, 100_000, SEED + 1)
    c = overlap_scan(3, 0.2, 100_000, SEED + 2)
    compared, mismatches = _brute_force_agreement(1000, 0.2, SEED + 3)
    dt = time.perf_counter() - t
    ok = (1 <= a.min_count and a.max_count <= 33 and 1 <= b.min_count and b.max_count <= 36
          and 1 <= c.min_count and c.max_count <= 5832 and compared >= 990 and mismatches == 0 and dt < 300)
    record(3, "overlap counts n=2 eps .2/.3 and n=3 eps .2, brute force on 1e3", ok,
           f"max {a.max_count}/33, {b.max_count}/36, {c.max_count}/5832; min {a.min_count},{b.min_count},"
           f"{c.min_count}; brute force {mismatches} mismatches in {compared}, {dt:.1f} s")


def test_criterion_4_interval_hit_counter():
    h = hit_count_scan(100_000, SEED)
    ok = h.max_count <= 6 and h.attained_max > 0 and h.max_count == 6 and h.mismatches == 0
    record(4, "interval hit counter, 1e5 random alpha, L=4", ok,
           f"max {h.max_count}, attained {h.attained_max} times, {h.mismatches} mismatches")


def test_criterion_5_indicator_is_tight():
    devs = []
    for n in (2, 3):
        r = frame_bound_scan(n, WindowSpec("indicator", 0.2), 100_000, SEED + n)
        devs.append((r.evaluated, max(abs(r.min_sum - 1), abs(r.max_sum - 1))))
    ok = all(d <= 1e-12 and e >= 99_000 for e, d in devs)
    record(5, "indicator Calderon sum = 1, n in {2,3}", ok,
           "; ".join(f"n={n}: {e} points, deviation {d:.1e}" for n, (e, d) in zip((2, 3), devs)))


def test_criterion_6_frame_bound_sandwich():
    r = frame_bound_scan(2, WindowSpec("smooth", 0.2), 100_000, SEED)
    ok = r.min_sum >= 1 - 1e-12 and r.max_sum <= 33 and r.cond <= 33 and r.M_bound == 33 and not r.violations
    record(6, "smooth window sums in [1, 33], n=2, eps=0.2", ok,
           f"sums [{r.min_sum:.6f}, {r.max_sum:.6f}], empirical cond {r.cond:.3f} <= {r.M_bound}")


def test_criterion_7_haar_volume():
    exact = 1.5 * math.log(2.0)
    est, err = haar_measure_mc(CoordBox.fundamental(2), 1_000_000, SEED)
    quad, _ = admissibility_integral(WindowSpec("indicator", 0.2), 2)
    ok = abs(est - exact) <= 3 * err and abs(quad - exact) <= 1e-8
    record(7, "Haar volume of F (n=2) = 1.5 ln 2", ok,
           f"MC {est:.6f} +- {err:.1e} ({abs(est - exact) / err:.2f} se), quadrature error {abs(quad - exact):.1e}")


def test_criterion_8_frame_demo():
    t = time.perf_counter()
    cube = CubeR()
    outside = r_containment(1_000_000, SEED)
    defect = orthonormality_defect(50, SEED)
    rep = run_frame_demo(DemoConfig(seed=SEED % 1000))
    dt = time.perf_counter() - t
    cons = rep["frame_algorithm"]["conservative"]
    bad = demo_failures(rep)
    ok = (cube.volume == 78400.0 and outside == 0 and defect <= 1e-8 and rep["parseval_max_rel"] <= 1e-6
          and rep["fast_rel_error"] <= 1e-10 and rep["full_rel_error"] <= 1e-6
          and cons["max_ratio"] <= cons["bound_ratio"] + 1e-12 and cons["bound_ratio"] == pytest.approx(32 / 34)
          and not bad and dt < 300)
    record(8, f"n=2 frame demo at grid {'x'.join(map(str, rep['grid']['counts']))}", ok,
           f"|R| {cube.volume:g}, outside {outside}, gram {defect:.1e}, parseval {rep['parseval_max_rel']:.1e}, "
           f"fast {rep['fast_rel_error']:.1e}, full {rep['full_rel_error']:.1e}, "
           f"ratio {cons['max_ratio']:.4f} <= {cons['bound_ratio']:.4f}, {dt:.0f} s ({BACKEND})")
