"""Command-line interface.

Exit codes: 0 when every check passes, 1 when a check fails (the failing
samples are written to the report), 2 for usage or configuration errors.

Settings are resolved as built-in defaults, then the ``--config`` JSON file,
then explicit flags.  Reports are JSON with sorted keys and embed the resolved
settings; wall-clock timings go to a separate ``<report>.timings.json`` so
that reports are byte-identical across runs and worker counts.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from ._parallel import default_workers
from .calderon import DEFAULT_R_VOLUME, frame_bound_scan
from .frame2d import (CubeR, DemoConfig, GridError, demo_failures, orthonormality_defect, r_containment,
                      run_frame_demo)
from .group import CoordBox, SingularMatrixError, haar_measure_mc, iwasawa_decompose, roundtrip_check
from .overlap import brute_force_overlap, hit_count_scan, overlap_scan, pointwise_overlap
from .spectral import SpectralSignal
from .tiling import (DEFAULT_ETA, TileBoundaryError, TileRangeError, coverage_check, equivariance_check,
                     tile_assign, tile_point)
from .window import WindowSpec, admissibility_integral
from . import _codes
from ._backend import kernels

OUTPUT_ENV = "GLTILING_OUTPUT_DIR"
SUITES = ("tiling", "overlap", "calderon", "frame2d")

# Settings that do not change results and are left out of reports.
UNREPORTED = ("workers", "output_dir", "config")

COMMON = {"seed": 0, "eta": DEFAULT_ETA, "workers": None, "output_dir": None}
DEFAULTS = {
    "assign": {"n": 2, "input": None, "output": None, "entries": []},
    "overlap-scan": {"n": 2, "eps": 0.2, "samples": 100_000, "bruteforce": 0, "csv": None},
    "calderon-scan": {"n": 2, "eps": 0.2, "window": "smooth", "samples": 100_000,
                      "r_volume": DEFAULT_R_VOLUME, "csv": None},
    "admissibility": {"n": 2, "eps": 0.2, "window": "smooth", "method": "both",
                      "samples": 1_000_000, "order": 64},
    "verify": {"suite": "all", "n": None, "eps": 0.2, "samples": None, "bruteforce": 1000,
               "hits": 100_000, "haar_samples": 1_000_000, "containment": 1_000_000,
               "gram_pairs": 50, "grid": "32", "bumps": 2, "iterations": 40},
    "frame-demo": {"grid": None, "signal": None, "window": "smooth", "eps": 0.2, "bumps": 2,
                   "iterations": 40, "full": True, "coefficients": None, "threshold": 1e-8,
                   "history": None, "save_signal": None},
}


class ConfigError(Exception):
    """Invalid settings (exit code 2)."""


# ---------------------------------------------------------------------------
# settings


def _resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(COMMON)
    cfg.update(DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["output_dir"] is None:
        cfg["output_dir"] = os.environ.get(OUTPUT_ENV, ".")
    if cfg["workers"] is None:
        cfg["workers"] = default_workers()
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    seed = cfg.get("seed")
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an integer in [0, 2**64)")
    if "eps" in cfg and not (isinstance(cfg["eps"], (int, float)) and 0.0 < cfg["eps"] <= 0.5):
        raise ConfigError("eps must lie in (0, 1/2]")
    n = cfg.get("n")
    if n is not None and not (isinstance(n, int) and 2 <= n <= _codes.NMAX):
        raise ConfigError(f"n must be an integer in [2, {_codes.NMAX}]")
    for key in ("samples", "bruteforce", "hits", "haar_samples", "containment", "gram_pairs"):
        v = cfg.get(key)
        if v is not None and not (isinstance(v, int) and v >= 0):
            raise ConfigError(f"{key} must be a non-negative integer")
    if cfg.get("window") is not None and cfg["window"] not in ("smooth", "indicator"):
        raise ConfigError("window must be 'smooth' or 'indicator'")
    if not (isinstance(cfg["eta"], (int, float)) and 0.0 < cfg["eta"] < 1e-3):
        raise ConfigError("eta must lie in (0, 1e-3)")
    if not (isinstance(cfg["workers"], int) and cfg["workers"] >= 1):
        raise ConfigError("workers must be a positive integer")


def _parse_grid(text) -> tuple:
    """``COUNT`` or ``COUNT:Q`` (points per axis and periods subdivision)."""
    try:
        parts = [int(v) for v in str(text).split(":")]
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {text!r}; expected COUNT or COUNT:Q") from exc
    if len(parts) == 1:
        parts.append(parts[0])
    if len(parts) != 2 or min(parts) < 2:
        raise ConfigError(f"bad grid spec {text!r}; expected COUNT or COUNT:Q with values >= 2")
    return parts[0], parts[1]


def _spec(cfg) -> WindowSpec:
    return WindowSpec(cfg["window"], float(cfg["eps"]))


# ---------------------------------------------------------------------------
# output


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _write_report(name: str, cfg: dict, result: dict, passed: bool, elapsed: dict) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    report = {"command": name, "version": __version__, "config": {k: v for k, v in cfg.items() if k not in UNREPORTED},
              "passed": bool(passed), "result": result}
    path = out / f"{name}.json"
    path.write_text(_dump(report))
    timings = {"backend": BACKEND, "workers": cfg["workers"], "seconds": elapsed}
    (out / f"{name}.json.timings.json").write_text(_dump(timings))
    return path


def _finish(name, cfg, result, passed, elapsed) -> int:
    path = _write_report(name, cfg, result, passed, elapsed)
    print(f"{name}: {'PASS' if passed else 'FAIL'} (report: {path})")
    return 0 if passed else 1


class _Clock:
    def __init__(self):
        self.laps = {}

    def run(self, label, fn, *a, **kw):
        t = time.perf_counter()
        out = fn(*a, **kw)
        self.laps[label] = round(time.perf_counter() - t, 6)
        return out


# ---------------------------------------------------------------------------
# commands


def _matrix(entries) -> np.ndarray:
    k = len(entries)
    n = math.isqrt(k)
    if n * n != k or n not in (2, 3, 4):
        raise ConfigError("expected 4, 9 or 16 matrix entries")
    return np.asarray(entries, dtype=float).reshape(n, n)


def cmd_decompose(args) -> int:
    a = _matrix(args.entries)
    try:
        f = iwasawa_decompose(a)
    except SingularMatrixError as exc:
        raise ConfigError(f"singular matrix: {exc}") from exc
    n = a.shape[0]
    try:
        index, coords = tile_assign(a, tol=max(args.eta, 1e-12))
    except TileRangeError as exc:
        raise ConfigError(str(exc)) from exc
    rec = tile_point(index, coords).entries
    iu = np.triu_indices(n, 1)
    out = {
        "n": n,
        "factors": {"s": f.s, "k": (f.k + 0.0).tolist(), "w": f.w.tolist(), "y": (f.y + 0.0).tolist()},
        "tile": {"lam": index.lam, "kappa": list(index.kappa), "mu": index.mu[iu].astype(int).tolist()},
        "coords": {"s": coords.s, "w": np.asarray(coords.w).tolist(), "y": coords.y[iu].tolist()},
        "boundary": coords.boundary,
        "residual": float(np.abs(rec - a).max() / np.abs(a).max()),
    }
    sys.stdout.write(_dump(out))
    return 0


def _read_matrices(path, n):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.replace(",", " ").split()]
            if len(vals) != n * n:
                raise ConfigError(f"expected {n * n} entries per row, got {len(vals)}")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, n, n)


def cmd_assign(args) -> int:
    cfg = _resolve("assign", args)
    n = cfg["n"]
    if cfg["input"]:
        A = _read_matrices(cfg["input"], n)
    elif cfg["entries"]:
        A = _matrix(cfg["entries"])[None]
        n = A.shape[1]
    else:
        raise ConfigError("give matrix entries or --input FILE")
    lam, kap, mu, sc, wc, yc, K, status = kernels.assign_batch(A, max(cfg["eta"], 1e-12), 512)
    iu = np.triu_indices(n, 1)
    head = ([f"a{i + 1}{j + 1}" for i in range(n) for j in range(n)] + ["lam"]
            + [f"kappa{i + 1}" for i in range(n - 1)] + [f"mu{i + 1}{j + 1}" for i, j in zip(*iu)] + ["status"])
    lines = ["# " + ",".join(head)]
    for t in range(len(A)):
        vals = [repr(float(v)) for v in A[t].reshape(-1)] + [str(int(lam[t]))]
        vals += [str(int(v)) for v in kap[t, :n - 1]] + [str(int(v)) for v in mu[t][iu]]
        vals.append(_codes.STATUS_NAMES[int(status[t])])
        lines.append(",".join(vals))
    text = "\n".join(lines) + "\n"
    if cfg["output"]:
        Path(cfg["output"]).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _brute_check(n, eps, count, seed, eta):
    """Compare the enumeration with the exhaustive search at ``count`` points."""
    if n != 2 or count == 0:
        return {"points": 0, "compared": 0, "mismatches": 0, "failing": []}
    from .tiling import sample_widened
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
    B = sample_widened(2, rng, count)
    compared = 0
    failing = []
    for b in B:
        try:
            rep = pointwise_overlap(b, eps, eta)
        except TileBoundaryError:
            continue
        ref = brute_force_overlap(b, eps, eta)
        if ref is None:
            continue
        compared += 1
        got = sorted(t.key() for t in rep.tiles)
        if got != ref:
            failing.append({"b": b.tolist(), "enumerated": got, "exhaustive": ref})
    return {"points": count, "compared": compared, "mismatches": len(failing), "failing": failing[:5]}


def cmd_overlap_scan(args) -> int:
    cfg = _resolve("overlap-scan", args)
    clock = _Clock()
    summary = clock.run("scan", overlap_scan, cfg["n"], cfg["eps"], cfg["samples"], cfg["seed"],
                        cfg["eta"], workers=cfg["workers"])
    brute = clock.run("bruteforce", _brute_check, cfg["n"], cfg["eps"], cfg["bruteforce"], cfg["seed"], cfg["eta"])
    if cfg["csv"]:
        with open(cfg["csv"], "w") as fh:
            fh.write("# overlap_count,frequency\n")
            for k, v in sorted(summary.histogram.items()):
                fh.write(f"{k},{v}\n")
    result = {"scan": summary.to_dict(), "bruteforce": brute}
    return _finish("overlap-scan", cfg, result, summary.passed and brute["mismatches"] == 0, clock.laps)


def cmd_calderon_scan(args) -> int:
    cfg = _resolve("calderon-scan", args)
    if cfg["samples"] < 1:
        raise ConfigError("samples must be positive")
    if not cfg["r_volume"] > 0:
        raise ConfigError("r_volume must be positive")
    clock = _Clock()
    fh = open(cfg["csv"], "w") if cfg["csv"] else None
    try:
        rep = clock.run("scan", frame_bound_scan, cfg["n"], _spec(cfg), cfg["samples"], cfg["seed"],
                        cfg["r_volume"], cfg["eta"], workers=cfg["workers"], rows_out=fh)
    finally:
        if fh:
            fh.close()
    return _finish("calderon-scan", cfg, rep.to_dict(), rep.passed, clock.laps)


def _admissibility(cfg) -> dict:
    spec = _spec(cfg)
    out = {}
    if cfg["method"] in ("both", "coords-quadrature"):
        v, e = admissibility_integral(spec, cfg["n"], "coords-quadrature", order=cfg["order"])
        out["coords_quadrature"] = {"value": v, "error": e}
    if cfg["method"] in ("both", "entry-mc"):
        if cfg["n"] != 2:
            raise ConfigError("entry-mc is available for n = 2 only")
        v, e = admissibility_integral(spec, 2, "entry-mc", N=cfg["samples"], seed=cfg["seed"])
        out["entry_mc"] = {"value": v, "stderr": e}
    if len(out) == 2:
        q, m = out["coords_quadrature"]["value"], out["entry_mc"]
        out["entry_to_coords_ratio"] = {"value": m["value"] / q, "stderr": m["stderr"] / q}
    return out


def cmd_admissibility(args) -> int:
    cfg = _resolve("admissibility", args)
    if cfg["method"] not in ("both", "coords-quadrature", "entry-mc"):
        raise ConfigError("method must be coords-quadrature, entry-mc or both")
    if cfg["method"] != "coords-quadrature" and cfg["samples"] < 1:
        raise ConfigError("samples must be positive")
    clock = _Clock()
    result = clock.run("integrals", _admissibility, cfg)
    return _finish("admissibility", cfg, result, True, clock.laps)


# verify suites ----------------------------------------------------------------


def _suite_tiling(cfg, clock):
    n = cfg["n"] or 2
    N = cfg["samples"] if cfg["samples"] is not None else (100_000 if n == 2 else 10_000)
    rt = clock.run("roundtrip", roundtrip_check, n, min(N, 10_000), cfg["seed"])
    eq = clock.run("equivariance", equivariance_check, n, N, cfg["seed"], workers=cfg["workers"])
    cov = clock.run("coverage", coverage_check, n, N, cfg["seed"] + 1, cfg["eta"], workers=cfg["workers"])
    res = {"n": n, "roundtrip": dict(rt.__dict__, passed=rt.passed()),
           "equivariance": dict(eq.__dict__, passed=eq.passed),
           "coverage": dict(cov.__dict__, passed=cov.passed)}
    ok = rt.passed() and eq.passed and cov.passed
    if n == 2 and cfg["haar_samples"]:
        est, err = clock.run("haar", haar_measure_mc, CoordBox.fundamental(2), cfg["haar_samples"],
                             cfg["seed"], cfg["workers"])
        exact = 1.5 * math.log(2.0)
        res["haar_volume"] = {"estimate": est, "stderr": err, "closed_form": exact,
                              "within_3_stderr": abs(est - exact) <= 3 * err}
        ok = ok and res["haar_volume"]["within_3_stderr"]
    return res, ok


def _suite_overlap(cfg, clock):
    n = cfg["n"] or 2
    N = cfg["samples"] if cfg["samples"] is not None else 100_000
    summary = clock.run("scan", overlap_scan, n, cfg["eps"], N, cfg["seed"], cfg["eta"], workers=cfg["workers"])
    brute = clock.run("bruteforce", _brute_check, n, cfg["eps"], cfg["bruteforce"], cfg["seed"], cfg["eta"])
    hits = clock.run("hit_count", hit_count_scan, cfg["hits"], cfg["seed"]) if cfg["hits"] else None
    res = {"n": n, "scan": summary.to_dict(), "bruteforce": brute, "hit_count": hits.to_dict() if hits else None}
    ok = summary.passed and summary.evaluated > 0 and brute["mismatches"] == 0
    if hits:
        ok = ok and hits.passed and hits.attained_max > 0
    return res, ok


def _suite_calderon(cfg, clock):
    n = cfg["n"] or 2
    N = cfg["samples"] if cfg["samples"] is not None else 100_000
    smooth = clock.run("smooth", frame_bound_scan, n, WindowSpec("smooth", cfg["eps"]), N, cfg["seed"],
                       DEFAULT_R_VOLUME, cfg["eta"], workers=cfg["workers"])
    tight = clock.run("indicator", frame_bound_scan, n, WindowSpec("indicator", cfg["eps"]), N, cfg["seed"],
                      DEFAULT_R_VOLUME, cfg["eta"], workers=cfg["workers"])
    dev = max(abs(tight.min_sum - 1.0), abs(tight.max_sum - 1.0))
    quad, qerr = admissibility_integral(WindowSpec("indicator", cfg["eps"]), n)
    exact = {2: 1.5 * math.log(2.0), 3: 45.0 / 8.0 * math.log(2.0)}.get(n)
    res = {"n": n, "smooth": smooth.to_dict(), "indicator": dict(tight.to_dict(), max_deviation_from_1=dev),
           "indicator_admissibility": {"quadrature": quad, "closed_form": exact,
                                       "abs_error": abs(quad - exact) if exact else None}}
    ok = smooth.passed and dev <= 1e-12 and (exact is None or abs(quad - exact) <= 1e-8)
    return res, ok


def _suite_frame2d(cfg, clock):
    count, Q = _parse_grid(cfg["grid"])
    cube = CubeR()
    out_r = clock.run("containment", r_containment, cfg["containment"], cfg["seed"], 0.5, cube)
    g = clock.run("orthonormality", orthonormality_defect, cfg["gram_pairs"], cfg["seed"])
    gt = clock.run("orthonormality_transposed", orthonormality_defect, cfg["gram_pairs"], cfg["seed"], True)
    demo_cfg = DemoConfig(count=count, Q=Q, seed=cfg["seed"], bumps=cfg["bumps"], kind="smooth",
                          epsilon=cfg["eps"], iterations=cfg["iterations"])
    demo = clock.run("demo", run_frame_demo, demo_cfg)
    bad = demo_failures(demo)
    res = {"R_volume": cube.volume, "containment_outside": out_r, "containment_samples": cfg["containment"],
           "orthonormality_defect": g, "transposed_orthonormality_defect": gt, "demo": demo,
           "demo_failures": bad}
    ok = cube.volume == 78400.0 and out_r == 0 and g <= 1e-8 and gt > 1e-8 and not bad
    return res, ok


SUITE_FUNCS = {"tiling": _suite_tiling, "overlap": _suite_overlap, "calderon": _suite_calderon,
               "frame2d": _suite_frame2d}


def cmd_verify(args) -> int:
    cfg = _resolve("verify", args)
    suites = SUITES if cfg["suite"] == "all" else (cfg["suite"],)
    _parse_grid(cfg["grid"])
    clock = _Clock()
    result = {}
    ok = True
    for s in suites:
        sub = _Clock()
        res, passed = SUITE_FUNCS[s](cfg, sub)
        result[s] = dict(res, passed=passed)
        clock.laps[s] = sub.laps
        ok = ok and passed
        print(f"  {s}: {'pass' if passed else 'FAIL'}")
    return _finish(f"verify-{cfg['suite']}", cfg, result, ok, clock.laps)


def cmd_frame_demo(args) -> int:
    cfg = _resolve("frame-demo", args)
    if cfg["grid"] is None and cfg["signal"] is None:
        raise ConfigError("frame-demo needs --grid COUNT[:Q] (or --signal FILE)")
    signal = None
    if cfg["signal"]:
        try:
            signal = SpectralSignal.load(cfg["signal"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load signal: {exc}") from exc
        count, Q = signal.counts[0], signal.counts[0]
    else:
        count, Q = _parse_grid(cfg["grid"])
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    history = cfg["history"] or str(out / "frame-demo-history.csv")
    demo_cfg = DemoConfig(count=count, Q=Q, seed=cfg["seed"], bumps=cfg["bumps"], kind=cfg["window"],
                          epsilon=cfg["eps"], iterations=cfg["iterations"], full=cfg["full"],
                          coeff_threshold=cfg["threshold"])
    clock = _Clock()
    try:
        report = clock.run("demo", run_frame_demo, demo_cfg, signal, cfg["coefficients"], history)
    except (GridError, TileRangeError) as exc:
        raise ConfigError(f"grid cannot resolve the signal: {exc}") from exc
    if cfg["save_signal"]:
        from .frame2d import test_signal
        (signal or test_signal(cfg["seed"], count, Q, cfg["bumps"], spec=demo_cfg.window())).save(cfg["save_signal"])
    bad = demo_failures(report)
    report["failures"] = bad
    return _finish("frame-demo", cfg, report, not bad, clock.laps)


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--config", help="JSON file with settings (flags override it)")
    g.add_argument("--seed", type=int, help="64-bit seed (default 0)")
    g.add_argument("--eta", type=float, help=f"boundary tolerance (default {DEFAULT_ETA:g})")
    g.add_argument("--workers", type=int, help="worker processes (default: all CPUs); results do not depend on it")
    g.add_argument("--output-dir", dest="output_dir",
                   help=f"directory for reports (default ${OUTPUT_ENV} or the current directory)")


def _window_args(p, default_kind="smooth"):
    p.add_argument("--eps", type=float, help="transition width in (0, 1/2] (default 0.2)")
    p.add_argument("--window", choices=("smooth", "indicator"), help=f"window kind (default {default_kind})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gltiling", description="Tiling-system wavelet frames on GL_n.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="Iwasawa factors and tile of one matrix")
    p.add_argument("entries", nargs="+", type=float, help="4, 9 or 16 entries, row-major")
    p.add_argument("--eta", type=float, default=DEFAULT_ETA, help=f"boundary tolerance (default {DEFAULT_ETA:g})")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("assign", help="tile indices for matrices from the command line or a file")
    p.add_argument("entries", nargs="*", type=float, help="entries of one matrix, row-major")
    p.add_argument("--n", type=int, help="matrix size for --input (default 2)")
    p.add_argument("--input", help="whitespace or comma separated rows of n*n entries")
    p.add_argument("--output", help="write the table here instead of stdout")
    _common(p)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("overlap-scan", help="histogram of pointwise overlap counts")
    p.add_argument("--n", type=int, help="matrix size (default 2)")
    p.add_argument("--eps", type=float, help="widening in (0, 1/2] (default 0.2)")
    p.add_argument("--samples", type=int, help="sample count (default 100000)")
    p.add_argument("--bruteforce", type=int, help="points to cross-check by exhaustive search, n=2 (default 0)")
    p.add_argument("--csv", help="write the histogram as CSV")
    _common(p)
    p.set_defaults(func=cmd_overlap_scan)

    p = sub.add_parser("calderon-scan", help="sampled Calderon sums and frame bounds")
    p.add_argument("--n", type=int, help="matrix size (default 2)")
    _window_args(p)
    p.add_argument("--samples", type=int, help="sample count (default 100000)")
    p.add_argument("--r-volume", dest="r_volume", type=float, help="cube volume |R| (default 78400)")
    p.add_argument("--csv", help="write one row per sample (entries, sum)")
    _common(p)
    p.set_defaults(func=cmd_calderon_scan)

    p = sub.add_parser("admissibility", help="integral of the squared window against Haar measure")
    p.add_argument("--n", type=int, help="matrix size (default 2)")
    _window_args(p)
    p.add_argument("--method", choices=("coords-quadrature", "entry-mc", "both"), help="default both")
    p.add_argument("--samples", type=int, help="Monte-Carlo samples (default 1000000)")
    p.add_argument("--order", type=int, help="Gauss-Legendre nodes per panel (default 64)")
    _common(p)
    p.set_defaults(func=cmd_admissibility)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.add_argument("--n", type=int, help="matrix size (default 2)")
    p.add_argument("--eps", type=float, help="widening in (0, 1/2] (default 0.2)")
    p.add_argument("--samples", type=int, help="samples per scan (default 100000; 10000 for tiling with n>2)")
    p.add_argument("--bruteforce", type=int, help="exhaustive cross-check points (default 1000)")
    p.add_argument("--hits", type=int, help="interval counter trials (default 100000)")
    p.add_argument("--haar-samples", dest="haar_samples", type=int, help="Haar volume samples (default 1000000)")
    p.add_argument("--containment", type=int, help="cube containment samples (default 1000000)")
    p.add_argument("--gram-pairs", dest="gram_pairs", type=int, help="orthonormality pairs (default 50)")
    p.add_argument("--grid", help="frame demo grid COUNT[:Q] (default 32)")
    p.add_argument("--bumps", type=int, help="bumps in the demo signal (default 2)")
    p.add_argument("--iterations", type=int, help="frame algorithm iterations (default 40)")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("frame-demo", help="n=2 frame: analysis, synthesis and reconstruction")
    p.add_argument("--grid", help="COUNT[:Q]: COUNT points per axis, spacing = cube side / Q (required)")
    p.add_argument("--signal", help="load the signal from a file instead of generating one")
    _window_args(p)
    p.add_argument("--bumps", type=int, help="bumps in the generated signal (default 2)")
    p.add_argument("--iterations", type=int, help="frame algorithm iterations (default 40)")
    p.add_argument("--fast-only", dest="full", action="store_const", const=False,
                   help="skip the analysis/synthesis reconstruction")
    p.add_argument("--coefficients", help="write coefficients above --threshold as CSV")
    p.add_argument("--threshold", type=float, help="coefficient dump threshold (default 1e-8)")
    p.add_argument("--history", help="error history CSV (default <output-dir>/frame-demo-history.csv)")
    p.add_argument("--save-signal", dest="save_signal", help="write the input signal to this file")
    _common(p)
    p.set_defaults(func=cmd_frame_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"gltiling {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"gltiling {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
