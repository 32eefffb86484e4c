"""End-to-end acceptance checks at desk scale.

Each test prints a single ``PASS``/``FAIL`` line (also repeated in the
terminal summary) and then asserts. Thresholds are fixed; when a check fails
the line says by how much.
"""

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from deltauq.experiments import run_experiment
from deltauq.functions import get_benchmark
from deltauq.smo import SmoConfig, run_smo

SEEDS = range(5)
ROOT = Path(__file__).resolve().parent


def report(log, capsys, ok, label, detail, seconds):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}  [{seconds:.1f} s]"
    log(line)
    with capsys.disabled():
        print("\n" + line)


def test_1_encoding_ablation(acceptance_log, capsys):
    t0 = time.perf_counter()
    runs = [run_experiment("encoding-ablation", s, {}).metrics for s in SEEDS]
    secs = time.perf_counter() - t0

    def mean(key):
        return float(np.nanmean([m[key] for m in runs]))

    parts, ok = [], secs <= 120
    for fn, gap in (("griewank2d", 0.15), ("ackley2d", 0.10)):
        d_rho = mean(f"{fn}/single/spearman") - mean(f"{fn}/identity/spearman")
        d_r2 = mean(f"{fn}/single/r2") - mean(f"{fn}/identity/r2")
        ok &= d_rho >= gap and abs(d_r2) <= 0.05
        parts.append(f"{fn} spearman gain {d_rho:+.3f} (need >= {gap}), "
                     f"r2 gap {d_r2:+.3f} (need |.| <= 0.05)")
    report(acceptance_log, capsys, ok, "1 encoding ablation", "; ".join(parts), secs)
    assert ok


SMO_TARGETS = [
    ("sinusoid", 50, 7.5),
    ("multi_optima", 50, 0.80),
    ("booth", 20, -0.30),
    ("levi_n13", 50, -0.40),
    ("ackley", 50, -0.5),
]


def test_2_sequential_optimization(acceptance_log, capsys):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, iters, need in SMO_TARGETS:
        bests = [run_smo(SmoConfig(objective=name, n_iterations=iters, seed=s)).best
                 for s in SEEDS]
        m = float(np.mean(bests))
        ok &= m >= need
        parts.append(f"{name} {m:.3f} (need >= {need})")
    secs = time.perf_counter() - t0
    ok &= secs <= 15 * 60
    report(acceptance_log, capsys, ok, "2 sequential optimization", "; ".join(parts), secs)
    assert ok


GRID_MAXIMA = [
    ("multi_optima", 0.951, 0.01),
    ("sinusoid", 7.622, 0.01),
    ("booth", 0.0, 1e-6),
    ("levi_n13", 0.0, 1e-6),
    ("ackley", 0.0, 1e-6),
]


def _grid_max(fn):
    # n evenly spaced points per axis starting at the lower bound, step (hi - lo) / n
    n = 10_000 if fn.dim == 1 else 500
    axes = [lo + (hi - lo) * np.arange(n) / n for lo, hi in zip(fn.lower, fn.upper)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, fn.dim)
    return float(np.max(fn.objective(pts)))


def test_3_benchmark_maxima(acceptance_log, capsys):
    t0 = time.perf_counter()
    parts, ok = [], True
    for name, want, tol in GRID_MAXIMA:
        got = _grid_max(get_benchmark(name))
        ok &= abs(got - want) <= tol
        parts.append(f"{name} {got:.6g} (want {want} +/- {tol:g})")
    report(acceptance_log, capsys, ok, "3 benchmark maxima", "; ".join(parts),
           time.perf_counter() - t0)
    assert ok


def test_4_model_based_optimization(acceptance_log, capsys):
    t0 = time.perf_counter()
    runs = [run_experiment("mbo", s, {}).metrics for s in SEEDS]
    secs = time.perf_counter() - t0
    d = 16

    def err(target, method):
        return [m[f"target={target:g}/{method}/abs_error"] for m in runs]

    inside = 0.4 * d
    worst_inside = max(max(err(inside, "weighted")), max(err(inside, "vanilla")))
    extra = [0.7 * d, 0.8 * d]
    w = float(np.mean([e for t in extra for e in err(t, "weighted")]))
    v = float(np.mean([e for t in extra for e in err(t, "vanilla")]))
    ok = worst_inside <= 0.05 * inside and w <= v and secs <= 10 * 60
    detail = (f"in-range worst |error| {worst_inside:.3f} (need <= {0.05 * inside:.2f}); "
              f"extrapolated mean |error| weighted {w:.4f} vs vanilla {v:.4f} (need <=)")
    report(acceptance_log, capsys, ok, "4 model-based optimization", detail, secs)
    assert ok


def test_5_ood_detection(acceptance_log, capsys):
    t0 = time.perf_counter()
    runs = [run_experiment("ood", s, {}).metrics for s in SEEDS]
    secs = time.perf_counter() - t0
    single = np.array([m["single/auroc_scaled"] for m in runs])
    ident = np.array([m["identity/auroc_scaled"] for m in runs])
    wins = int(np.sum(single >= ident))
    ok = bool(np.all(single >= 0.85)) and wins >= 4
    detail = (f"scaled-entropy AUROC per seed {np.round(single, 3).tolist()} (need >= 0.85); "
              f"beats identity in {wins}/5 seeds (need >= 4)")
    report(acceptance_log, capsys, ok, "5 OOD detection", detail, secs)
    assert ok


def test_6_calibration_under_shift(acceptance_log, capsys):
    t0 = time.perf_counter()
    runs = [run_experiment("calibration-shift", s, {}).metrics for s in SEEDS]
    secs = time.perf_counter() - t0
    parts, ok = [], True
    for i in (3, 4, 5):
        scaled = float(np.median([m[f"intensity={i}/delta_scaled/ece"] for m in runs]))
        plain = float(np.median([m[f"intensity={i}/plain/ece"] for m in runs]))
        ok &= scaled <= plain
        parts.append(f"intensity {i}: {scaled:.4f} vs plain {plain:.4f}")
    report(acceptance_log, capsys, ok, "6 calibration under shift",
           "median ECE " + "; ".join(parts), secs)
    assert ok


PROPERTY_TESTS = [
    "test_encoding.py::test_reconstruction_ten_thousand_cases",
    "test_encoding.py::test_reconstruction_property",
    "test_encoding.py::test_anchor_cancellation_linear_model",
    "test_encoding.py::test_anchor_cancellation_property",
    "test_smo.py::test_ei_nonnegative",
    "test_smo.py::test_ei_sigma_to_zero_limit",
    "test_metrics.py::test_spearman_examples",
    "test_metrics.py::test_auroc_examples",
    "test_metrics.py::test_auroc_matches_pairwise_count",
    "test_metrics.py::test_ece_examples",
    "test_mbo.py::test_first_order_condition",
    "test_learners.py::test_seed_determinism",
    "test_mbo.py::test_inverse_is_deterministic",
    "test_smo.py::test_trace_invariants_and_determinism",
]


def test_7_property_suites(acceptance_log, capsys):
    t0 = time.perf_counter()
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
           *[str(ROOT / t) for t in PROPERTY_TESTS]]
    proc = subprocess.run(cmd, capture_output=True, text=True, cwd=ROOT.parent)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
    ok = proc.returncode == 0
    report(acceptance_log, capsys, ok, "7 property suites", summary, time.perf_counter() - t0)
    assert ok, proc.stdout[-4000:]
