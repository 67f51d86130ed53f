"""Acceptance suite.

One test per pre-registered criterion, each run at its stated
tolerance with frozen seeds, printing a single pass/fail line so a
full run reads as a ten-line report.
"""
import math
import time

import numpy as np
import pytest

from delapprox.checks import delaunay_brute_check, lemma_simplex_check
from delapprox.constants import (
    bp_identity_check,
    c_d_bounds,
    estimate_c_d,
    kappa,
    s_ddk,
)
from delapprox.experiments import (
    ExperimentConfig,
    run_clt,
    run_rx_tail,
    run_symdiff_scaling,
    run_unbiasedness,
    run_variance_scaling,
    write_records,
)
from delapprox.targets import Ball, Box


def _criterion(num, name, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    print(f"criterion {num:02d} {name}: {verdict} | {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def test_criterion_01_unbiasedness():
    t0 = time.perf_counter()
    disk = run_unbiasedness(
        ExperimentConfig(Ball(1.0), (500.0,), 1000, base_seed=1001)
    ).aggregates
    box = run_unbiasedness(
        ExperimentConfig(Box([1.0, 1.0]), (500.0,), 1000, base_seed=1002)
    ).aggregates
    elapsed = time.perf_counter() - t0
    z_disk = disk["per_t"][500.0]["z_score"]
    z_box = box["per_t"][500.0]["z_score"]
    ok = disk["pass"] and box["pass"] and elapsed <= 120.0
    _criterion(
        1,
        "volume unbiasedness",
        ok,
        f"unit disk z={z_disk:+.2f}, unit box z={z_box:+.2f} "
        f"(|z| <= 3 each, R=1000 at t=500), runtime {elapsed:.0f}s <= 120s",
    )


@pytest.fixture(scope="module")
def variance_run():
    t0 = time.perf_counter()
    config = ExperimentConfig(
        Ball(1.1), (250.0, 500.0, 1000.0, 2000.0, 4000.0), 1000, base_seed=1003
    )
    report = run_variance_scaling(config)
    return report, time.perf_counter() - t0


def test_criterion_02_variance_exponent(variance_run):
    report, elapsed = variance_run
    slope = report.aggregates["slope"]
    lo, hi = report.aggregates["ci"]
    ok = -1.65 <= slope <= -1.35 and elapsed <= 900.0
    _criterion(
        2,
        "variance exponent",
        ok,
        f"log-log slope {slope:.3f} in [-1.65, -1.35] "
        f"(bootstrap CI [{lo:.3f}, {hi:.3f}], R=1000 per t, t=250..4000), "
        f"runtime {elapsed:.0f}s <= 900s",
    )


def test_criterion_03_normal_limit():
    config = ExperimentConfig(Ball(1.0), (1.0, 2.0, 4.0, 1000.0), 2000, base_seed=1004)
    agg = run_clt(config, enforce_hypothesis=False).aggregates
    path = " -> ".join(
        f"{agg['per_t'][t]['ks_distance']:.3f}" for t in sorted(agg["per_t"])
    )
    ok = agg["monotone_trend"] and agg["final_ks"] <= 0.05
    _criterion(
        3,
        "normal limit",
        ok,
        f"Kolmogorov distance {path} monotone within allowance "
        f"{agg['trend_allowance']:.4f}; final {agg['final_ks']:.4f} <= 0.05 at R=2000",
    )


def test_criterion_04_symdiff_limit():
    c_ref = estimate_c_d(2, samples=10**7, seed=7)
    config = ExperimentConfig(
        Ball(1.0),
        (500.0, 1000.0, 2000.0, 4000.0),
        120,
        base_seed=1005,
        inside_samples=16384,
    )
    agg = run_symdiff_scaling(config, c_ref=c_ref).aggregates
    lo, hi = c_d_bounds(2)
    bracketed = lo <= c_ref.value <= hi
    gap = agg["reference_gap_sigmas"]
    ok = agg["stabilized"] and gap <= 3.0 and bracketed
    _criterion(
        4,
        "symmetric-difference limit",
        ok,
        f"scaled ratio stabilized ({agg['relative_change_last_two']:.1%} <= 10% over last "
        f"doubling); fitted limit {agg['fitted_limit']:.4f} vs reference "
        f"{c_ref.value:.4f} gap {gap:.2f} sigma <= 3; reference inside "
        f"[{lo:.4f}, {hi:.4f}]",
    )


def test_criterion_05_moment_identity():
    worst = 0.0
    for d in range(2, 7):
        closed = (d + 1) / math.factorial(d - 1) * kappa(d) ** (d + 1)
        worst = max(worst, abs(s_ddk(d, 2) - closed) / closed)
    rng = np.random.default_rng(55)
    n = 10**6
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(n, 3))
    x, y = np.cos(theta), np.sin(theta)
    area = 0.5 * np.abs(
        (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
        - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    )
    mc = (2.0 * np.pi) ** 3 * float(area.mean())
    mc_gap = abs(mc - s_ddk(2, 1)) / s_ddk(2, 1)
    ok = worst <= 1e-12 and mc_gap <= 0.01
    _criterion(
        5,
        "moment identities",
        ok,
        f"second-moment closed form matches to {worst:.2e} <= 1e-12 for d=2..6; "
        f"first moment vs sphere MC gap {mc_gap:.2%} <= 1%",
    )


def test_criterion_06_spherical_decompositions():
    worst = 0.0
    details = []
    for d in (2, 3):
        for check in bp_identity_check(d, samples=10**7, seed=11):
            worst = max(worst, check.rel_gap)
            details.append(f"{check.name} d={d}: {check.rel_gap:.2%}")
    ok = worst <= 0.02
    _criterion(
        6,
        "spherical decompositions",
        ok,
        "; ".join(details) + " (each <= 2% at 1e7 samples)",
    )


def test_criterion_07_triangulation_correctness():
    plane = delaunay_brute_check(2, 200, seeds=range(70))
    space = delaunay_brute_check(3, 120, seeds=range(70, 100))
    ok = plane.ok and space.ok
    _criterion(
        7,
        "triangulation correctness",
        ok,
        f"100 seeds brute-force verified; {plane.detail}; {space.detail}",
    )


def test_criterion_08_perturbed_simplex_geometry():
    plane = lemma_simplex_check(2, delta=0.02, trials=1000)
    space = lemma_simplex_check(3, delta=0.02, trials=1000)
    ok = plane.ok and space.ok
    _criterion(
        8,
        "perturbed-simplex geometry",
        ok,
        f"{plane.detail}; {space.detail}",
    )


def test_criterion_09_circumradius_tail():
    config = ExperimentConfig(Ball(1.0), (1.0, 10.0, 100.0), 300, base_seed=1009)
    agg = run_rx_tail(config).aggregates
    margin = min(
        (row["bound"] * (1.0 + 3.0 * row["stderr"] / row["empirical"]) - row["empirical"])
        / row["bound"]
        for row in agg["table"]
        if row["empirical"] > 0
    )
    ok = agg["all_ok"]
    _criterion(
        9,
        "circumradius tail bound",
        ok,
        f"{len(agg['table'])} (t, k, s) rows all below the analytic bound "
        f"(tightest slack {margin:.1%}), t in {{1, 10, 100}}, R=300",
    )


def test_criterion_10_determinism(tmp_path):
    config = ExperimentConfig(Ball(1.0), (200.0,), 5, base_seed=1010)
    for name in ("a", "b"):
        write_records(tmp_path / f"{name}.csv", run_unbiasedness(config).records)
    same = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    _criterion(
        10,
        "record determinism",
        same,
        "identical config run twice produced byte-identical records.csv",
    )
