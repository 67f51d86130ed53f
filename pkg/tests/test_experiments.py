import json
import math

import numpy as np
import pytest
from scipy.stats import norm

from delapprox.constants import CdEstimate, rx_tail_bound
from delapprox.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    Record,
    kolmogorov_distance,
    read_records,
    run_clt,
    run_rx_tail,
    run_symdiff_scaling,
    run_unbiasedness,
    run_variance_scaling,
    summarize_clt,
    summarize_symdiff,
    summarize_unbiasedness,
    summarize_variance,
    write_records,
    write_summary,
)
from delapprox.targets import Ball, Box

# frozen reference estimate of the d=2 symmetric-difference constant
#   (200k samples, seed 42)
C2_REF = CdEstimate(
    d=2,
    value=0.3232068933984977,
    stderr=0.00232940591842197,
    integral=0.0,
    integral_stderr=0.0,
    samples=200_000,
    seed=42,
)


def fake_records(experiment, ts, volumes_by_t, symdiff_by_t=None):
    records = []
    for t in ts:
        for i, v in enumerate(volumes_by_t[t]):
            sym = symdiff_by_t[t][i] if symdiff_by_t else None
            records.append(
                Record(experiment, 2, float(t), i, 0, float(v), sym, None, 0)
            )
    return records


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(Ball(1.0), (), 10)
        with pytest.raises(ValueError):
            ExperimentConfig(Ball(1.0), (100.0, 100.0), 10)
        with pytest.raises(ValueError):
            ExperimentConfig(Ball(1.0), (200.0, 100.0), 10)
        with pytest.raises(ValueError):
            ExperimentConfig(Ball(1.0), (-5.0, 100.0), 10)
        with pytest.raises(ValueError):
            ExperimentConfig(Ball(1.0), (100.0,), 0)
        with pytest.raises(ValueError):
            ExperimentConfig(Ball(1.0), (100.0,), 10, epsilon=0.0)
        with pytest.raises(ValueError):
            ExperimentConfig(Ball(1.0), (100.0,), 10, workers=0)

    def test_variance_hypothesis_threshold(self):
        # disk of radius 1.1: the regime starts at (16/1.1)^2 ~ 211.6
        ok = ExperimentConfig(Ball(1.1), (250.0, 4000.0), 5)
        ok.require_variance_hypothesis()
        bad = ExperimentConfig(Ball(1.1), (200.0, 3200.0), 5)
        with pytest.raises(ValueError, match="threshold"):
            bad.require_variance_hypothesis()

    def test_grid_coerced_to_floats(self):
        cfg = ExperimentConfig(Ball(1.0), (100, 200), 5)
        assert cfg.t_grid == (100.0, 200.0)


class TestDeterminism:
    def test_identical_config_identical_records(self):
        cfg = ExperimentConfig(Ball(1.0), (250.0,), 6, base_seed=3)
        a = run_unbiasedness(cfg)
        b = run_unbiasedness(cfg)
        assert a.records == b.records
        assert a.aggregates == b.aggregates

    def test_base_seed_changes_records(self):
        a = run_unbiasedness(ExperimentConfig(Ball(1.0), (250.0,), 4, base_seed=3))
        b = run_unbiasedness(ExperimentConfig(Ball(1.0), (250.0,), 4, base_seed=4))
        assert a.records != b.records

    def test_worker_pool_matches_serial(self):
        serial = run_unbiasedness(
            ExperimentConfig(Ball(1.0), (250.0,), 4, base_seed=5, workers=1)
        )
        pooled = run_unbiasedness(
            ExperimentConfig(Ball(1.0), (250.0,), 4, base_seed=5, workers=2)
        )
        assert serial.records == pooled.records

    def test_record_count(self):
        cfg = ExperimentConfig(Ball(1.0), (250.0, 500.0), 5, base_seed=1)
        rep = run_unbiasedness(cfg)
        assert len(rep.records) == 10
        assert all(r.leakage == 0 for r in rep.records)


class TestUnbiasedness:
    def test_disk(self):
        cfg = ExperimentConfig(Ball(1.0), (300.0,), 100, base_seed=11)
        rep = run_unbiasedness(cfg)
        agg = rep.aggregates
        assert agg["target_volume"] == pytest.approx(math.pi)
        assert agg["pass"]
        assert abs(agg["per_t"][300.0]["z_score"]) <= 3.0

    def test_unit_box(self):
        cfg = ExperimentConfig(Box([1.0, 1.0]), (300.0,), 80, base_seed=12)
        rep = run_unbiasedness(cfg)
        assert rep.aggregates["target_volume"] == 1.0
        assert rep.aggregates["pass"]

    def test_doubling_replications_shrinks_stderr(self):
        small = run_unbiasedness(
            ExperimentConfig(Ball(1.0), (250.0,), 80, base_seed=13)
        )
        big = run_unbiasedness(
            ExperimentConfig(Ball(1.0), (250.0,), 160, base_seed=13)
        )
        ratio = (
            small.aggregates["per_t"][250.0]["stderr"]
            / big.aggregates["per_t"][250.0]["stderr"]
        )
        assert math.sqrt(2) * 0.8 <= ratio <= math.sqrt(2) * 1.2


class TestVarianceScaling:
    def test_exact_power_law_recovered(self):
        # two replications per t whose sample variance is exactly c t^-1.5
        ts = [250.0, 500.0, 1000.0, 2000.0, 4000.0]
        c = 0.37
        vols = {}
        for t in ts:
            a = math.sqrt(c * t**-1.5 / 2.0)
            vols[t] = [1.0 + a, 1.0 - a]
        agg = summarize_variance(fake_records("variance", ts, vols), bootstrap=16)
        assert agg["slope"] == pytest.approx(-1.5, abs=1e-12)
        assert agg["intercept"] == pytest.approx(math.log(c), abs=1e-12)

    def test_d2_smoke(self):
        cfg = ExperimentConfig(Ball(1.1), (250.0, 1000.0, 4000.0), 35, base_seed=21)
        rep = run_variance_scaling(cfg)
        agg = rep.aggregates
        assert -2.0 <= agg["slope"] <= -1.0
        assert agg["ci"][0] <= agg["slope"] <= agg["ci"][1]

    def test_d3_smoke_reduced_scale(self):
        cfg = ExperimentConfig(Ball(0.9, dim=3), (80.0, 320.0, 1280.0), 10, base_seed=55)
        rep = run_variance_scaling(cfg, enforce_hypothesis=False)
        agg = rep.aggregates
        assert agg["ci"][0] <= -4.0 / 3.0 <= agg["ci"][1]
        assert -2.3 <= agg["slope"] <= -0.6

    def test_hypothesis_enforced_by_default(self):
        cfg = ExperimentConfig(Ball(1.1), (100.0, 1600.0), 5)
        with pytest.raises(ValueError, match="threshold"):
            run_variance_scaling(cfg)

    def test_grid_span_required(self):
        cfg = ExperimentConfig(Ball(1.1), (250.0, 1000.0), 5)
        with pytest.raises(ValueError, match="factor 16"):
            run_variance_scaling(cfg)

    def test_zero_variance_rejected(self):
        ts = [100.0, 3200.0]
        vols = {t: [1.0, 1.0, 1.0] for t in ts}
        with pytest.raises(ValueError, match="variance"):
            summarize_variance(fake_records("variance", ts, vols), bootstrap=4)


class TestCLT:
    def test_normal_quantiles_distance(self):
        for n in (200, 500):
            q = norm.ppf((np.arange(1, n + 1) - 0.5) / n)
            assert kolmogorov_distance(q, standardize=False) <= 1.0 / (2 * n) + 1e-12

    def test_constant_sample_distance(self):
        assert kolmogorov_distance(np.full(100, 3.3)) == 0.5

    def test_zero_variance_raises_in_run_path(self):
        recs = fake_records("clt", [100.0], {100.0: [2.0] * 50})
        with pytest.raises(ValueError, match="variance"):
            summarize_clt(recs)

    def test_monotone_trend_detection(self):
        rng = np.random.default_rng(1)
        skewed = rng.exponential(size=800)
        gauss = rng.standard_normal(800)
        improving = fake_records(
            "clt", [1.0, 2.0], {1.0: skewed, 2.0: gauss}
        )
        worsening = fake_records(
            "clt", [1.0, 2.0], {1.0: gauss, 2.0: skewed}
        )
        assert summarize_clt(improving)["monotone_trend"]
        assert not summarize_clt(worsening)["monotone_trend"]

    def test_disk_smoke(self):
        cfg = ExperimentConfig(Ball(1.1), (250.0,), 1000, base_seed=31)
        rep = run_clt(cfg)
        agg = rep.aggregates
        assert agg["final_ks"] <= 0.08
        assert agg["per_t"][250.0]["n"] == 1000


class TestSymdiffScaling:
    def test_exact_correction_model_recovered(self):
        # symdiff exactly Per * t^(-1/2) (c + b t^(-1/2)) with no noise
        ts = [100.0, 400.0, 1600.0]
        per, c, b = 2 * math.pi, 0.32, 0.5
        sym = {t: [per * t**-0.5 * (c + b * t**-0.5)] * 3 for t in ts}
        vols = {t: [math.pi] * 3 for t in ts}
        agg = summarize_symdiff(
            fake_records("symdiff", ts, vols, sym), perimeter=per, d=2
        )
        assert agg["fitted_limit"] == pytest.approx(c, abs=1e-12)
        assert agg["slope_coefficient"] == pytest.approx(b, abs=1e-9)

    def test_stabilization_flag(self):
        ts = [100.0, 400.0]
        vols = {t: [1.0, 1.0] for t in ts}
        steady = {100.0: [0.5, 0.5], 400.0: [0.26, 0.26]}
        agg = summarize_symdiff(
            fake_records("symdiff", ts, vols, steady), perimeter=1.0, d=2
        )
        # ratios 5.0 and 5.2: 3.8% change
        assert agg["stabilized"]
        jumpy = {100.0: [0.5, 0.5], 400.0: [0.4, 0.4]}
        agg = summarize_symdiff(
            fake_records("symdiff", ts, vols, jumpy), perimeter=1.0, d=2
        )
        assert not agg["stabilized"]

    def test_disk_smoke_against_reference(self):
        cfg = ExperimentConfig(
            Ball(1.1), (250.0, 500.0), 20, base_seed=32, inside_samples=4096
        )
        rep = run_symdiff_scaling(cfg, c_ref=C2_REF)
        agg = rep.aggregates
        assert agg["stabilized"]
        assert agg["reference_gap_sigmas"] <= 4.0
        for v in agg["per_t"].values():
            assert v["scaled_ratio"] > 0

    def test_limit_independent_of_target_scale(self):
        limits = []
        for radius in (1.1, 2.2):
            cfg = ExperimentConfig(
                Ball(radius), (250.0, 500.0), 15, base_seed=33, inside_samples=4096
            )
            agg = run_symdiff_scaling(cfg, c_ref=C2_REF).aggregates
            limits.append((agg["fitted_limit"], agg["fitted_limit_stderr"]))
        gap = abs(limits[0][0] - limits[1][0])
        assert gap <= 3.0 * math.hypot(limits[0][1], limits[1][1])


class TestRxTail:
    def test_smoke_all_below_bound(self):
        cfg = ExperimentConfig(Ball(1.0), (1.0, 10.0), 80, base_seed=41)
        rep = run_rx_tail(cfg)
        agg = rep.aggregates
        assert agg["all_ok"]
        assert len(agg["table"]) == 2 * 3 * 3
        assert len(rep.records) == 160
        assert all(r.volume > 0 for r in rep.records)

    def test_indicator_at_zero_threshold(self):
        cfg = ExperimentConfig(Ball(1.0), (1.0,), 40, base_seed=42)
        rep = run_rx_tail(cfg)
        row = next(
            r for r in rep.aggregates["table"] if r["k"] == 0 and r["s"] == 0.0
        )
        assert row["empirical"] == 1.0
        assert row["bound"] >= 1.0

    def test_intensity_below_one_rejected(self):
        cfg = ExperimentConfig(Ball(1.0), (0.5, 2.0), 5)
        with pytest.raises(ValueError, match="t >= 1"):
            run_rx_tail(cfg)

    def test_bound_monotone_in_s(self):
        svals = np.linspace(0.0, 2.0, 9)
        bounds = [rx_tail_bound(2, 5.0, 1, s) for s in svals]
        assert all(b <= a for a, b in zip(bounds, bounds[1:]))


class TestRecordsIO:
    def test_roundtrip_exact(self, tmp_path):
        cfg = ExperimentConfig(
            Ball(1.0), (250.0,), 5, base_seed=51, inside_samples=4096
        )
        rep = run_symdiff_scaling(cfg, c_ref=C2_REF)
        path = tmp_path / "records.csv"
        write_records(path, rep.records)
        assert read_records(path) == rep.records

    def test_header_frozen(self, tmp_path):
        path = tmp_path / "records.csv"
        write_records(path, [])
        assert (
            path.read_text()
            == "experiment,d,t,replication,seed,volume,symdiff,symdiff_stderr,leakage\n"
        )
        assert CSV_COLUMNS[0] == "experiment" and CSV_COLUMNS[-1] == "leakage"

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError, match="columns"):
            read_records(path)

    def test_empty_symdiff_fields(self, tmp_path):
        rec = Record("unbiasedness", 2, 100.0, 0, 7, 3.14, None, None, 0)
        path = tmp_path / "r.csv"
        write_records(path, [rec])
        line = path.read_text().splitlines()[1]
        assert line == "unbiasedness,2,100.0,0,7,3.14,,,0"
        assert read_records(path) == [rec]

    def test_summary_bytes_deterministic(self, tmp_path):
        cfg = ExperimentConfig(Ball(1.0), (250.0,), 4, base_seed=52)
        agg = run_unbiasedness(cfg).aggregates
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_summary(p1, {"unbiasedness": agg})
        write_summary(p2, {"unbiasedness": agg})
        assert p1.read_bytes() == p2.read_bytes()
        assert json.loads(p1.read_text())["unbiasedness"]["pass"] is True

    def test_aggregates_recomputable_from_csv(self, tmp_path):
        cfg = ExperimentConfig(Ball(1.0), (250.0, 500.0), 6, base_seed=53)
        rep = run_unbiasedness(cfg)
        path = tmp_path / "records.csv"
        write_records(path, rep.records)
        again = summarize_unbiasedness(read_records(path), math.pi)
        assert again == rep.aggregates
