"""Experiment configuration, execution, determinism, and report assembly."""

from __future__ import annotations

import io

import numpy as np
import pytest

from eulerdp import (
    ConfigError,
    EulerHistogram,
    ExperimentConfig,
    HistogramState,
    PrivacyParams,
    RandomSource,
    ZeroNoiseSource,
    build,
    build_partition,
    compare_histograms,
    config_from_mapping,
    infer,
    perturb,
    repair,
    resolve_grid_n,
    round_counts,
    run_query_experiment,
    shapes_for_percent,
    write_metrics,
)
from eulerdp.harness import load_experiment_bodies


def test_shapes_for_percent_goldens():
    assert shapes_for_percent(10, 10.0) == [(1, 10), (2, 5), (5, 2), (10, 1)]
    assert shapes_for_percent(10, 25.0) == [(5, 5)]
    assert shapes_for_percent(10, 50.0) == [(5, 10), (10, 5)]
    assert shapes_for_percent(10, 100.0) == [(10, 10)]
    assert shapes_for_percent(10, 0.1) == [(1, 1)]


def test_shapes_for_percent_nearest_achievable():
    # 96% of a 7x7 grid asks for 47 cells; nothing near it factors into a
    # 7-bounded rectangle until 49
    assert shapes_for_percent(7, 96.0) == [(7, 7)]


def test_shapes_for_percent_validation():
    with pytest.raises(ConfigError):
        shapes_for_percent(10, 0.0)
    with pytest.raises(ConfigError):
        shapes_for_percent(10, 100.5)


def test_resolve_grid_n():
    assert resolve_grid_n(20000.0, 20, None) == 20
    assert resolve_grid_n(20000.0, None, 1000.0) == 20
    assert resolve_grid_n(2.0, None, 2.0 / 30.0) == 30  # ratio lands on 30.000000000000004
    assert resolve_grid_n(0.3, None, 0.1) == 3  # and this one on 2.9999999999999996
    assert resolve_grid_n(20000.0, 20, 1000.0) == 20
    with pytest.raises(ConfigError):
        resolve_grid_n(20000.0, 20, 999.0)
    with pytest.raises(ConfigError):
        resolve_grid_n(20000.0, 1, None)
    with pytest.raises(ConfigError):
        resolve_grid_n(20000.0, None, None)
    with pytest.raises(ConfigError):
        resolve_grid_n(10.0, None, 3.0)
    with pytest.raises(ConfigError):
        resolve_grid_n(10.0, None, 20.0)


def _base_config(**kw):
    defaults = dict(
        area_side=5.0,
        diameter_bound=1.0,
        epsilon=1.0,
        seed=7,
        n=5,
        synthetic="uniform",
        count=40,
        repetitions=4,
        qr_percents=(100.0,),
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        _base_config(epsilon=0.0)
    with pytest.raises(ConfigError):
        _base_config(synthetic=None)  # no body source at all
    with pytest.raises(ConfigError):
        _base_config(bodies_path="x.jsonl")  # two body sources
    with pytest.raises(ConfigError):
        _base_config(delta=1.0)
    with pytest.raises(ConfigError):
        _base_config(repetitions=0)
    with pytest.raises(ConfigError):
        _base_config(workers=0)
    with pytest.raises(ConfigError):
        _base_config(objective="l2")
    with pytest.raises(ConfigError):
        _base_config(qr_percents=(), qr_shapes=())
    with pytest.raises(ConfigError):
        _base_config(qr_shapes=((6, 2),))  # does not fit n=5
    assert _base_config(qr_shapes=((5, 2),)).grid_n == 5


def test_config_from_mapping_full():
    cfg = config_from_mapping({
        "area_side": "20000",
        "cell_side": "1000",
        "diameter_bound": "2000",
        "epsilon": "0.5",
        "seed": "99",
        "synthetic": "clustered",
        "count": "500",
        "repetitions": "12",
        "qr_percents": "10, 50",
        "qr_shapes": "2x3, 20x1",
        "origin_x": "100.5",
        "workers": "3",
        "objective": "linf",
        "delta": "0.1",
    })
    assert cfg.grid_n == 20
    assert cfg.qr_percents == (10.0, 50.0)
    assert cfg.qr_shapes == ((2, 3), (20, 1))
    assert cfg.origin == (100.5, 0.0)
    assert cfg.workers == 3 and cfg.objective == "linf" and cfg.delta == 0.1


def test_config_from_mapping_errors():
    base = {"area_side": "10", "n": "5", "diameter_bound": "2", "epsilon": "1",
            "seed": "1", "synthetic": "uniform"}
    with pytest.raises(ConfigError, match="unknown config keys"):
        config_from_mapping({**base, "sigma": "3"})
    with pytest.raises(ConfigError, match="missing required"):
        config_from_mapping({"n": "5", "synthetic": "uniform"})
    with pytest.raises(ConfigError, match="config key n"):
        config_from_mapping({**base, "n": "five"})
    with pytest.raises(ConfigError):
        config_from_mapping({**base, "qr_shapes": "3by3"})
    with pytest.raises(ConfigError):
        config_from_mapping({**base, "bodies": "b.jsonl"})  # two sources


def test_config_from_mapping_bodies_source(tmp_path):
    from eulerdp.fileio import write_bodies_file
    from eulerdp import convex_hull

    path = tmp_path / "bodies.jsonl"
    write_bodies_file([convex_hull([(1.0, 1.0), (2.0, 1.0), (2.0, 2.0)])], str(path))
    cfg = config_from_mapping({
        "area_side": "10", "n": "5", "diameter_bound": "3", "epsilon": "1",
        "seed": "1", "bodies": str(path),
    })
    assert cfg.bodies_path == str(path)
    bodies = load_experiment_bodies(cfg)
    assert len(bodies) == 1


def test_zero_noise_experiment_has_zero_error():
    report = run_query_experiment(_base_config(), noise_factory=ZeroNoiseSource)
    for label, alg, err, samples in report.query_rows:
        assert err == 0.0
        assert samples == 4  # one 5x5 shape per repetition
    for alg, l1, ratio in report.histogram_rows:
        assert l1 == 0.0 and ratio == 1.0
    for stage, c1, c2, c3 in report.violation_rows:
        assert (c1, c2, c3) == (0.0, 0.0, 0.0)
    assert report.median_error("100%", "DP") == 0.0
    with pytest.raises(KeyError):
        report.median_error("100%", "XX")


def test_experiment_is_deterministic_for_a_seed():
    a = run_query_experiment(_base_config(qr_percents=(20.0, 100.0), repetitions=5))
    b = run_query_experiment(_base_config(qr_percents=(20.0, 100.0), repetitions=5))
    assert a.query_rows == b.query_rows
    assert a.histogram_rows == b.histogram_rows
    assert a.violation_rows == b.violation_rows
    assert a.repair_rows == b.repair_rows
    c = run_query_experiment(_base_config(qr_percents=(20.0, 100.0), repetitions=5, seed=8))
    assert c.query_rows != a.query_rows


def test_worker_pool_matches_sequential():
    seq = run_query_experiment(_base_config(repetitions=6))
    par = run_query_experiment(_base_config(repetitions=6, workers=3))
    assert seq.query_rows == par.query_rows
    assert seq.histogram_rows == par.histogram_rows
    assert seq.violation_rows == par.violation_rows
    assert seq.repair_rows == par.repair_rows


def test_experiment_report_structure():
    report = run_query_experiment(_base_config(qr_shapes=((2, 3),)))
    labels = [row[0] for row in report.query_rows]
    assert labels == ["100%", "100%", "100%", "2x3", "2x3", "2x3"]
    assert [row[1] for row in report.query_rows] == ["DP", "LP", "R"] * 2
    assert [row[0] for row in report.violation_rows] == ["noisy", "consistent", "released"]
    assert [row[0] for row in report.timing_rows] == [
        "build", "privatize", "infer", "round", "repair",
    ]
    assert [row[0] for row in report.repair_rows] == ["median_cost", "mean_cost", "max_cost"]
    echo = dict(report.config_echo)
    assert echo["grid_n"] == "5" and echo["synthetic"] == "uniform"
    # inference clears the noise violations in every repetition
    stages = {row[0]: row[1:] for row in report.violation_rows}
    assert stages["consistent"] == (0.0, 0.0, 0.0)
    assert stages["released"] == (0.0, 0.0, 0.0)


def test_write_metrics_layout():
    report = run_query_experiment(_base_config(), noise_factory=ZeroNoiseSource)
    buf = io.StringIO()
    write_metrics(report, buf)
    text = buf.getvalue()
    for table in ("config", "query_error", "histogram_l1", "violations", "timing", "repair"):
        assert f"# table: {table}\n" in text
    assert "# columns: qr\talgorithm\tmedian_relative_error\tsamples\n" in text
    line = next(l for l in text.splitlines() if l.startswith("100%\tDP"))
    assert line == "100%\tDP\t0\t4"


def _pipeline_histograms(seed=3):
    rng = np.random.default_rng(2)
    p = build_partition(5.0, 5)
    from conftest import lattice_body

    bodies = [lattice_body(rng, 5.0) for _ in range(30)]
    raw = build(bodies, p)
    noisy = perturb(raw, PrivacyParams.for_partition(1.0, 1.0, p), RandomSource(seed))
    consistent, _ = infer(noisy)
    released, _ = repair(round_counts(consistent))
    return raw, noisy, consistent, released


def test_compare_histograms_pipeline():
    raw, noisy, consistent, released = _pipeline_histograms()
    rows = compare_histograms([raw, noisy, consistent, released])
    assert [r[0] for r in rows] == ["noisy", "consistent", "rounded"]
    noisy_l1 = rows[0][1]
    assert rows[0][2] == 1.0 and noisy_l1 > 0
    # optimality puts the consistent histogram within 2x of the noise in L1
    assert rows[1][2] <= 2.0 + 1e-9
    assert rows[2][1] >= 0.0 and np.isfinite(rows[2][2])


def test_compare_histograms_identity_and_rules():
    raw, noisy, consistent, _ = _pipeline_histograms()
    rows = compare_histograms([raw, raw.with_counts(raw.counts, HistogramState.RAW)])
    assert rows == [("raw", 0.0, 1.0)]  # 0/0 reads as ratio 1
    # no NOISY entry: the first comparand is the denominator
    rows = compare_histograms([raw, consistent, consistent])
    assert rows[0][2] == 1.0 and rows[1][2] == 1.0
    with pytest.raises(ValueError):
        compare_histograms([raw])
    other = EulerHistogram(build_partition(4.0, 4), np.zeros(49), HistogramState.RAW)
    with pytest.raises(ValueError):
        compare_histograms([raw, other])


def test_compare_histograms_infinite_ratio():
    raw, *_ = _pipeline_histograms()
    bumped = raw.with_counts(raw.counts + 1.0, HistogramState.RAW)
    rows = compare_histograms([raw, raw.with_counts(raw.counts, HistogramState.RAW), bumped])
    assert rows[0][1] == 0.0 and rows[0][2] == 1.0
    assert rows[1][2] == float("inf")
