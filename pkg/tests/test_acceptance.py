"""Release gate: every blocking behavior in one file, one verdict line each.

Each test prints ``ACCEPTANCE <k>: PASS/FAIL`` with a short measurement
summary, then asserts. The lines bypass pytest capture so the gate reads as a
checklist even in a quiet run. Seeds are pinned throughout: a red line here is
a regression, not a re-roll.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from conftest import body_intersects_box, lattice_body
from eulerdp import (
    EulerHistogram,
    HistogramState,
    PrivacyParams,
    QueryRegion,
    RandomSource,
    all_rectangle_counts,
    build,
    build_constraints,
    build_partition,
    convex_hull,
    global_sensitivity,
    infer,
    perturb,
    query,
    repair,
    round_counts,
    utility_bound_dp,
    utility_bound_end_to_end,
    valid_region_mask,
    verify_violations,
)
from eulerdp.harness import ExperimentConfig, run_query_experiment
from eulerdp.ingest import IngestConfig, generate_synthetic
from eulerdp.privacy import derive_seed


def _verdict(capsys, num: int, ok: bool, claim: str, detail: str) -> None:
    with capsys.disabled():
        print(f"ACCEPTANCE {num:2d}: {'PASS' if ok else 'FAIL'} - {claim} ({detail})")
    assert ok, f"criterion {num}: {claim} ({detail})"


def _synthetic(count: int, area: float, bound: float, seed: int, kind: str = "uniform"):
    cfg = IngestConfig(area_side=area, diameter_bound=bound, k=10)
    return generate_synthetic(kind, count, cfg, np.random.default_rng(seed))


def test_01_sensitivity_golden_values(capsys):
    got = tuple(
        global_sensitivity(2000.0, d) for d in (1000.0, 2000.0, 2000.0 / 3.0, 160.0)
    )
    ok = got == (25, 9, 49, 729)
    _verdict(capsys, 1, ok, "sensitivity matches the four published grids", f"got {got}")


def test_02_queries_are_exact_on_raw_histograms(capsys):
    """Every rectangular count equals an independent brute-force recount.

    Sixteen random body sets per grid size, all rectangles of each grid,
    ground truth rebuilt from scratch: a body is counted for a rectangle
    iff a separating-free intersection test says it meets any covered cell.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(4401)
    trials = 0
    mismatches = 0
    for n in range(2, 11):
        p = build_partition(float(n), n)
        idx = np.indices((n, n, n, n)).reshape(4, -1)
        keep = (idx[0] <= idx[1]) & (idx[2] <= idx[3])
        r0, r1, c0, c1 = (a[keep] for a in idx)
        for _ in range(16):
            bodies = [lattice_body(rng, float(n)) for _ in range(12)]
            truth = np.zeros(len(r0), dtype=np.int64)
            for body in bodies:
                hits = np.zeros((n, n), dtype=np.int64)
                for r in range(n):
                    for c in range(n):
                        box = (float(c), float(c + 1), float(r), float(r + 1))
                        hits[r, c] = body_intersects_box(body, box)
                pre = np.zeros((n + 1, n + 1), dtype=np.int64)
                pre[1:, 1:] = hits.cumsum(0).cumsum(1)
                inside = (
                    pre[r1 + 1, c1 + 1] - pre[r0, c1 + 1] - pre[r1 + 1, c0] + pre[r0, c0]
                )
                truth += inside > 0
            got = all_rectangle_counts(build(bodies, p))[r0, r1, c0, c1]
            mismatches += int(np.count_nonzero(got != truth))
            trials += len(truth)
    ok = trials >= 100_000 and mismatches == 0
    _verdict(
        capsys, 2, ok,
        "raw rectangle queries equal brute-force recounts",
        f"{trials} trials, {mismatches} mismatches, {time.perf_counter() - t0:.0f}s",
    )


def test_03_constraint_family_census(capsys):
    cs = build_constraints(build_partition(20000.0, 20))
    got = (len(cs.c1), len(cs.c2), len(cs.c3))
    ok = got == (1520, 1444, 361) and sum(got) == 3325
    _verdict(capsys, 3, ok, "constraint census at n=20 is (1520, 1444, 361)", f"got {got}")


def test_04_noise_tail_bound(capsys):
    p = build_partition(10.0, 10)
    bodies = _synthetic(5, 10.0, 1.0, seed=92)
    raw = build(bodies, p, diameter_bound=1.0)
    params = PrivacyParams.for_partition(1.0, 1.0, p)
    devs = np.empty(1000)
    for i in range(1000):
        noisy = perturb(raw, params, RandomSource(derive_seed(650, i)))
        devs[i] = np.abs(noisy.counts - raw.counts).max()
    results = []
    ok = True
    for delta in (0.01, 0.05, 0.1):
        bound = utility_bound_dp(delta, params.lam, p.size)
        freq = float((devs <= bound).mean())
        ok = ok and freq >= 1.0 - delta
        results.append(f"delta={delta:g}: {freq:.3f}")
    _verdict(
        capsys, 4, ok,
        "sup-norm of the noise stays within lam*ln(N/delta) at rate >= 1-delta",
        "; ".join(results),
    )


def test_05_neighbouring_database_odds_ratio(capsys):
    """Million-sample likelihood-ratio check of the privacy guarantee.

    Neighbours differ by one added body chosen to move every component of a
    2x2 grid at once, the worst case the noise scale is calibrated for. The
    witness event is a product of per-component tails, whose true log-odds
    equal epsilon exactly, so the estimate must land within three binomial
    standard errors on both sides.
    """
    d, eps = 1000.0, 1.0
    p = build_partition(2 * d, 2)
    small = [
        convex_hull([(200.0 + dx, 200.0 + dy) for dx in (0.0, 150.0) for dy in (0.0, 150.0)])
        for _ in range(3)
    ]
    ang = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
    disk = convex_hull(np.column_stack([d + 499.0 * np.cos(ang), d + 499.0 * np.sin(ang)]))
    base = build(small, p, diameter_bound=d)
    grown = build(small + [disk], p, diameter_bound=d)
    delta_h = grown.counts - base.counts
    assert np.array_equal(delta_h, np.ones(9)), "the added body must touch all 9 components"

    params = PrivacyParams.for_partition(eps, d, p)
    assert params.lam == 9.0
    # the mechanism draws exactly this stream (spot-check one seed end to end)
    probe = perturb(base, params, RandomSource(7))
    stream = np.maximum(base.counts + RandomSource(7).laplace_at(params.lam, 0, 9), 0.0)
    assert np.array_equal(probe.counts, stream)

    m = 1_000_000
    noise_a = RandomSource(881).laplace_at(params.lam, 0, 9 * m).reshape(m, 9)
    noise_b = RandomSource(882).laplace_at(params.lam, 0, 9 * m).reshape(m, 9)
    p1 = float((noise_a >= 0.0).all(axis=1).mean())   # event under the grown database
    p2 = float((noise_b >= 1.0).all(axis=1).mean())   # same event under the base
    log_ratio = math.log(p1 / p2)
    sigma = math.sqrt((1 - p1) / (m * p1) + (1 - p2) / (m * p2))
    ok = abs(log_ratio - eps) <= 3 * sigma
    _verdict(
        capsys, 5, ok,
        "empirical odds ratio across neighbours matches epsilon",
        f"log-ratio {log_ratio:.4f} vs eps {eps:g}, 3 sigma {3 * sigma:.4f}",
    )


def test_06_inference_dominance_and_09_rounding_bound(capsys):
    """Criterion 6 and, riding the same 500 pipelines, criterion 9."""
    t0 = time.perf_counter()
    delta = 0.05
    p = build_partition(10.0, 10)
    bodies = _synthetic(40, 10.0, 1.0, seed=93)
    raw = build(bodies, p, diameter_bound=1.0)
    params = PrivacyParams.for_partition(1.0, 1.0, p)
    cs = build_constraints(p)
    bound = utility_bound_dp(delta, params.lam, p.size)

    l1_fail = 0
    round_fail = 0
    sup_hits = 0
    for i in range(500):
        noisy = perturb(raw, params, RandomSource(derive_seed(6500, i)))
        cons_l1, _ = infer(noisy, cs, objective="l1")
        if np.abs(cons_l1.counts - noisy.counts).sum() > np.abs(raw.counts - noisy.counts).sum() + 1e-9:
            l1_fail += 1
        if np.abs(round_counts(cons_l1).counts - cons_l1.counts).max() > 0.5:
            round_fail += 1
        cons_inf, _ = infer(noisy, cs, objective="linf")
        sup_hits += np.abs(cons_inf.counts - noisy.counts).max() <= bound + 1e-9

    ok6 = l1_fail == 0 and sup_hits / 500 >= 1.0 - delta
    _verdict(
        capsys, 6, ok6,
        "inferred counts never drift past the raw L1 distance; sup-norm within bound",
        f"l1 failures {l1_fail}/500, sup-norm rate {sup_hits / 500:.3f} "
        f"(need >= {1 - delta:g}), {time.perf_counter() - t0:.0f}s",
    )
    _verdict(
        capsys, 9, round_fail == 0,
        "rounding moves no count by more than 0.5 before repair",
        f"violations {round_fail}/500",
    )


def _lattice_feasible_minimum(h: np.ndarray) -> float:
    """Exact minimum of sum|x - h| over integer feasible points of a 2x2 grid.

    Faces and the vertex are enumerated outright (11^4 x 11). For fixed faces
    and vertex the edge block separates: each edge wants clip(h_e, v, U_e)
    with U_e the smaller incident face, and the alternating-sum cap
    sum(e) <= sum(f) + v charges exactly one unit of objective per unit of
    overshoot, because every feasible edge decrement costs one.
    """
    hf, he, hv = h[0:4], h[4:8], h[8]
    grids = np.indices((11, 11, 11, 11)).reshape(4, -1).T.astype(np.float64)
    upper = np.minimum(grids[:, [0, 1, 0, 2]], grids[:, [2, 3, 1, 3]])
    face_cost = np.abs(grids - hf).sum(axis=1)
    face_sum = grids.sum(axis=1)
    best = math.inf
    for v in range(11):
        feasible = (upper.min(axis=1) >= v) & (face_sum >= 3 * v)
        if not feasible.any():
            continue
        e_star = np.clip(np.broadcast_to(he, upper.shape), v, upper)
        overshoot = np.maximum(0.0, e_star.sum(axis=1) - (face_sum + v))
        obj = face_cost + abs(v - hv) + np.abs(e_star - he).sum(axis=1) + overshoot
        best = min(best, float(obj[feasible].min()))
    return best


def test_07_solver_beats_the_integer_lattice(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    p = build_partition(2.0, 2)
    cs = build_constraints(p)
    worst_gap = -math.inf
    dirty = 0
    for _ in range(100):
        h = rng.integers(0, 11, p.size).astype(np.float64)
        noisy = EulerHistogram(p, h, HistogramState.NOISY)
        cons, _ = infer(noisy, cs)
        lp_obj = float(np.abs(cons.counts - noisy.counts).sum())
        worst_gap = max(worst_gap, lp_obj - _lattice_feasible_minimum(h))
        if verify_violations(cons, cs) != (0, 0, 0):
            dirty += 1
    ok = worst_gap <= 1e-9 and dirty == 0
    _verdict(
        capsys, 7, ok,
        "LP objective never exceeds the exhaustive integer optimum",
        f"worst gap {worst_gap:.2e}, constraint misses {dirty}/100, "
        f"{time.perf_counter() - t0:.0f}s",
    )


def _released(n: int, count: int, seed: int) -> tuple[EulerHistogram, EulerHistogram]:
    p = build_partition(float(n), n)
    bodies = _synthetic(count, float(n), 1.0, seed=seed)
    raw = build(bodies, p, diameter_bound=1.0)
    noisy = perturb(raw, PrivacyParams.for_partition(1.0, 1.0, p), RandomSource(seed))
    cons, _ = infer(noisy)
    out, _ = repair(round_counts(cons))
    return raw, out


def test_08_released_histograms_are_covert(capsys):
    t0 = time.perf_counter()
    bad = 0
    checked = 0
    for n, count in ((4, 25), (7, 60), (10, 120)):
        _, released = _released(n, count, seed=800 + n)
        if verify_violations(released, build_constraints(released.partition)) != (0, 0, 0):
            bad += 1
        totals = all_rectangle_counts(released)[valid_region_mask(n)]
        checked += totals.size
        if (totals < 0).any() or not np.array_equal(totals, np.floor(totals)):
            bad += 1

    _, released = _released(20, 400, seed=820)
    if verify_violations(released, build_constraints(released.partition)) != (0, 0, 0):
        bad += 1
    rng = np.random.default_rng(55)
    for _ in range(10_000):
        r0, c0 = rng.integers(0, 20, 2)
        qr = QueryRegion(int(r0), int(rng.integers(r0, 20)), int(c0), int(rng.integers(c0, 20)))
        value = query(released, qr)
        checked += 1
        if not isinstance(value, int) or value < 0:
            bad += 1
    _verdict(
        capsys, 8, bad == 0,
        "all released rectangle counts are non-negative integers",
        f"{checked} rectangles over n in (4, 7, 10, 20), "
        f"{bad} offenders, {time.perf_counter() - t0:.0f}s",
    )


def _ladder_ok(values: list[float]) -> bool:
    # weak decrease, with proportional-plus-absolute jitter slack
    return all(b <= a * 1.05 + 0.01 for a, b in zip(values, values[1:]))


@pytest.fixture(scope="module")
def trend_runs():
    """The full sweep grid behind criterion 10, computed once.

    The percent-ladder runs use enough bodies for counts to clear the noise
    floor (lam = 25 at eps = 1): constrained inference only pays off once
    there is signal to be consistent with, which is the regime the technique
    targets. The monotonicity sweeps stay smaller; their trends are about
    the noise scale, not the data.
    """
    area, bound = 20000.0, 2000.0

    def run(kind, count, cell, eps, percents, reps):
        return run_query_experiment(ExperimentConfig(
            area_side=area, diameter_bound=bound, epsilon=eps, seed=2101,
            cell_side=cell, synthetic=kind, count=count, repetitions=reps,
            qr_percents=percents,
        ))

    t0 = time.perf_counter()
    runs: dict[tuple, object] = {}
    for kind, big in (("concentrated", 120_000), ("uniform", 12_000)):
        runs[kind, "ladder"] = run(kind, big, 1000.0, 1.0, (10.0, 25.0, 50.0, 100.0), 24)
        for eps in (0.1, 0.4, 0.7, 1.0):
            runs[kind, "eps", eps] = run(kind, 4000, 1000.0, eps, (50.0,), 30)
        for cell in (2000.0 / 3.0, 2000.0):
            runs[kind, "cell", cell] = run(kind, 4000, cell, 1.0, (50.0,), 30)
        runs[kind, "cell", 1000.0] = runs[kind, "eps", 1.0]
    runs["elapsed"] = time.perf_counter() - t0
    return runs


def test_10_error_trends(capsys, trend_runs):
    kinds = ("concentrated", "uniform")
    algs = ("DP", "LP", "R")
    percents = (10, 25, 50, 100)
    broken: list[str] = []

    for kind in kinds:
        ladder = trend_runs[kind, "ladder"]
        for alg in algs:
            if not _ladder_ok([ladder.median_error(f"{p}%", alg) for p in percents]):
                broken.append(f"{kind}/{alg} vs region size")
            eps_series = [
                trend_runs[kind, "eps", e].median_error("50%", alg)
                for e in (0.1, 0.4, 0.7, 1.0)
            ]
            if not _ladder_ok(eps_series):
                broken.append(f"{kind}/{alg} vs epsilon")
            cell_series = [
                trend_runs[kind, "cell", c].median_error("50%", alg)
                for c in (2000.0 / 3.0, 1000.0, 2000.0)
            ]
            if not _ladder_ok(cell_series):
                broken.append(f"{kind}/{alg} vs cell side")

    wins = total = 0
    for kind in kinds:
        ladder = trend_runs[kind, "ladder"]
        for p in percents:
            dp = ladder.median_error(f"{p}%", "DP")
            for alg in ("LP", "R"):
                total += 1
                wins += ladder.median_error(f"{p}%", alg) <= dp + 1e-9
    dominant = wins / total >= 0.8

    ok = not broken and dominant
    _verdict(
        capsys, 10, ok,
        "errors shrink with region size, epsilon, and cell side; inference wins",
        f"broken trends {broken or 'none'}, inference beats noisy on "
        f"{wins}/{total} ladder configs, {trend_runs['elapsed']:.0f}s",
    )


def test_11_end_to_end_error_bound(capsys):
    t0 = time.perf_counter()
    delta = 0.05
    area, cell, bound_m, eps = 20000.0, 2000.0, 2000.0, 1.0
    p = build_partition(area, 10)
    bodies = _synthetic(3000, area, bound_m, seed=94)
    raw = build(bodies, p, diameter_bound=bound_m)
    params = PrivacyParams.for_partition(eps, bound_m, p)
    cs = build_constraints(p)
    bound = utility_bound_end_to_end(delta, eps, bound_m, cell, area)
    assert 160.0 < bound < 161.0  # pins the parameter translation

    hits = 0
    for i in range(200):
        noisy = perturb(raw, params, RandomSource(derive_seed(1100, i)))
        cons, _ = infer(noisy, cs, objective="linf")
        released = round_counts(cons)
        hits += np.abs(released.counts - raw.counts).max() <= bound
    ok = hits / 200 >= 1.0 - delta
    _verdict(
        capsys, 11, ok,
        "full-pipeline sup-norm error stays within the closed-form bound",
        f"rate {hits / 200:.3f} vs bound {bound:.1f}, {time.perf_counter() - t0:.0f}s",
    )


def test_12_pipeline_speed_at_scale(capsys):
    bodies = _synthetic(10_000, 20000.0, 2000.0, seed=95)
    p = build_partition(20000.0, 20)
    t0 = time.perf_counter()
    raw = build(bodies, p, diameter_bound=2000.0)
    noisy = perturb(raw, PrivacyParams.for_partition(1.0, 2000.0, p), RandomSource(12))
    cons, _ = infer(noisy)
    released, _ = repair(round_counts(cons))
    elapsed = time.perf_counter() - t0
    assert released.state is HistogramState.ROUNDED
    _verdict(
        capsys, 12, elapsed < 60.0,
        "10k-body pipeline at n=20 finishes inside a minute",
        f"{elapsed:.1f}s single-threaded",
    )
