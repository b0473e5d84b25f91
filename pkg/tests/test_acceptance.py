"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Run `pytest tests/test_acceptance.py -v -s` to see the lines as they
complete. Everything here exercises the installed package only; no
frontend is required.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from lumen import assess, causal, cli, cluster, losses, render, scenario
from lumen.assess import InfluenceParams, influence
from lumen.ingest import SyntheticSpec, generate_synthetic_city
from lumen.losses import FeatureBatch, LatentStats
from tests.conftest import brute_force_indices, city_of, poi_at_offset

ORACLE_D0 = 0.026596152026762179  # mpmath, 50 digits
ORACLE_D1500 = 0.016131381634609557


def check(name: str, parts: dict[str, bool]) -> None:
    ok = all(parts.values())
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")
    failed = [k for k, v in parts.items() if not v]
    assert ok, f"{name} failed: {failed}"


def dml_dgp(seed, n=5000, p=24, theta=0.5, noise_sd=0.1):
    """Confounded linear DGP; gamma = beta makes naive OLS biased by ~0.5."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    gamma = np.zeros(p)
    gamma[:4] = [0.5, -0.5, 0.5, 0.5]
    T = X @ gamma + rng.normal(size=n)
    Y = theta * T + X @ gamma + noise_sd * rng.normal(size=n)
    return causal.CausalDesign(category="synthetic", y=Y[:, None], t=T[:, None], x=X)


DML_GRID = (0.0, 1e-2, 1.0)


def test_influence_formula():
    t0 = time.time()
    parts = {}
    parts["value_d0"] = abs(influence(100.0, 0.0, 1500.0) - ORACLE_D0) < 1e-7
    parts["value_d1500"] = abs(influence(100.0, 1500.0, 1500.0) - ORACLE_D1500) < 1e-7
    rng = np.random.default_rng(0)
    ntl = rng.uniform(0.0, 500.0, size=10_000)
    d = rng.uniform(0.0, 5_000.0, size=10_000)
    d2 = d + rng.uniform(0.0, 2_000.0, size=10_000)
    scale = rng.uniform(0.1, 10.0, size=10_000)
    base = influence(ntl, d, 1500.0)
    parts["monotone"] = bool(np.all(influence(ntl, d2, 1500.0) <= base))
    scaled = influence(scale * ntl, d, 1500.0)
    parts["linear"] = bool(np.allclose(scaled, scale * base, rtol=1e-12, atol=0.0))
    parts["runtime_under_1s"] = (time.time() - t0) < 1.0
    check("influence-formula", parts)


def test_index_identities():
    parts = {}
    params = InfluenceParams()
    # singleton area
    city = city_of(poi_at_offset("r1", "residential", 100.0))
    [area] = assess.extract_areas(city, params)
    single = assess.compute_indices(area, city, params)
    parts["singleton_nld_zero"] = single.nld == 0.0 and single.nlsd == 0.0
    # constant influence set
    const_city = city_of(
        poi_at_offset("r1", "residential", 60.0),
        poi_at_offset("g1", "grass", 60.0),
    )
    [carea] = assess.extract_areas(const_city, params)
    parts["constant_nlsd_zero"] = assess.compute_indices(carea, const_city, params).nlsd == 0.0
    # 50-POI fixture: score identity, index-vs-naive agreement
    spec = SyntheticSpec(
        seed=11,
        n_residential=8,
        per_category_counts={"commercial": 14, "grass": 14, "industrial": 8, "retail": 6},
        per_category_ntl_means={
            "residential": 40, "commercial": 90, "grass": 25, "industrial": 70, "retail": 55,
        },
        area_extent=(2.32, 48.84, 2.345, 48.86),
    )
    fixture = generate_synthetic_city(spec)
    assert len(fixture.pois) == 50
    via_index = assess.assess_city(fixture, params, method="kdtree")
    via_naive = assess.assess_city(fixture, params, method="naive")
    oracle = brute_force_indices(fixture, params)
    parts["score_identity_exact"] = all(
        ind.score == ind.tnl + ind.nld + ind.nlsd for ind in via_index.values()
    )
    rel = lambda a, b: abs(a - b) / max(abs(a), abs(b), 1e-300)
    parts["index_vs_naive_1e12"] = all(
        rel(via_index[a].tnl, via_naive[a].tnl) < 1e-12
        and rel(via_index[a].nld, via_naive[a].nld) < 1e-12
        and rel(via_index[a].nlsd, via_naive[a].nlsd) < 1e-12
        for a in via_index
    )
    parts["matches_brute_force"] = all(
        rel(via_index[a].tnl, oracle[a][0]) < 1e-12 for a in oracle
    )
    check("index-identities", parts)


def test_kmeans():
    t0 = time.time()
    parts = {}
    rng = np.random.default_rng(5)
    # separated blobs recovered exactly
    blob = np.vstack([np.zeros((10, 3)), np.full((10, 3), 10.0)])
    blob += rng.normal(scale=1e-9, size=blob.shape)
    model = cluster.fit_kmeans(blob, k=2, seed=1)
    lows = {cluster.assign_level(model, p) for p in blob[:10]}
    highs = {cluster.assign_level(model, p) for p in blob[10:]}
    parts["blob_recovery"] = lows == {0} and highs == {1}
    # inertia non-increasing on every run we try
    mono = True
    for seed in range(10):
        pts = np.random.default_rng(seed).uniform(size=(60, 3))
        m = cluster.fit_kmeans(pts, k=4, seed=seed)
        trace = m.inertia_trace
        mono = mono and all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
    parts["inertia_monotone"] = mono
    # exhaustive-assignment oracle on 10 points, k=3
    pts = np.vstack(
        [
            rng.normal(loc=c, scale=0.3, size=(nc, 3))
            for c, nc in (((0, 0, 0), 4), ((3, 3, 0), 3), ((0, 4, 4), 3))
        ]
    )
    m = cluster.fit_kmeans(pts, k=3, seed=0)
    z = (pts - m.feature_means) / m.feature_sds
    tails = np.array(list(itertools.product(range(3), repeat=len(pts) - 1)), dtype=np.int8)
    labels = np.hstack([np.zeros((len(tails), 1), dtype=np.int8), tails])
    total_sq = float(np.sum(z * z))
    explained = np.zeros(len(labels))
    for j in range(3):
        mask = labels == j
        counts = mask.sum(axis=1)
        sums = mask @ z
        with np.errstate(invalid="ignore", divide="ignore"):
            explained += np.where(counts > 0, np.sum(sums * sums, axis=1) / counts, 0.0)
    best = total_sq - float(explained.max())
    parts["exhaustive_oracle_1e9"] = abs(m.inertia - best) < 1e-9
    parts["runtime_under_10s"] = (time.time() - t0) < 10.0
    check("kmeans", parts)


def test_elastic_net():
    parts = {}
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 4))
    Y = X @ rng.normal(size=(4, 3)) + 0.05 * rng.normal(size=(50, 3))
    model = causal.fit_multitask_elastic_net(X, Y, alpha=0.0, l1_ratio=0.5, tol=1e-10)
    Xi = np.column_stack([np.ones(50), X])
    W_ols = np.linalg.solve(Xi.T @ Xi, Xi.T @ Y)
    parts["alpha0_matches_ols_1e6"] = bool(
        np.allclose(model.coef, W_ols[1:], atol=1e-6)
        and np.allclose(model.intercepts, W_ols[0], atol=1e-6)
    )
    # orthonormal single-task design: soft-threshold closed form
    A = rng.normal(size=(64, 6))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    Xo = Q * math.sqrt(64)
    w_true = np.array([2.0, -1.0, 0.5, 0.0, 0.05, -0.3])
    y = Xo @ w_true + 0.01 * rng.normal(size=64)
    alpha = 0.2
    fit = causal.fit_multitask_elastic_net(Xo, y, alpha=alpha, l1_ratio=1.0, tol=1e-10)
    ols = Xo.T @ (y - y.mean()) / 64
    want = np.sign(ols) * np.maximum(np.abs(ols) - alpha, 0.0)
    parts["soft_threshold_1e6"] = bool(np.allclose(fit.coef[:, 0], want, atol=1e-6))
    traces = []
    for a in (0.0, 0.01, 0.5):
        m = causal.fit_multitask_elastic_net(X, Y, alpha=a, l1_ratio=0.5)
        traces.append(m.objective_trace)
    parts["objective_non_increasing"] = all(
        all(b <= x + 1e-10 * max(1.0, abs(x)) for x, b in zip(t, t[1:])) for t in traces
    )
    check("elastic-net", parts)


def test_dml_debiasing():
    t0 = time.time()
    parts = {}
    design = dml_dgp(seed=0)
    y_t, t_t = causal.cross_fit_residuals(design, folds=3, alpha_grid=DML_GRID, seed=0)
    est = causal.estimate_ate(y_t, t_t)
    theta = float(est.theta[0, 0])
    parts["estimate_in_band"] = 0.45 <= theta <= 0.55
    t, y = design.t[:, 0], design.y[:, 0]
    naive = float(t @ y / (t @ t))
    parts["naive_biased_over_0.1"] = abs(naive - 0.5) > 0.1
    cover = 0
    for seed in range(200):
        d = dml_dgp(seed)
        yt, tt = causal.cross_fit_residuals(d, folds=3, alpha_grid=DML_GRID, seed=seed)
        e = causal.estimate_ate(yt, tt)
        if e.ci_low[0, 0] <= 0.5 <= e.ci_high[0, 0]:
            cover += 1
    parts["ci_coverage_90pct"] = cover >= 180
    parts["runtime_under_5min"] = (time.time() - t0) < 300.0
    check("dml-debiasing", parts)


def test_null_calibration():
    quiet = 0
    for k in range(50):
        d = dml_dgp(2000 + k, theta=0.0)
        yt, tt = causal.cross_fit_residuals(d, folds=3, alpha_grid=DML_GRID, seed=k)
        est = causal.estimate_ate(yt, tt)
        if float(est.p_value[0, 0]) >= 0.1:
            quiet += 1
    check("null-calibration", {"no_stars_90pct": quiet >= 45})


def test_loss_kernels():
    parts = {}
    worst = losses.gradient_checks(seed=0, trials=100)
    parts["gradients_under_1e5"] = all(err < 1e-5 for err in worst.values())
    value, g_mu, g_lv = losses.kl_loss(LatentStats(np.zeros(4), np.zeros(4)))
    parts["kl_zero_at_origin"] = value == 0.0 and np.all(g_mu == 0) and np.all(g_lv == 0)
    ce = losses.class_ce_loss(np.full((1, 4), 0.25), np.array([[0.0, 0.0, 1.0, 0.0]]))
    parts["uniform_ce_ln4"] = abs(ce - math.log(4.0)) < 1e-9
    parts["total_default_exact"] = losses.total_loss((1.0, 1.0, 1.0, 1.0, 1.0)) == 4.001
    check("loss-kernels", parts)


@pytest.fixture(scope="module")
def scenario_setup():
    spec = SyntheticSpec(
        seed=7,
        n_residential=20,
        per_category_counts={"commercial": 40, "grass": 40, "industrial": 25, "retail": 15},
        per_category_ntl_means={
            "residential": 40, "commercial": 90, "grass": 25, "industrial": 70, "retail": 55,
        },
        area_extent=(2.30, 48.80, 2.34, 48.84),
    )
    city = generate_synthetic_city(spec)
    params = InfluenceParams()
    table = assess.assess_city(city, params)
    pts = np.array([[v.tnl, v.nld, v.nlsd] for v in table.values()])
    model = cluster.fit_kmeans(pts, k=4, seed=0)
    return city, params, model


def test_scenario_engine(scenario_setup):
    city, params, model = scenario_setup
    parts = {}
    areas = assess.extract_areas(city, params)
    first = sorted(a.center_poi_id for a in areas)[0]
    empty = scenario.run_scenario(
        city, scenario.InterventionSpec(()), params, model, map_areas=[first], map_size=32
    )
    parts["empty_spec_zero_deltas"] = all(
        d.d_tnl == 0.0 and d.d_nld == 0.0 and d.d_nlsd == 0.0 and d.d_score == 0.0
        for d in empty.areas
    )
    parts["empty_spec_kl_zero"] = empty.kl == 0.0
    factor = 0.65
    actions = tuple(
        scenario.ScaleNtl(c, factor)
        for c in ("brownfield", "commercial", "construction", "farmland",
                  "forest", "grass", "industrial", "residential", "retail")
    )
    scaled = scenario.run_scenario(
        city, scenario.InterventionSpec(actions), params, model, map_areas=[]
    )
    rel = lambda a, b: abs(a - b) / max(abs(a), abs(b), 1e-300)
    parts["global_scale_1e9"] = all(
        rel(d.after.tnl, factor * d.before.tnl) < 1e-9
        and (d.before.nld == 0.0 or rel(d.after.nld, factor * d.before.nld) < 1e-9)
        and (d.before.nlsd == 0.0 or rel(d.after.nlsd, factor * d.before.nlsd) < 1e-9)
        for d in scaled.areas
    )
    # identity intervention reproduces baseline map bytes
    [area] = [a for a in areas if a.center_poi_id == first]
    identity = scenario.apply_intervention(
        city, scenario.InterventionSpec((scenario.ScaleNtl("grass", 1.0),))
    )
    [area_i] = [a for a in assess.extract_areas(identity, params) if a.center_poi_id == first]
    base_bytes = render.ppm_bytes(render.render_area(area, city, params, width=64, height=64))
    id_bytes = render.ppm_bytes(render.render_area(area_i, identity, params, width=64, height=64))
    parts["identity_map_bytes_equal"] = base_bytes == id_bytes
    check("scenario-engine", parts)


def test_metrics():
    parts = {}
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(16, 16, 3))
    same = scenario.map_metrics(img, img.copy())
    parts["identical_images"] = (
        same["mae"] == 0.0 and math.isinf(same["psnr"]) and same["rase"] == 0.0
    )
    m = scenario.map_metrics(np.full((4, 4, 3), 0.5), np.full((4, 4, 3), 0.75))
    parts["psnr_12_0412"] = abs(m["psnr"] - 12.0412) < 1e-3
    ok = True
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        p = rng.integers(0, 50, size=n)
        q = rng.integers(0, 50, size=n)
        if p.sum() == 0:
            continue
        ok = ok and scenario.level_kl(p, q) >= 0.0
    parts["kl_nonnegative_1000"] = ok
    parts["kl_ln2"] = abs(scenario.level_kl([1, 0], [0.5, 0.5]) - math.log(2.0)) < 1e-9
    check("metrics", parts)


def test_pipeline_determinism_and_scale(tmp_path):
    parts = {}
    counts = (
        "commercial=9000,grass=9000,industrial=7000,retail=7000,"
        "brownfield=5000,construction=5500,farmland=5000,forest=5000"
    )
    means = (
        "residential=40,commercial=90,grass=25,industrial=70,retail=55,"
        "brownfield=5,construction=35,farmland=6,forest=2"
    )
    extent = "1.9583,48.6251,2.6417,49.0749"  # ~50 km x 50 km
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"actions": [{"op": "scale_ntl", "category": "grass", "factor": 0.5}]}))
    assess_times = []

    def run_once(tag):
        poi = tmp_path / f"poi_{tag}.csv"
        ws = tmp_path / f"ws_{tag}"
        assert cli.main([
            "synth", "--out", str(poi), "--seed", "101", "--n-residential", "10000",
            "--counts", counts, "--means", means, "--extent", extent,
        ]) == 0
        assert cli.main(["ingest", "--poi", str(poi), "--out", str(ws)]) == 0
        t0 = time.time()
        assert cli.main(["assess", "--workspace", str(ws)]) == 0
        assess_times.append(time.time() - t0)
        assert cli.main(["cluster", "--workspace", str(ws), "--seed", "7"]) == 0
        assert cli.main([
            "dml", "--workspace", str(ws), "--category", "grass",
            "--alpha-grid", "0.01,0.1", "--seed", "5",
        ]) == 0
        assert cli.main([
            "whatif", "--workspace", str(ws), "--spec", str(spec),
            "--map-areas", "residential-000000", "--map-size", "64",
        ]) == 0
        assert cli.main([
            "render", "--workspace", str(ws), "--area", "residential-000000", "--size", "64",
        ]) == 0
        return {
            name: (ws / name).read_bytes()
            for name in (
                "dataset.csv", "areas.json", "indices.csv", "levels.json",
                "ate.csv", "whatif.json", "maps/residential-000000.ppm",
            )
        }

    run_a = run_once("a")
    run_b = run_once("b")
    n_areas = len((tmp_path / "ws_a" / "indices.csv").read_text().splitlines()) - 1
    parts["city_has_10k_areas"] = n_areas == 10_000
    parts["assess_under_60s"] = max(assess_times) < 60.0
    parts["byte_identical_artifacts"] = all(run_a[k] == run_b[k] for k in run_a)
    check("pipeline-determinism-and-scale", parts)
