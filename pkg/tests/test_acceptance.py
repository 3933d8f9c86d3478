"""Acceptance gate: ten end-to-end properties with stated tolerances.

Each test prints one `ACCEPT <n> <name>: PASS` line when its assertions
hold, so `pytest -v tests/test_acceptance.py` doubles as the checklist.
"""

import json
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from satml import synth
from satml.cli import main as cli_main
from satml.data import Dataset
from satml.evaluation import evaluate, run_whatif, split, WhatIfSpec
from satml.integral import (bin_irem, build_per_revolution, build_positional,
                            detect_crossings, phase_to_altitude)
from satml.learners import (ModelSpec, load_model, predict, save_model, train)
from satml.learners.fcnn import FCNNModel
from satml.learners.gboost import Booster
from satml.importance import (genie3_importance, permutation_importance,
                              symbolic_importance)
from satml.runs import execute_run
from satml.service import create_app
from satml.synth import gen_integral_tables, gen_per_rev_dataset

MIN_MS = 60_000
HOUR_MS = 3_600_000


_reporter = None


@pytest.fixture(autouse=True, scope="module")
def _terminal_reporter(request):
    global _reporter
    _reporter = request.config.pluginmanager.get_plugin("terminalreporter")


def ok(n, name):
    # Write through the terminal reporter as well so the line survives
    # output capture under a plain `pytest -v` run.
    line = f"ACCEPT {n} {name}: PASS"
    print(f"\n{line}")
    if _reporter is not None:
        _reporter.write_line(line)


def test_accept_01_crossing_detection():
    """Square-wave entries/exits recovered within one bin for 100 revs."""
    start = time.monotonic()
    # 101 revolutions so that 100 of them have an attributable entry phase
    # (the entry before the very first perigee precedes every revolution)
    orbit, irem, eclipse, revs, truth = gen_integral_tables(
        seed=42, n_revs=101, cadence_s=8.0,
        in_belt_counts=5000.0, out_counts=50.0)
    labels = detect_crossings(bin_irem(irem, 15.0), revs)
    width = 15 * MIN_MS
    hits = 0
    for i, rev in enumerate(revs[1:], start=1):
        entry, exit_ = truth[rev.rev]
        if (abs(labels.entry_ms[i] - entry) <= width
                and abs(labels.exit_ms[i] - exit_) <= width
                and not np.isnan(labels.entry_phase[i])
                and not np.isnan(labels.exit_phase[i])):
            hits += 1
    elapsed = time.monotonic() - start
    assert hits == 100
    assert elapsed < 10.0
    ok(1, f"crossing-detection (100/100, {elapsed:.1f}s)")


def test_accept_02_kepler_conversion():
    """phase_to_altitude vs bisection oracle, 1e-9 relative; exact apsides."""
    from tests_oracles import bisection_altitude

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        e = rng.uniform(0.0, 0.9)
        phase = rng.uniform(0.0, 1.0)
        rev = _rev_with_ecc(e)
        got = phase_to_altitude(phase, rev)
        want = bisection_altitude(phase, rev)
        worst = max(worst, abs(got - want) / max(abs(want), 1.0))
    assert worst < 1e-9
    for e in (0.0, 0.3, 0.9):
        rev = _rev_with_ecc(e)
        assert phase_to_altitude(0.0, rev) == pytest.approx(
            rev.perigee_alt_km, abs=1e-9)
        assert phase_to_altitude(0.5, rev) == pytest.approx(
            rev.apogee_alt_km, abs=1e-9)
    ok(2, f"kepler-conversion (max rel err {worst:.2e})")


def _rev_with_ecc(e):
    from satml.integral import EARTH_RADIUS_KM, Revolution

    apo_alt = 150_000.0
    a = (apo_alt + EARTH_RADIUS_KM) / (1 + e)
    return Revolution(
        rev=1, perigee_ms=0, perigee_alt_km=a * (1 - e) - EARTH_RADIUS_KM,
        apogee_ms=115_200_000, apogee_alt_km=apo_alt, perigee_lon_deg=0.0,
        semimajor_km=a, eccentricity=e, inclination_deg=52.0, raan_deg=0.0,
        argp_deg=0.0, period_s=230_400.0, period_diff_s=0.0)


def test_accept_03_per_revolution_learning():
    """Forest RMSE <= 2 sigma and >= 30% below the mean baseline."""
    start = time.monotonic()
    sigma = 0.01
    ds = gen_per_rev_dataset(n=200, sigma=sigma, seed=5)
    train_ds, test_ds = split(ds, "holdout", 0.8)
    assert train_ds.n_rows == 160 and test_ds.n_rows == 40
    model = train(train_ds, ModelSpec("forest", {"n_trees": 100,
                                                 "min_leaf": 2}, seed=0))
    rep = evaluate(model, test_ds)
    for j, t in enumerate(ds.target_names):
        rmse = rep.per_target[t]["rmse"]
        base = float(np.sqrt(np.mean(
            (test_ds.Y[:, j] - train_ds.Y[:, j].mean()) ** 2)))
        assert rmse <= 2 * sigma, (t, rmse)
        assert rmse <= 0.7 * base, (t, rmse, base)
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    ok(3, f"per-revolution-learning ({elapsed:.1f}s)")


def test_accept_04_representation_contract():
    """One per-rev row per revolution; positional rows = ceil(duration/15min)."""
    t0 = 1_356_998_400_000  # multiple of the 15-minute bin width
    from satml.integral import EARTH_RADIUS_KM, Revolution

    def rev(num, perigee):
        e, apo = 0.8, 150_000.0
        a = (apo + EARTH_RADIUS_KM) / (1 + e)
        return Revolution(num, perigee, a * (1 - e) - EARTH_RADIUS_KM,
                          perigee + 32 * HOUR_MS, apo, 0.0, a, e, 52.0, 0.0,
                          0.0, 64 * 3600.0, 0.0)

    revs = [rev(1, t0), rev(2, t0 + 64 * HOUR_MS)]
    ts = np.arange(t0, t0 + 128 * HOUR_MS, 8000)
    from satml.ingest import ChannelKind, RawTable

    irem = RawTable(ChannelKind.IREM, {
        "ut_ms": ts.astype(np.int64),
        "count_rate": np.full(ts.size, 50.0)})
    binned = bin_irem(irem, 15.0)
    labels = detect_crossings(binned, revs)
    per_rev = build_per_revolution(revs, labels)
    assert per_rev.n_rows == 2
    pos, dropped = build_positional(revs, binned)
    in_first = (pos.time_index >= t0) & (pos.time_index < revs[1].perigee_ms)
    expected = int(np.ceil(64 * HOUR_MS / (15 * MIN_MS)))  # 256
    assert expected == 256
    assert int(in_first.sum()) == expected
    ok(4, "representation-contract (1 per-rev row, 256 positional rows)")


def test_accept_05_fcnn_gradients():
    """Analytic gradients vs central finite differences at 10 points."""
    rng = np.random.default_rng(12)
    X = rng.normal(0, 1, (16, 4))
    Y = rng.normal(0, 1, (16, 3))
    worst = 0.0
    for trial in range(10):
        m = FCNNModel(hidden=(7, 5), activation="tanh", seed=trial)
        m.init_params(4, 3)
        theta = m.get_flat_params() + rng.normal(0, 0.1, m.get_flat_params().size)
        m.set_flat_params(theta)
        analytic = m.flat_grads(X, Y)
        eps = 1e-6
        fd = np.empty_like(theta)
        for i in range(theta.size):
            up, dn = theta.copy(), theta.copy()
            up[i] += eps
            dn[i] -= eps
            m.set_flat_params(up)
            lu = m.loss_and_grads(X, Y)[0]
            m.set_flat_params(dn)
            ld = m.loss_and_grads(X, Y)[0]
            fd[i] = (lu - ld) / (2 * eps)
            m.set_flat_params(theta)
        rel = np.abs(analytic - fd) / np.maximum(np.abs(fd), 1e-8)
        worst = max(worst, float(rel.max()))
    assert worst <= 1e-4
    ok(5, f"fcnn-gradients (max rel err {worst:.2e})")


def test_accept_06_quantile_boosting():
    """Median boosting on {1, 2, 100} converges to 2; loss non-increasing."""
    X = np.zeros((3, 1))
    y = np.array([1.0, 2.0, 100.0])
    b = Booster(loss="quantile", alpha=0.5, n_rounds=50,
                learning_rate=0.5).fit(X, y)
    pred = b.predict(np.zeros((1, 1)))[0]
    assert abs(pred - 2.0) <= 1e-2
    losses = b.train_loss
    assert all(l2 <= l1 + 1e-12 for l1, l2 in zip(losses, losses[1:]))
    ok(6, f"quantile-boosting (pred {pred:.4f})")


def test_accept_07_importance_sanity():
    """All three scores rank x1 first; zero for never-split; subset-local."""
    base = synth.gen_linear_dataset(n=300, n_decoys=5, slope=3.0, noise=0.1,
                                    seed=21)
    # add a constant column that can never be split on
    X = np.column_stack([base.X, np.zeros(base.n_rows)])
    ds = Dataset(X, base.Y, base.feature_names + ["const"],
                 base.target_names, {**base.categories, "const": "DECOY"},
                 time_index=base.time_index)
    model = train(ds, ModelSpec("forest", {"n_trees": 20, "min_leaf": 5},
                                seed=2))
    reports = {
        "permutation": permutation_importance(model, ds, repeats=3, seed=0),
        "genie3": genie3_importance(model, ds),
        "symbolic": symbolic_importance(model, ds),
    }
    for kind, rep in reports.items():
        ranked = sorted(rep.aggregate, key=rep.aggregate.get, reverse=True)
        assert ranked[0] == "x1", kind
    for kind in ("genie3", "symbolic"):
        assert reports[kind].aggregate["const"] == 0.0
    # subset locality: perturbing rows outside the subset changes nothing
    sub = np.arange(60)
    before = genie3_importance(model, ds, subset=sub).aggregate
    mutated = ds.take(np.arange(ds.n_rows))
    mutated.X[100:] *= 50.0
    mutated.Y[100:] += 1e6
    after = genie3_importance(model, mutated, subset=sub).aggregate
    assert before == after
    ok(7, "importance-sanity")


def test_accept_08_masking():
    """Masked metrics on the 3-row hand case; global/local exclusion rules."""
    from satml.data import exclude_missing_targets
    from tests_oracles import constant_metrics

    rep = constant_metrics(pred=[2.0], Y=[[1.0], [np.nan], [3.0]])
    assert rep.per_target["t0"]["mae"] == pytest.approx(1.0)
    assert rep.per_target["t0"]["rmse"] == pytest.approx(1.0)
    assert rep.per_target["t0"]["count"] == 2

    Y = np.array([[1.0, np.nan], [2.0, 5.0], [np.nan, 6.0], [3.0, 7.0]])
    ds = Dataset(np.arange(4, dtype=float)[:, None], Y, ["f"], ["a", "b"],
                 {"f": "SAA"}, time_index=np.arange(4, dtype=np.int64))
    assert exclude_missing_targets(ds, "global").n_rows == 2
    rows = exclude_missing_targets(ds, "local")
    assert list(rows[0]) == [0, 1, 3]
    assert list(rows[1]) == [1, 2, 3]
    ok(8, "masking")


def test_accept_09_reproducibility(mex_run_config, tmp_path):
    """CLI and service produce byte-identical digests; save/load identical."""
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(mex_run_config))
    res = CliRunner().invoke(cli_main, ["train", "--config", str(cfg_path),
                                        "--out", str(tmp_path / "cli")])
    assert res.exit_code == 0, res.output
    cli_summary = json.loads((tmp_path / "cli" / "summary.json").read_text())

    with TestClient(create_app(tmp_path / "store")) as client:
        run_id = client.post(
            "/runs", json={"config": mex_run_config}).json()["run_id"]
        record = client.app.state.store.wait(run_id)
        assert record["state"] == "done", record["error"]
        svc_meta = client.get(
            f"/runs/{run_id}/artifacts/metafile").content
    assert record["summary"]["model_digest"] == cli_summary["model_digest"]
    assert svc_meta == (tmp_path / "cli" / "metafile.json").read_bytes()

    model = load_model(tmp_path / "cli" / "model.json")
    save_model(model, tmp_path / "again.json")
    loaded = load_model(tmp_path / "again.json")
    rng = np.random.default_rng(3)
    Xq = rng.normal(0, 1, (100, len(model.feature_names)))
    np.testing.assert_array_equal(predict(model, Xq), predict(loaded, Xq))
    ok(9, "reproducibility")


def test_accept_10_mex_shape(mex_run_config, tmp_path):
    """33 NPWD targets, tagged features, replayable metafile, what-if base."""
    summary = execute_run(mex_run_config, tmp_path / "base")
    meta = json.loads((tmp_path / "base" / "metafile.json").read_text())
    targets = meta["scaler"]["target_names"]
    assert len(targets) == 33
    assert all(t.startswith("NPWD") for t in targets)
    cats = json.loads((tmp_path / "base" / "categories.json").read_text())
    assert set(cats.values()) == {"SAA", "DMOP", "FTL", "EVT", "LT"}
    # replay from the metafile's embedded config
    replay = execute_run(meta["config"], tmp_path / "replay")
    assert replay["model_digest"] == summary["model_digest"]
    assert replay["metafile_sha256"] == summary["metafile_sha256"]
    # what-if with empty exclusions reproduces the base digests
    report = run_whatif(meta["config"], WhatIfSpec(), tmp_path / "wi",
                        base_summary=summary)
    assert report["variant"]["model_digest"] == summary["model_digest"]
    assert report["variant"]["dataset_digest"] == summary["dataset_digest"]
    ok(10, "mex-shape")
