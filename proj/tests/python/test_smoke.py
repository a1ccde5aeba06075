"""End-to-end smoke tests for the python module and its CLI interop."""

import csv
import math
import os
import subprocess

import numpy as np
import pytest

import subpop

CLI = os.environ.get("SUBPOP_CLI")


def test_exports():
    for name in subpop.__all__:
        assert hasattr(subpop, name)


def test_simulate_layout():
    ds, truth = subpop.simulate(n1=200, n0=150, seed=3)
    assert len(ds) == 350
    assert ds.q == 4
    x, r, y, a = ds.to_arrays()
    assert x.shape == (350, 4)
    assert (r[:200] == 1).all() and (r[200:] == 0).all()
    assert np.isnan(y[200:]).all() and not np.isnan(y[:200]).any()
    assert set(truth) == set(range(200, 350))
    assert set(truth.values()) <= {0, 1}
    # The excluded cell never reaches the source.
    assert not ((r == 1) & (y == 1) & (a == 1)).any()


def test_simulate_reproducible():
    a1, _ = subpop.simulate(n1=60, n0=60, seed=9)
    a2, _ = subpop.simulate(n1=60, n0=60, seed=9)
    b, _ = subpop.simulate(n1=60, n0=60, seed=10)
    assert np.array_equal(a1.to_arrays()[0], a2.to_arrays()[0])
    assert not np.array_equal(a1.to_arrays()[0], b.to_arrays()[0])


def test_csv_round_trip(tmp_path):
    ds, _ = subpop.simulate(n1=50, n0=40, seed=5)
    path = str(tmp_path / "data.csv")
    ds.save_csv(path)
    back = subpop.Dataset.load_csv(path)
    for got, want in zip(back.to_arrays(), ds.to_arrays()):
        assert np.array_equal(got, want, equal_nan=True)


def test_from_arrays_round_trip():
    x = np.arange(12, dtype=float).reshape(6, 2)
    r = np.array([1, 1, 1, 0, 0, 0])
    y = np.array([0.0, 1.0, 0.0, np.nan, np.nan, np.nan])
    a = np.array([0, 0, 1, 0, 1, 1])
    ds = subpop.Dataset.from_arrays(x, r, y, a)
    x2, r2, y2, a2 = ds.to_arrays()
    assert np.array_equal(x2, x)
    assert np.array_equal(r2, r)
    assert np.array_equal(y2, y, equal_nan=True)
    assert np.array_equal(a2, a)
    counts = ds.counts()
    assert counts["n1"] == 3 and counts["n0"] == 3 and counts["n0a1"] == 2


def test_fit_rejects_excluded_cell():
    x = np.zeros((4, 1))
    r = np.array([1, 1, 1, 0])
    y = np.array([1.0, 0.0, 0.0, np.nan])
    a = np.array([1, 0, 1, 0])  # first row sits in the excluded cell
    ds = subpop.Dataset.from_arrays(x, r, y, a)
    with pytest.raises(subpop.Error):
        subpop.fit(ds)


def test_fit_predict_metrics():
    ds, truth = subpop.simulate(n1=1500, n0=1500, seed=11)
    model = subpop.fit(ds)
    props = model.proportions
    assert props["method"] == "kl+anchor"
    total = sum(props[k] for k in ("beta10", "beta00", "beta01", "beta11"))
    assert math.isclose(total, 1.0, abs_tol=1e-9)
    assert abs(props["beta10"] - 0.25) < 0.15

    pred = model.predict(ds)
    n0 = len(truth)
    assert all(len(pred[k]) == n0 for k in pred)
    assert ((pred["eta"] >= 0) & (pred["eta"] <= 1)).all()
    y_true = [truth[int(i)] for i in pred["row_index"]]
    acc = subpop.accuracy(list(map(int, pred["label_eta"])), y_true)
    assert acc > 0.6
    assert 0.0 <= subpop.f1(list(map(int, pred["label_eta"])), y_true) <= 1.0


def test_fit_logistic_numpy():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(-2, 1, (80, 2)), rng.normal(2, 1, (80, 2))])
    y = [0] * 80 + [1] * 80
    m = subpop.fit_logistic(x, y)
    p = m.predict_proba(np.array([[-2.0, -2.0], [2.0, 2.0]]))
    assert p[0] < 0.2 and p[1] > 0.8
    mw = subpop.fit_logistic(x, y, weights=[1.0] * 160)
    assert np.allclose(m.predict_proba(x), mw.predict_proba(x), atol=1e-9)
    m2 = subpop.ProbModel.from_json(m.to_json())
    assert np.array_equal(m.predict_proba(x), m2.predict_proba(x))


def test_partition_excluded_cell_stays_unlabeled():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(400, 2))
    y = np.repeat([0.0, 0.0, 1.0, 1.0], 100)
    a = np.tile(np.repeat([0, 1], 100), 2)
    pool = subpop.Dataset.from_arrays(x, np.ones(400, dtype=int), y, a)
    ds, truth = subpop.partition(pool, rate_a=0.5, rate_b=0.5, rate_c=0.5, seed=1)
    x2, r2, y2, a2 = ds.to_arrays()
    assert np.array_equal(x2, x)
    assert not ((r2 == 1) & (y2 == 1) & (a2 == 1)).any()
    assert (r2[(y == 1) & (a == 1)] == 0).all()
    for i, y_true in truth.items():
        assert r2[i] == 0 and math.isnan(y2[i]) and y_true == y[i]


def test_risk_report():
    ds, _ = subpop.simulate(n1=1000, n0=1000, seed=21)
    model = subpop.fit(ds)
    rep = subpop.risk_report(model, ds, loss="zero_one", h="eta")
    assert rep["loss"] == "zero_one"
    assert 0.0 <= rep["risk_a0_weighted"] <= 1.0
    assert 0.0 <= rep["risk_overall"] <= 1.0
    assert rep["weights"]["w1"] > 0.0


def test_experiment_small():
    rows, summary = subpop.experiment(
        {"n1": "250", "n0": "250", "replications": "2", "seed": "4"}
    )
    assert len(rows) == 12
    assert {r["tag"] for r in rows} == {"eta", "eta1", "eta0", "xi", "xi1", "xi0"}
    assert summary["n_replications"] == 2
    assert summary["n_failed"] == 0
    assert 0.0 <= summary["tags"]["eta"]["accuracy"]["mean"] <= 1.0


@pytest.mark.skipif(CLI is None, reason="SUBPOP_CLI not set")
def test_cli_model_interop(tmp_path):
    data = str(tmp_path / "data.csv")
    model_path = str(tmp_path / "model.json")
    pred_path = str(tmp_path / "pred.csv")
    ds, _ = subpop.simulate(n1=600, n0=600, seed=33)
    ds.save_csv(data)

    subprocess.run([CLI, "fit", "--data", data, "--out", model_path], check=True)
    subprocess.run(
        [CLI, "predict", "--model", model_path, "--data", data, "--out", pred_path],
        check=True,
    )
    with open(pred_path, newline="") as f:
        cli_eta = np.array([float(row["eta"]) for row in csv.DictReader(f)])

    model = subpop.Model.load(model_path)
    pred = model.predict(ds)
    assert np.array_equal(pred["eta"], cli_eta)

    # And the reverse direction: the CLI accepts a python-saved model.
    model.save(str(tmp_path / "model2.json"))
    subprocess.run(
        [CLI, "predict", "--model", str(tmp_path / "model2.json"),
         "--data", data, "--out", str(tmp_path / "pred2.csv")],
        check=True,
    )
    with open(str(tmp_path / "pred2.csv"), newline="") as f:
        cli_eta2 = np.array([float(row["eta"]) for row in csv.DictReader(f)])
    assert np.array_equal(cli_eta2, cli_eta)
