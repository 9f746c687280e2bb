import csv
import math
import os
import subprocess

import numpy as np
import pytest

import irlad

SMALL = {
    "min_length": "10",
    "num_heads": "2",
    "outer_iterations": "2",
    "inner_iterations": "2",
    "rollouts_per_iteration": "3",
    "demo_batch": "2",
    "background_batch": "4",
    "trunk_widths": "6",
    "seed": "5",
}


def write_geolife(root, users, tracks, points):
    for u, user in enumerate(users):
        d = root / "Data" / user / "Trajectory"
        d.mkdir(parents=True)
        for k in range(tracks):
            with open(d / f"2008102{u}0{k}0000.plt", "w") as f:
                f.write("Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n")
                f.write("0,2,255,My Track,0,0,2,8421376\n0\n")
                for i in range(points):
                    lat = 39.9 + 0.01 * u + 2e-5 * i + 1e-5 * math.sin(0.3 * i + k)
                    lon = 116.3 + 0.01 * k + 3e-5 * i * (-1 if u % 2 else 1)
                    sec = 5 * i
                    hms = f"{1 + k + sec // 3600:02d}:{(sec // 60) % 60:02d}:{sec % 60:02d}"
                    f.write(f"{lat:.6f},{lon:.6f},0,100,39744.0,2008-10-2{u},{hms}\n")


def sets(extra=None):
    out = []
    for k, v in {**SMALL, **(extra or {})}.items():
        out += ["--set", f"{k}={v}"]
    return out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    write_geolife(root, ["000", "001"], 3, 24)
    assert irlad.run(["ingest", *sets({"geolife_dir": str(root)}), "--run-dir", str(root / "ingest")]) == 0
    assert irlad.run(["train", *sets({"demos": str(root / "ingest")}), "--run-dir", str(root / "train")]) == 0
    return root


def test_metrics_and_roc():
    m = irlad.metrics(84, 154, 16, 0)
    assert m["precision"] == pytest.approx(84 / 238)
    assert m["recall"] == pytest.approx(84 / 100)
    assert m["f1"] == pytest.approx(2 * 84 / (2 * 84 + 154 + 16))
    assert irlad.metrics(0, 0, 3)["precision"] == 0.0
    assert irlad.roc_area([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert irlad.roc_area([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == pytest.approx(0.0)


def test_gradient_check():
    ok = irlad.gradient_check(10000, 0)
    assert ok["pass"] and ok["max_z"] <= 3.0
    assert ok["exact"].shape == ok["estimate"].shape == (4, 2)
    bad = irlad.gradient_check(10000, 0, corrupt=True)
    assert not bad["pass"]


def test_usage_error_code():
    assert irlad.run(["frobnicate"]) == 1
    assert irlad.run(["ingest", "--set", "no_such_key=1"]) == 1


def test_model_scores_match_cli(pipeline):
    model = irlad.Model.load(str(pipeline / "train" / "model_000.json"))
    assert model.agent_id == "000"
    assert model.seed == 5
    assert model.num_heads == 2
    assert model.stats["std"] > 0

    trajs = irlad.read_canonical(str(pipeline / "ingest" / "001.csv"))
    assert len(trajs) == 3
    obs = np.vstack([t["observations"] for t in trajs])
    assert obs.shape == (72, 7)

    s = model.score(obs)
    mean, std = model.ensemble(obs)
    np.testing.assert_allclose(s["reward_mean"], mean)
    np.testing.assert_allclose(s["reward_std"], std)
    expected_n = (mean - model.stats["mean"]) / model.stats["std"]
    np.testing.assert_allclose(s["normality"], expected_n, rtol=1e-12, atol=1e-12)

    out = pipeline / "scores.csv"
    assert irlad.run(["score", "--model", str(pipeline / "train" / "model_000.json"),
                      "--input", str(pipeline / "ingest" / "001.csv"), "--out", str(out)]) == 0
    with open(out) as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    assert len(rows) == 72
    np.testing.assert_allclose([float(r["reward_mean"]) for r in rows], mean, rtol=1e-9, atol=1e-12)
    assert [r["flag"] for r in rows] == s["flag"]


def test_bad_observation_shape(pipeline):
    model = irlad.Model.load(str(pipeline / "train" / "model_000.json"))
    with pytest.raises(ValueError):
        model.score(np.zeros((3, 5)))


def test_cli_binary_agrees(pipeline):
    exe = os.environ.get("IRLAD_CLI")
    if not exe:
        pytest.skip("IRLAD_CLI not set")
    r = subprocess.run([exe, "frobnicate"], capture_output=True)
    assert r.returncode == irlad.run(["frobnicate"])
