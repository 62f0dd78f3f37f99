import json
import math

import numpy as np
import pytest

from hadachain import pipeline as pl

ENDPOINT_KEYS = {"k", "geometry", "volumes", "bounds", "covering", "chaining", "shell", "gaussian", "flags"}
FLAG_KEYS = {"lemma1", "lemma2", "lemma4", "theorem1", "theorem2", "R_hada"}


def small_config(**kw):
    base = dict(m=4, samples_volume=20_000, endpoints=["k1"], seed=5)
    base.update(kw)
    return pl.default_config(**base)


@pytest.fixture(scope="module")
def small_report(tmp_path_factory):
    side = tmp_path_factory.mktemp("side")
    return pl.run_pipeline(small_config(), side_dir=side), side


def _valid_flag(f):
    return f in (pl.PASS, pl.FAIL) or (isinstance(f, str) and f.startswith("not-assertable: ") and len(f) > 16)


@pytest.mark.parametrize("bad", [
    {"samples_volume": 10},
    {"trials_gaussian": 5},
    {"eps_grid_size": 1},
    {"hull_tol": 0.0},
    {"seed": -1},
    {"endpoints": []},
    {"endpoints": ["k3"]},
    {"k1": 2.0, "k2": 1.0},
])
def test_config_rejects(bad):
    with pytest.raises(pl.ConfigError):
        pl.default_config(**bad)


def test_config_unknown_key():
    with pytest.raises(pl.ConfigError, match="unknown"):
        pl.ExperimentConfig.from_dict({"m": 4, "colour": "red"})


def test_config_roundtrip(tmp_path):
    cfg = small_config(lam=0.5)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = pl.ExperimentConfig.load(path)
    assert back == cfg
    assert "lambda" in cfg.to_dict() and "lam" not in cfg.to_dict()


def test_config_load_errors(tmp_path):
    with pytest.raises(pl.ConfigError):
        pl.ExperimentConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "list.json"
    bad.write_text("[1, 2]")
    with pytest.raises(pl.ConfigError):
        pl.ExperimentConfig.load(bad)
    assert pl.ExperimentConfig.load("default") == pl.ExperimentConfig()


def test_combine_flags():
    assert pl.combine_flags([pl.PASS, pl.PASS]) == pl.PASS
    assert pl.combine_flags([pl.PASS, pl.FAIL, pl.not_assertable("x")]) == pl.FAIL
    assert pl.combine_flags([pl.PASS, pl.not_assertable("x")]) == pl.not_assertable("x")
    mixed = pl.combine_flags([pl.not_assertable("a"), pl.not_assertable("b")])
    assert mixed.startswith("not-assertable: mixed")


def test_schema(small_report):
    rep, _ = small_report
    assert set(rep.data) == {"config", "seed", "endpoints", "flags", "overall"}
    assert set(rep.data["endpoints"]) == {"k1"}
    assert set(rep.data["endpoints"]["k1"]) == ENDPOINT_KEYS
    assert set(rep.flags) == FLAG_KEYS
    assert all(_valid_flag(f) for f in rep.flags.values())
    assert rep.data["overall"] in (pl.PASS, pl.FAIL)
    cov = rep.data["endpoints"]["k1"]["covering"]
    assert len(cov["eps"]) == 16 and all(_valid_flag(f) for f in cov["flags"])


def test_report_json(small_report, tmp_path):
    rep, _ = small_report
    path = tmp_path / "r.json"
    rep.write(path)
    loaded = json.loads(path.read_text())
    assert "timing" in loaded and "timing" not in rep.data
    assert loaded["flags"] == rep.flags


def test_volumes_nested(small_report):
    rep, _ = small_report
    vol = rep.data["endpoints"]["k1"]["volumes"]
    # shared draws and T inside T_h
    assert vol["Th"] >= vol["T"] > 0
    assert vol["ratio"] >= 1.0


def test_side_files(small_report):
    rep, side = small_report
    names = {p.name for p in side.iterdir()}
    assert {"covering_T_k1.csv", "covering_Th_k1.csv", "T_sample_k1.csv", "Th_sample_k1.csv"} <= names
    pts = np.loadtxt(side / "T_sample_k1.csv", delimiter=",", skiprows=1)
    assert pts.shape == (4, 3)
    # samples lie on the hyperboloid with k = 1
    assert np.allclose(-pts[:, 0] ** 2 + np.sum(pts[:, 1:] ** 2, axis=1), -1.0, atol=1e-9)


def test_gaussian_requested():
    rep = pl.run_pipeline(small_config(trials_gaussian=2000))
    g = rep.data["endpoints"]["k1"]["gaussian"]
    assert g["mean_sup"] > 0 and math.isfinite(g["L_upper"])


def test_gaussian_skipped(small_report):
    rep, _ = small_report
    g = rep.data["endpoints"]["k1"]["gaussian"]
    assert g["mean_sup"] is None and g["flag"].startswith("not-assertable")


def test_single_ball_fixed_point():
    rep = pl.run_pipeline(small_config(m=1, seed=3, endpoints=["k1", "k2"]))
    for r in rep.data["endpoints"].values():
        assert r["geometry"]["generators"] == 1
        assert r["volumes"]["ratio"] == 1.0
        assert r["covering"]["ratios"] == [1.0] * len(r["covering"]["ratios"])
        assert r["geometry"]["hull_gap"] <= 1e-9
    assert all(f == pl.PASS for k, f in rep.flags.items() if k != "theorem1")


def test_stage_error_keeps_partial(monkeypatch):
    def boom(*a, **kw):
        raise RuntimeError("covering exploded")

    monkeypatch.setattr(pl, "covering_profile", boom)
    with pytest.raises(pl.StageError) as info:
        pl.run_pipeline(small_config())
    err = info.value
    assert err.stage == "covering"
    part = next(iter(err.partial.values()))
    assert {"geometry", "volumes", "bounds"} <= set(part)
    assert "covering" not in part


def test_deterministic():
    a = pl.run_pipeline(small_config(seed=11))
    b = pl.run_pipeline(small_config(seed=11))
    c = pl.run_pipeline(small_config(seed=12))
    dump = lambda r: json.dumps(r.data, sort_keys=True, default=pl._json_default)
    assert dump(a) == dump(b)
    assert dump(a) != dump(c)
