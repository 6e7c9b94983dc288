import json

import pytest

from gvp.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, CheckFailed, main, parse_config, run
from gvp.errors import ConfigError
from gvp.model import fbm_params

FBM = fbm_params(0.75)


def _doc(experiment, params=(0.0, 0.0, 0.0), **extra):
    d = {"experiment": experiment, "params": dict(zip(("alpha", "beta", "gamma"), params))}
    d.update(extra)
    return d


def _write(tmp_path, doc, name="cfg.json"):
    out = tmp_path / "out"
    doc = dict(doc)
    doc.setdefault("output", {"dir": str(out)})
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path, out


def test_minimal_document_defaults():
    cfg = parse_config(json.dumps(_doc("simulate")))
    assert cfg.grid.points == 256 and cfg.mc.n_paths == 1 and cfg.mc.base_seed == 0
    assert cfg.options["method"] == "cholesky"
    assert cfg.digest() == parse_config(json.dumps(_doc("simulate"))).digest()


@pytest.mark.parametrize(
    "doc, field",
    [
        (_doc("cov", (-0.6, 0.0, 0.0)), "params.alpha"),
        (_doc("mc_cauchy"), "theta"),
        (dict(_doc("cov"), grid={"t_max": 1.0, "spacing": "log"}), "grid.spacing"),
        (dict(_doc("cov"), mc={"n_paths": 0}), "mc.n_paths"),
        (dict(_doc("cov"), extra=1), "extra"),
        (dict(_doc("cov"), grid={"tmax": 1.0}), "grid.tmax"),
        (dict(_doc("estimate"), theta=1.0, options={"ks": 1}), "options.ks"),
        (dict(_doc("cov"), theta=-1.0), "theta"),
    ],
)
def test_validation_names_field(doc, field):
    with pytest.raises(ConfigError, match=f"^{field}"):
        parse_config(json.dumps(doc))


def test_parse_error_location():
    with pytest.raises(ConfigError, match="line 2 column"):
        parse_config('{"experiment": "cov",\n "params": }')
    with pytest.raises(ConfigError, match="experiment"):
        parse_config(json.dumps(_doc("cov")), "classify")


def test_seed_override(monkeypatch):
    monkeypatch.setenv("GVP_SEED", "17")
    assert parse_config(json.dumps(_doc("simulate"))).mc.base_seed == 17
    monkeypatch.setenv("GVP_SEED", "x")
    with pytest.raises(ConfigError, match="GVP_SEED"):
        parse_config(json.dumps(_doc("simulate")))


def test_classify_json(tmp_path, capsys):
    path, out = _write(tmp_path, _doc("classify"))
    assert main(["classify", "--config", str(path)]) == EXIT_OK
    report = json.loads((out / "classify.json").read_text())
    assert report["cov_class"] == "long" and report["corr_class"] == "long"
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["files"]) >= {"classify.json", "summary.json"}
    assert manifest["version"] == "0.1.0"


def test_exit_codes(tmp_path):
    path, _ = _write(tmp_path, _doc("cov", (-0.6, 0.0, 0.0)))
    assert main(["cov", "--config", str(path)]) == EXIT_CONFIG
    assert main(["cov", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    # variances near t^3 = 1e-900 underflow, so the covariance cannot be factored
    path, _ = _write(tmp_path, dict(_doc("simulate"), grid={"t_max": 1e-300, "points": 3}), "tiny.json")
    assert main(["simulate", "--config", str(path)]) == EXIT_NUMERIC
    path, out = _write(tmp_path, dict(_doc("rates"), theta=1.0, options={"T": [20.0]}), "rates.json")
    assert main(["rates", "--config", str(path), "--check"]) == EXIT_CHECK
    assert (out / "manifest.json").exists()


def test_rates_check_passes_for_fbm(tmp_path):
    doc = dict(_doc("rates", FBM.as_tuple()), theta=1.0, options={"T": [20.0], "tolerance": 0.1})
    cfg = parse_config(json.dumps(dict(doc, output={"dir": str(tmp_path)})))
    run(cfg, check=True)


def test_same_config_same_checksums(tmp_path):
    doc = dict(_doc("mc_consistency", FBM.as_tuple()), theta=1.0, grid={"t_max": 5.0, "points": 101}, mc={"n_paths": 600})
    a = parse_config(json.dumps(dict(doc, output={"dir": str(tmp_path / "a")})))
    b = parse_config(json.dumps(dict(doc, output={"dir": str(tmp_path / "b")})))
    ma = run(a, threads=1)
    mb = run(b, threads=4)
    assert ma["files"] == mb["files"]
    assert ma["config_hash"] != mb["config_hash"]  # output dir is part of the config


@pytest.mark.parametrize("experiment", ["simulate", "cov", "estimate", "lil_check", "eta2"])
def test_experiments_write_outputs(tmp_path, experiment):
    doc = _doc(experiment, FBM.as_tuple(), grid={"t_max": 4.0, "points": 41}, mc={"n_paths": 3})
    if experiment in ("estimate", "eta2"):
        doc["theta"] = 1.0
    if experiment == "lil_check":
        doc["grid"] = {"t_max": 1000.0, "points": 60, "spacing": "geometric"}
    if experiment == "eta2":
        doc["options"] = {"mc_T": 4.0, "mc_points": 41}
    cfg = parse_config(json.dumps(dict(doc, output={"dir": str(tmp_path)})))
    manifest = run(cfg)
    assert manifest["files"] and all(len(h) == 64 for h in manifest["files"].values())
    for name in manifest["files"]:
        assert (tmp_path / name).stat().st_size > 0


def test_mc_cauchy_fbm(tmp_path):
    doc = dict(
        _doc("mc_cauchy", FBM.as_tuple()),
        theta=1.0,
        grid={"t_max": 15.0, "points": 1501},
        mc={"n_paths": 500, "base_seed": 1},
        options={"T": 15.0},
    )
    cfg = parse_config(json.dumps(dict(doc, output={"dir": str(tmp_path)})))
    run(cfg, check=True)
    ks = json.loads((tmp_path / "ks.json").read_text())
    assert ks["statistic"] < 0.1


def test_check_failed_is_raised(tmp_path):
    doc = dict(_doc("lil_check"), grid={"t_max": 1000.0, "points": 60, "spacing": "geometric"}, mc={"n_paths": 20})
    doc["options"] = {"max_ratio": 0.01}
    cfg = parse_config(json.dumps(dict(doc, output={"dir": str(tmp_path)})))
    with pytest.raises(CheckFailed):
        run(cfg, check=True)
