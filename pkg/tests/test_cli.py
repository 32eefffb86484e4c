import json

import numpy as np
import pytest

from deltauq import cli, experiments
from deltauq.config import validate_config
from deltauq.exceptions import ConfigError
from deltauq.functions import load_csv

TINY_SMO = {
    "objective": "sinusoid",
    "n_init": 4,
    "n_iterations": 2,
    "pool_size": 64,
    "anchors_k": 3,
    "refit_epochs": 5,
    "hidden_layers": [8],
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def smo_cfg(**over):
    return {"experiment": "smo", "seeds": [0, 1], "params": {**TINY_SMO, **over}}


def test_validate_ok(tmp_path, capsys):
    path = write_cfg(tmp_path, smo_cfg())
    assert cli.main(["validate", path]) == 0
    assert "ok" in capsys.readouterr().out


@pytest.mark.parametrize("cfg, where", [
    ({"experiment": "smo", "seeds": []}, "seeds"),
    ({"experiment": "nope", "seeds": [0]}, "experiment"),
    ({"experiment": "smo", "seeds": [0], "params": {"n_iterations": -1}}, "params.n_iterations"),
    ({"experiment": "ood", "seeds": [0], "params": {"mlp": {"epochs": "ten"}}}, "params.mlp.epochs"),
    ({"experiment": "smo", "seeds": [0], "params": {"bogus": 1}}, "params"),
])
def test_schema_errors_name_the_field(tmp_path, capsys, cfg, where):
    path = write_cfg(tmp_path, cfg)
    assert cli.main(["validate", path]) == cli.EXIT_BAD_CONFIG
    err = capsys.readouterr().err
    assert f"error: {where}:" in err


def test_missing_dataset_named(tmp_path, capsys):
    missing = tmp_path / "nowhere.csv"
    cfg = {"experiment": "regression-calibration", "seeds": [0],
           "params": {"dataset": {"path": str(missing)}}}
    path = write_cfg(tmp_path, cfg)
    assert cli.main(["run", path, "--out", str(tmp_path / "o"), "--quiet"]) != 0
    assert str(missing) in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_and_malformed_config(tmp_path, capsys):
    assert cli.main(["validate", str(tmp_path / "none.json")]) == cli.EXIT_BAD_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert cli.main(["validate", str(bad)]) == cli.EXIT_BAD_CONFIG
    assert "invalid JSON" in capsys.readouterr().err


def test_config_error_path_format():
    with pytest.raises(ConfigError) as info:
        validate_config({"experiment": "smo", "seeds": [0], "params": {"pool_size": 0}})
    assert info.value.path == "params.pool_size"


def test_smo_zero_iterations_reports_initial_best(tmp_path):
    cfg = smo_cfg(n_iterations=0)
    out = tmp_path / "o"
    assert cli.main(["run", write_cfg(tmp_path, cfg), "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    for entry in report["per_seed"]:
        assert entry["metrics"]["best"] == entry["metrics"]["initial_best"]
    assert not (out / "smo_trace.csv").exists()
    initial = load_csv(out / "smo_initial.csv", target="best")
    assert len(initial) == 2 * TINY_SMO["n_init"]


def test_failing_seed_reported_others_continue(tmp_path, monkeypatch):
    real = experiments.EXPERIMENTS["smo"]

    def flaky(seed, p):
        if seed == 1:
            raise RuntimeError("boom")
        return real(seed, p)

    monkeypatch.setitem(experiments.EXPERIMENTS, "smo", flaky)
    cfg = {**smo_cfg(), "seeds": [0, 1, 2]}
    report, code = cli.run_config(cfg, tmp_path / "o")
    assert code == cli.EXIT_FAILED_SEEDS
    assert [f["index"] for f in report["failures"]] == [1]
    assert "boom" in report["failures"][0]["error"]
    assert [e["seed"] for e in report["per_seed"]] == [0, 2]


def test_report_files_and_aggregates(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["run", write_cfg(tmp_path, smo_cfg()), "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    for key in ("config", "per_seed", "aggregate", "wall_clock_seconds", "version", "rng"):
        assert key in report
    # aggregates recomputable from the per-seed entries
    for name, agg in report["aggregate"].items():
        vals = np.array([e["metrics"][name] for e in report["per_seed"]])
        assert agg["mean"] == pytest.approx(vals.mean())
        assert agg["sd"] == pytest.approx(vals.std(ddof=1))
    # every plot-data CSV round-trips through the CSV reader
    assert report["tables"]
    for name in report["tables"]:
        ds = load_csv(out / name, target="seed")
        assert np.all(np.isfinite(ds.inputs))
    assert cli.main(["report", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "best" in printed and "smo" in printed


def test_report_missing_dir(tmp_path):
    assert cli.main(["report", str(tmp_path)]) == cli.EXIT_BAD_CONFIG


def test_rerun_reproduces_metrics(tmp_path):
    cfg = smo_cfg()
    first, _ = cli.run_config(cfg, tmp_path / "a")
    echoed = json.loads((tmp_path / "a" / "report.json").read_text(encoding="utf-8"))["config"]
    second, _ = cli.run_config(echoed, tmp_path / "b")
    assert [e["metrics"] for e in first["per_seed"]] == [e["metrics"] for e in second["per_seed"]]


def test_parallel_matches_serial(tmp_path):
    cfg = smo_cfg()
    serial, _ = cli.run_config(cfg, tmp_path / "a", parallel=1)
    par, _ = cli.run_config(cfg, tmp_path / "b", parallel=2)
    assert [e["metrics"] for e in serial["per_seed"]] == [e["metrics"] for e in par["per_seed"]]


def test_out_dir_precedence(tmp_path, monkeypatch):
    cfg = {"experiment": "smo", "seeds": [0], "out": "from-config"}
    monkeypatch.delenv(cli.OUT_ENV, raising=False)
    assert str(cli.resolve_out_dir(None, cfg)) == "from-config"
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.resolve_out_dir(None, cfg) == tmp_path / "env"
    assert str(cli.resolve_out_dir("flag", cfg)) == "flag"
    monkeypatch.delenv(cli.OUT_ENV)
    assert str(cli.resolve_out_dir(None, {"experiment": "smo"})).endswith("smo")


def test_env_var_sets_output(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    cfg = {**smo_cfg(n_iterations=0), "seeds": [0]}
    assert cli.main(["run", write_cfg(tmp_path, cfg), "--quiet"]) == 0
    assert (tmp_path / "env" / "report.json").is_file()


def test_bad_parallel(tmp_path):
    assert cli.main(["run", write_cfg(tmp_path, smo_cfg()), "--parallel", "0"]) == 2
