import json
from pathlib import Path

import jsonschema
import pytest

from cbjj.cli import main, run
from cbjj.escape import ThermalEnvironment
from cbjj.junction import JunctionParams, RfPulse
from cbjj.protocol import BiasWaveform, ConstantRate, ProtocolConfig, sample_dataset
from cbjj.report import report_schema

SMALL = {
    "rate-curve": {"protocol": {"events": 200},
                   "sweep": {"variable": "bias_uA", "start": 2.87, "stop": 2.95, "num": 6}},
    "efficiency-scan": {"environment": {"T_mK": 157.4},
                        "protocol": {"levels": 8.0, "events": 400},
                        "sweep": {"variable": "photons", "values": [6.0, 12.0, 18.0]},
                        "generator": {"model": "sigmoid", "center": 12.0}},
    "pulse-width-scan": {"protocol": {"events": 300},
                         "sweep": {"variable": "width_ns", "values": [10.0, 30.0, 100.0, 1000.0]},
                         "generator": {"model": "pulse"}},
    "boundary-map": {"environment": {"T_mK": 0.0},
                     "map": {"n_bias": 2, "photons": [0.0, 20.0]},
                     "sim": {"trajectories": 4}},
    "sensitivity": {},
}


def _config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def _outputs(directory: Path):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())
            if p.suffix in (".csv", ".json")}


@pytest.mark.parametrize("command", sorted(SMALL))
def test_command_writes_valid_report(tmp_path, command):
    cfg = _config(tmp_path, SMALL[command])
    code, bundle = run([command, "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == 0, bundle.error if bundle else None
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    jsonschema.validate(report, report_schema())
    assert report["status"] == "ok"
    assert (tmp_path / "out" / "manifest.json").exists()


def test_empty_sweep_is_config_error(tmp_path):
    cfg = _config(tmp_path, {"sweep": {"variable": "bias_uA", "values": []}})
    assert main(["rate-curve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_unknown_key_is_config_error(tmp_path):
    cfg = _config(tmp_path, {"sim": {"sed": 1}})
    assert main(["sensitivity", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_budget_violation_exit_code(tmp_path):
    cfg = _config(tmp_path, {"environment": {"T_mK": 0.0}, "map": {"budget": 10}})
    assert main(["boundary-map", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


def test_numerical_failure_exit_code(tmp_path):
    # hold bias so close to Ic that the dark rate swamps the protocol
    cfg = _config(tmp_path, {"protocol": {"bias_uA": 3.15, "events": 10},
                             "sweep": {"variable": "bias_uA", "values": [3.15]}})
    code, bundle = run(["rate-curve", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 3
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["status"] == "failed"


def test_worker_count_does_not_change_output(tmp_path):
    cfg = _config(tmp_path, SMALL["rate-curve"])
    assert main(["rate-curve", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["rate-curve", "--config", str(cfg), "--out", str(tmp_path / "b"),
                 "--jobs", "2"]) == 0
    assert _outputs(tmp_path / "a") == _outputs(tmp_path / "b")


def test_seed_override_changes_output(tmp_path):
    cfg = _config(tmp_path, SMALL["rate-curve"])
    main(["rate-curve", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["rate-curve", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "5"])
    assert (tmp_path / "a" / "rate_curve.csv").read_bytes() != \
        (tmp_path / "b" / "rate_curve.csv").read_bytes()


def test_format_selection(tmp_path):
    main(["sensitivity", "--out", str(tmp_path / "o"), "--format", "csv"])
    names = {p.suffix for p in (tmp_path / "o").iterdir()}
    assert ".csv" in names and ".svg" not in names


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CBJJ_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["sensitivity"]) == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_fit_command_on_datasets(tmp_path):
    params = JunctionParams(3.156e-6)
    rf = sample_dataset(params, ThermalEnvironment(0.183), BiasWaveform(2.899e-6),
                        RfPulse(8e9, -90, 10e-9), ProtocolConfig(events_target=2000), 0.5)
    quiet = sample_dataset(params, ThermalEnvironment(0.183), BiasWaveform(2.6e-6),
                           RfPulse(8e9, -90, 10e-9), ProtocolConfig(events_target=300), 0.4,
                           dark_rate=ConstantRate(1e-3))
    rf.write(tmp_path / "rf.csv")
    quiet.write(tmp_path / "quiet.csv")
    code, bundle = run(["fit", str(tmp_path / "rf.csv"), str(tmp_path / "quiet.csv"),
                        "--out", str(tmp_path / "o")])
    assert code == 0, bundle.error
    rows = bundle.tables["fits"].to_json()["rows"]
    assert [r["mode"] for r in rows] == ["rf", "low-dark"]
    eps, sigma = [r["eps"] for r in rows], [r["sigma"] for r in rows]
    assert abs(eps[0] - 0.5) < 4 * sigma[0]
    assert abs(eps[1] - 0.4) < 4 * sigma[1]


def test_fit_missing_file_is_config_error(tmp_path):
    assert main(["fit", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 2


def test_sensitivity_values(tmp_path):
    code, bundle = run(["sensitivity", "--out", str(tmp_path / "o")])
    res = bundle.results["sensitivity"]
    assert res["photon_energy"] == pytest.approx(5.30e-24, rel=1e-3, abs=0)
    assert res["energy_per_pulse"] == pytest.approx(10 * 125 * 5.30e-24, rel=1e-3, abs=0)


def test_provenance_block_regenerates_outputs(tmp_path):
    cfg = _config(tmp_path, SMALL["rate-curve"])
    assert main(["rate-curve", "--config", str(cfg), "--out", str(tmp_path / "a"),
                 "--seed", "11"]) == 0
    prov = json.loads((tmp_path / "a" / "report.json").read_text())["provenance"]
    replay = _config(tmp_path, prov["config"], "replay.json")
    assert main([prov["command"], "--config", str(replay), "--out", str(tmp_path / "b")]) == 0
    assert _outputs(tmp_path / "a") == _outputs(tmp_path / "b")


@pytest.mark.parametrize("command", sorted(SMALL))
def test_csv_columns_are_documented(tmp_path, command):
    cfg = _config(tmp_path, SMALL[command])
    assert main([command, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    for path in (tmp_path / "o").glob("*.csv"):
        lines = path.read_text().splitlines()
        documented = [ln.split()[2].rstrip(":") for ln in lines if ln.startswith("# column ")]
        header = next(ln for ln in lines if not ln.startswith("#"))
        assert header.split(",") == documented, path.name
