import csv
import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorenz_renorm.cli import SWEEP_HEADER, main
from lorenz_renorm.errors import ConfigError, SchemaError
from lorenz_renorm.records import OUTPUT_DIR_ENV, ResultRecord, RunConfig

# degree 32 on a narrow bracket keeps one solve near 15 s
SOLVE_ARGS = ["solve", "--rho", "2", "--degree", "32", "--bracket", "0.44", "0.47",
              "--emit", "json", "csv"]


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(SOLVE_ARGS + ["--output-dir", str(out)])
    return code, out


def _record(**overrides):
    base = dict(
        config=RunConfig(rho=2.0).to_dict(), rho=2.0, r_star=0.1 + 0.2, lambda_star=1 / 3,
        mu_star=2 / 7, a=1e-300, b=5e-324, y=0.7880851, scalings={"lambda": 1 / 3},
        residuals={"map_f": 1.2e-7}, checks=[], iterations=17, wall_time=1.5,
        U_samples=[0.0, -1 / 3, 2.5], V_samples=[0.0, 1e-17, 7.0],
    )
    base.update(overrides)
    return ResultRecord(**base)


# --- configuration -----------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"rho": 1.0}, {"rho": 2.0, "degree": 8}, {"rho": 2.0, "degree": 1024},
    {"rho": 2.0, "bracket_lo": 1.0, "bracket_hi": 0.5}, {"rho": 2.0, "tol_r": 0.0},
    {"rho": 2.0, "emit": {"pdf"}},
])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_config_round_trip():
    cfg = RunConfig(rho=3.0, degree=96, emit={"csv", "json"})
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_low_degree_exits_with_config_code(tmp_path, capsys):
    code = main(["solve", "--rho", "2", "--degree", "8", "--output-dir", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "ConfigError"
    assert not (tmp_path / "result.json").exists()


# --- result record -----------------------------------------------------------

def test_record_round_trip_is_exact():
    rec = _record()
    assert ResultRecord.from_json(rec.to_json()) == rec


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_record_round_trip_any_reals(values):
    rec = _record(U_samples=values, r_star=values[0])
    back = ResultRecord.from_json(rec.to_json())
    assert back.U_samples == values and back.r_star == values[0]


def test_record_file_round_trip(tmp_path):
    rec = _record(trace=[{"n": 0, "sup_diff_U": 0.25}])
    assert ResultRecord.read(rec.write(tmp_path / "sub" / "r.json")) == rec


@pytest.mark.parametrize("text", ['{"schema": 1, "rho"', "[1, 2]", '{"schema": 2}', '{"schema": 1}'])
def test_malformed_record_rejected(text):
    with pytest.raises(SchemaError):
        ResultRecord.from_json(text)


# --- solve and verify --------------------------------------------------------

def test_solve_writes_outputs(solved):
    code, out = solved
    assert code == 0
    rec = ResultRecord.read(out / "result.json")
    assert rec.r_star == pytest.approx(0.453, abs=1e-3)
    assert rec.config["degree"] == 32
    assert all(c["ok"] for c in rec.checks if c["gating"])
    with (out / "fixed_point.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "f(x)", "g(x)", "U(x)", "V(x)", "N_Z(x)", "N_W(x)"]
    assert len(rows) == 1 + 200
    assert float(rows[1][0]) == -1.0 and float(rows[-1][0]) == pytest.approx(rec.r_star)
    # f lives left of 0 only, and N_W has its pole at x = -1
    assert rows[-1][1] == "" and rows[1][6] == ""


def test_verify_fresh_output_passes(solved, tmp_path):
    _, out = solved
    report = tmp_path / "report.json"
    assert main(["verify", str(out / "result.json"), "--report", str(report)]) == 0
    assert json.loads(report.read_text())["passed"]


def test_verify_detects_perturbed_sample(solved, tmp_path):
    _, out = solved
    rec = ResultRecord.read(out / "result.json")
    samples = list(rec.U_samples)
    samples[len(samples) // 3] += 1e-3
    bad = replace(rec, U_samples=samples).write(tmp_path / "result.json")
    report = tmp_path / "report.json"
    assert main(["verify", str(bad), "--report", str(report)]) == 5
    breached = json.loads(report.read_text())["breached"]
    assert "decoupled_U" in breached


def test_verify_truncated_file_is_parse_error(solved, tmp_path, capsys):
    _, out = solved
    text = (out / "result.json").read_text()
    path = tmp_path / "result.json"
    path.write_text(text[: len(text) // 2])
    assert main(["verify", str(path)]) == 2
    assert json.loads(capsys.readouterr().err)["error"]["type"] == "SchemaError"


def test_solve_is_deterministic(solved, tmp_path):
    _, out = solved
    assert main(SOLVE_ARGS + ["--output-dir", str(tmp_path)]) == 0
    first = json.loads((out / "result.json").read_text())
    second = json.loads((tmp_path / "result.json").read_text())
    first.pop("wall_time"), second.pop("wall_time")
    first["config"].pop("output_dir"), second["config"].pop("output_dir")
    assert first == second
    assert (out / "fixed_point.csv").read_bytes() == (tmp_path / "fixed_point.csv").read_bytes()


def test_solve_without_crossing_exits_with_bracket_code(tmp_path, capsys):
    code = main(["solve", "--rho", "2", "--degree", "32", "--bracket", "1.0", "1.2",
                 "--output-dir", str(tmp_path)])
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 3 and len(err["error"]["samples"]) == 16


# --- sweep -------------------------------------------------------------------

def test_sweep_sign_pattern(tmp_path):
    assert main(["sweep", "--rho", "2", "--r", "0.2", "0.453", "1.2",
                 "--output-dir", str(tmp_path)]) == 0
    with (tmp_path / "sweep.csv").open() as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "rho,r,lambda,mu,gap,error"
    assert lines[0].split(",") == SWEEP_HEADER
    gaps = [float(row["gap"]) for row in csv.DictReader(lines)]
    assert gaps[0] < 0 < gaps[2]
    assert abs(gaps[1]) < 1e-3


def test_sweep_records_failures_in_row(tmp_path):
    assert main(["sweep", "--rho", "2", "--r", "0.05", "--output-dir", str(tmp_path)]) == 0
    with (tmp_path / "sweep.csv").open() as fh:
        (row,) = csv.DictReader(fh)
    assert row["gap"] == "" and row["error"].startswith("NonConvergenceError")


def test_sweep_empty_r_grid_is_usage_error(tmp_path):
    assert main(["sweep", "--rho", "2", "--output-dir", str(tmp_path)]) == 2
    assert not (tmp_path / "sweep.csv").exists()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert main(["sweep", "--rho", "2", "--r", "0.453"]) == 0
    assert (tmp_path / "sweep.csv").exists()
