import copy
import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import qfikit.scenario as scenario_mod
from qfikit import __version__, cli
from qfikit.errors import ValidationError
from qfikit.families import bell_state, collective_spin
from qfikit.optimizer import cfi_group_difference
from qfikit.protocol import audit_chain
from qfikit.scenario import (
    bundled_scenarios,
    dumps_report,
    load_scenario,
    run_grouping,
    run_scenario,
    validate_config,
    validate_report,
)
from qfikit.states import matrix_to_json
from qfikit.tolerances import DEFAULT


@pytest.fixture
def bell():
    return load_scenario("bell.json")


def strip_timing(report):
    out = copy.deepcopy(report)
    out.pop("timing")
    return out


# ---------------------------------------------------------------- bundled scenarios

def test_bundled_scenarios_present():
    assert set(bundled_scenarios()) >= {"bell.json", "constant.json", "random.json", "proportional.json"}


@pytest.mark.parametrize("name", ["bell.json", "constant.json", "random.json", "proportional.json"])
def test_bundled_scenario_runs_and_validates(name):
    report = run_scenario(load_scenario(name))
    validate_report(report)
    assert report["summary"]["n_errors"] == 0
    assert report["summary"]["n_violations"] == 0
    assert report["qfikit_version"] == __version__
    assert report["tolerances"]["chain"] == DEFAULT.chain


def test_bell_scenario_values(bell):
    report = run_scenario(bell)
    assert len(report["records"]) == 32
    for rec in report["records"]:
        assert 0 <= rec["x"] <= np.pi
        for key in ("F_a", "F_b", "F_sub_b"):
            assert abs(rec[key] - 4) <= 1e-7
        assert rec["chain_ok"] and not rec["violation"]
        assert rec["metrics"]["qfi"] == pytest.approx(4, abs=1e-10)


def test_constant_scenario_all_zero():
    report = run_scenario(load_scenario("constant.json"))
    for rec in report["records"]:
        for key in ("F_a", "F_b", "F_sub_b", "cfi_a", "F_composite", "F_rotated"):
            assert rec[key] == pytest.approx(0, abs=1e-12)
        assert rec["metrics"]["qfi"] == 0 and rec["metrics"]["sub_qfi"] == pytest.approx(0, abs=1e-14)


def test_random_scenario_deterministic():
    cfg = load_scenario("random.json")
    a = dumps_report(strip_timing(run_scenario(cfg)))
    b = dumps_report(strip_timing(run_scenario(cfg)))
    assert a == b


def test_seed_override_changes_random_family():
    cfg = load_scenario("random.json")
    a = run_scenario(cfg, seed=1)["records"][0]["F_a"]
    b = run_scenario(cfg, seed=2)["records"][0]["F_a"]
    assert a != b
    assert run_scenario(cfg, seed=1)["records"][0]["F_a"] == a


@pytest.mark.parametrize("name", bundled_scenarios())
def test_rerun_reproduces_values(name):
    cfg = load_scenario(name)
    r1, r2 = run_scenario(cfg), run_scenario(cfg, jobs=4)
    for a, b in zip(r1["records"], r2["records"]):
        assert a["x"] == b["x"]
        for key in ("F_a", "F_b", "F_sub_b", "cfi_a"):
            assert abs(a[key] - b[key]) <= 1e-10


# ---------------------------------------------------------------- grouping

def test_grouping_bell(bell):
    g = run_grouping(bell)["grouping"]
    assert g["N"] == 4 and g["M"] <= 3
    assert g["I1"] == pytest.approx(4, abs=1e-9) and g["I2"] == pytest.approx(4, abs=1e-9)
    assert g["F_b_reduced"] == pytest.approx(g["F_b_original"], abs=1e-7)


def test_grouping_tol_zero_generic_family():
    cfg = load_scenario("random.json")
    cfg["grouping"] = {"enabled": True, "tol": 0.0, "x": 0.3}
    g = run_grouping(cfg)["grouping"]
    assert g["M"] == g["N"]
    assert g["I1_minus_I2"] == 0.0


def test_grouping_proportional_triple():
    report = run_grouping(load_scenario("proportional.json"))
    validate_report(report)
    g = report["grouping"]
    assert (g["N"], g["M"]) == (3, 2)
    assert g["I1"] == pytest.approx(g["I2"], abs=1e-10)
    # oracle: closed-form difference on the same distribution
    w, k, x = np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0, -1.0]), g["x"]
    p = w * np.exp(k * x) / np.sum(w * np.exp(k * x))
    dp = p * (k - p @ k)
    assert cfi_group_difference(p, dp, g["groups"]) == pytest.approx(0, abs=1e-12)
    assert g["F_b_reduced"] == pytest.approx(g["F_b_original"], abs=1e-7)


def test_grouping_disabled_rejected():
    cfg = load_scenario("proportional.json")
    cfg["grouping"]["enabled"] = False
    with pytest.raises(ValidationError):
        run_grouping(cfg)


# ---------------------------------------------------------------- validation

def test_validation_lists_every_schema_problem(bell):
    cfg = copy.deepcopy(bell)
    cfg["sweep"]["n_points"] = 0
    cfg["family"]["kind"] = "banana"
    cfg["unexpected"] = 1
    with pytest.raises(ValidationError) as err:
        validate_config(cfg)
    text = "; ".join(err.value.problems)
    assert len(err.value.problems) >= 3
    assert "n_points" in text and "family" in text and "unexpected" in text


def test_validation_lists_every_consistency_problem(bell):
    cfg = copy.deepcopy(bell)
    cfg["sweep"]["x_start"], cfg["sweep"]["x_end"] = 2.0, 1.0
    cfg["protocol"]["unitaries"] = cfg["protocol"]["unitaries"][:3]
    cfg["tolerances"] = {"nonsense": 1.0}
    with pytest.raises(ValidationError) as err:
        validate_config(cfg)
    text = "; ".join(err.value.problems)
    assert "x_start" in text and "unitaries" in text and "nonsense" in text


def test_validation_dimension_mismatch(bell):
    cfg = copy.deepcopy(bell)
    cfg["auxiliary"]["dim"] = 3
    with pytest.raises(ValidationError, match="dim"):
        validate_config(cfg)


def test_validation_mixed_weights():
    cfg = load_scenario("constant.json")
    cfg["auxiliary"] = {"dim": 3, "purity": "mixed", "weights": [0.5, 0.6]}
    with pytest.raises(ValidationError, match="weights"):
        validate_config(cfg)


def test_validation_rejects_negative_tolerance(bell):
    cfg = copy.deepcopy(bell)
    cfg["tolerances"] = {"chain": -1.0}
    with pytest.raises(ValidationError):
        validate_config(cfg)


def test_tolerance_override_resolved_in_report(bell):
    cfg = copy.deepcopy(bell)
    cfg["tolerances"] = {"chain": 1e-6}
    cfg["sweep"]["n_points"] = 2
    assert run_scenario(cfg)["tolerances"]["chain"] == 1e-6


# ---------------------------------------------------------------- per-point errors

def test_numeric_failures_become_error_records(bell):
    cfg = copy.deepcopy(bell)
    # a kernel cutoff above every eigenvalue turns each point into a rank-change failure
    cfg["tolerances"] = {"kernel": 10.0}
    cfg["grouping"]["enabled"] = False
    report = run_scenario(cfg)
    validate_report(report)
    assert report["summary"]["n_errors"] == 32
    assert all(r["error_type"] == "RankChangeError" for r in report["records"])
    assert not scenario_mod.has_violation(report)


def test_mixed_auxiliary_scenario():
    cfg = load_scenario("constant.json")
    cfg["family"]["rates"] = [1.0, 0.0, -1.0]
    cfg["auxiliary"] = {"dim": 3, "purity": "mixed", "weights": [0.6, 0.3, 0.1]}
    report = run_scenario(cfg)
    validate_report(report)
    for rec in report["records"]:
        assert rec["F_b"] <= rec["cfi_a"] + 1e-7 and rec["chain_ok"]


def test_unitary_and_ghz_family_scenarios():
    psi = bell_state()
    cfg = load_scenario("random.json")
    cfg["family"] = {
        "kind": "unitary",
        "rho0": matrix_to_json(np.outer(psi, psi.conj())),
        "generator": matrix_to_json(collective_spin(2, "x").matrix),
        "derivative": {"strategy": "central-difference", "step": 1e-5},
    }
    report = run_scenario(cfg)
    # Phi+ is a +1 eigenstate of X (x) X, so Var(J_x) = 1 and F = 4
    assert all(r["F_a"] == pytest.approx(4, abs=1e-6) for r in report["records"])
    cfg["family"] = {"kind": "ghz", "n_qubits": 3, "axis": "z"}
    cfg["auxiliary"]["dim"] = 8
    report = run_scenario(cfg)
    assert report["summary"]["n_errors"] == 0
    assert all(r["F_a"] == pytest.approx(9, abs=1e-9) for r in report["records"])


# ---------------------------------------------------------------- CLI

def test_cli_run_writes_report_and_csv(tmp_path):
    out, table = tmp_path / "r.json", tmp_path / "r.csv"
    assert cli.main(["run", "bell.json", "--out", str(out), "--csv", str(table), "--jobs", "2"]) == 0
    report = json.loads(out.read_text())
    validate_report(report)
    rows = list(csv.reader(table.open()))
    assert rows[0] == ["x", "F_a", "F_b", "F_sub_b", "cfi_a"]
    assert len(rows) == 33
    assert float(rows[1][2]) == pytest.approx(4, abs=1e-7)


def test_cli_run_stdout(capsys):
    assert cli.main(["run", "constant.json"]) == 0
    assert json.loads(capsys.readouterr().out)["command"] == "run"


def test_cli_group(tmp_path):
    out = tmp_path / "g.json"
    assert cli.main(["group", "proportional.json", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["command"] == "group" and rep["grouping"]["M"] == 2


def test_cli_validate(capsys):
    assert cli.main(["validate", "bell.json"]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_validation_failure_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1}))
    assert cli.main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "family" in err and "sweep" in err
    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    assert cli.main(["run", str(garbled)]) == 2


def test_cli_io_failure_exit_4(tmp_path):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 4
    assert cli.main(["run", "constant.json", "--out", str(tmp_path / "no" / "dir.json")]) == 4


def test_cli_violation_exit_3(monkeypatch, tmp_path):
    def strict(family, sigma, cu, x, tol):
        return audit_chain(family, sigma, cu, x, tol.with_overrides(chain=-1.0))

    monkeypatch.setattr(scenario_mod, "audit_chain", strict)
    out = tmp_path / "v.json"
    assert cli.main(["run", "constant.json", "--out", str(out)]) == 3
    report = json.loads(out.read_text())
    validate_report(report)
    assert all(r["violation"] and r["violations"] for r in report["records"])


def test_cli_metrics(tmp_path, capsys):
    psi = bell_state()
    state, gen = tmp_path / "s.json", tmp_path / "h.json"
    state.write_text(json.dumps(matrix_to_json(np.outer(psi, psi.conj()))))
    gen.write_text(json.dumps(matrix_to_json(collective_spin(2, "z").matrix)))
    assert cli.main(["metrics", str(state), str(gen)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["qfi"] == pytest.approx(4) and rep["sub_qfi"] == pytest.approx(4)
    assert rep["sub_qfi_unitary"] == pytest.approx(4)
    gen.write_text(json.dumps(matrix_to_json(np.eye(3))))
    assert cli.main(["metrics", str(state), str(gen)]) == 2


def test_cli_entry_point_and_log_level(tmp_path):
    env = {"QFI_LOG": "info", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "qfikit.cli", "run", "constant.json",
                           "--out", str(tmp_path / "r.json")],
                          capture_output=True, text=True, env=env, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    assert "INFO" in proc.stderr
