import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from cyclopass import _kernels
from cyclopass.cli import main, parse_scenario, run
from cyclopass.errors import ScenarioError
from cyclopass.io import emit_plotdata, read_trajectory_csv, trajectory_columns, write_trajectory_csv
from cyclopass.simulate import CycleParams, FourierSignal, close_cycle, constrained_simulate_y1
from cyclopass.structure import check_theorem_form

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture(scope="module")
def gas_cycle():
    from cyclopass.models import make_model

    gas = make_model("ideal_gas")
    sig = FourierSignal([0.05], [[0.2]], [[0.7]], 1.0)
    return close_cycle(gas, "y1", CycleParams(sig, gas.nominal.copy(), "hold_thermal", [300.0])).trajectory


def test_csv_roundtrip_is_exact(gas_cycle, tmp_path):
    path = write_trajectory_csv(gas_cycle, tmp_path / "t.csv")
    back = read_trajectory_csv(path)
    cols = trajectory_columns(gas_cycle)
    assert list(back) == list(cols)
    for k, v in cols.items():
        np.testing.assert_array_equal(back[k], v)


def test_csv_is_deterministic(gas_cycle, tmp_path):
    a = write_trajectory_csv(gas_cycle, tmp_path / "a.csv").read_bytes()
    b = write_trajectory_csv(gas_cycle, tmp_path / "b.csv").read_bytes()
    assert a == b


def test_supply_column_integrates_to_zero(gas_cycle, tmp_path):
    path = emit_plotdata(gas_cycle, ["t", "s2"], tmp_path / "s.csv")
    d = read_trajectory_csv(path)
    assert abs(np.trapezoid(d["s2"], d["t"])) < 1e-6
    assert abs(float(_kernels.cumtrapz(d["t"], d["s2"])[-1])) < 1e-6


def test_header_only_and_unknown_columns(gas_cycle, tmp_path):
    path = emit_plotdata(gas_cycle, [], tmp_path / "e.csv")
    assert path.read_text() == "\n"
    with pytest.raises(KeyError):
        emit_plotdata(gas_cycle, ["nope"], tmp_path / "x.csv")


def test_hstar_nonincreasing_without_supply(tmp_path):
    from cyclopass.models import make_model

    mic = make_model("microphone")
    cert = check_theorem_form(mic, "hold_electrical")
    tr = constrained_simulate_y1(mic, cert, [1.0], None, [0.05, 0.3, 1.0], (0.0, 2.0))
    d = read_trajectory_csv(emit_plotdata(tr, ["H", "Hstar"], tmp_path / "h.csv"))
    assert np.all(np.diff(d["Hstar"]) <= 1e-12)


def test_cli_check_gas(tmp_path):
    assert main(["check", "ideal_gas", "--out", str(tmp_path), "--quiet"]) == 0
    rep = yaml.safe_load((tmp_path / "ideal_gas-check" / "report.yaml").read_text())
    assert rep["results"]["verdict"] == {"hold_mechanical": "certified", "hold_thermal": "certified"}


def test_cli_expectation_failure(tmp_path):
    code = main(["check", "heat_exchanger", "--expect", "certified", "--out", str(tmp_path), "--quiet"])
    assert code == 2
    rep = yaml.safe_load((tmp_path / "heat_exchanger-check" / "report.yaml").read_text())
    for part in rep["results"]["partitions"].values():
        assert "j_block_diagonal" in part["reasons"]


def test_cli_spring_refusal(tmp_path):
    assert main(["check", "spring", "--out", str(tmp_path), "--quiet"]) == 0
    rep = yaml.safe_load((tmp_path / "spring-check" / "report.yaml").read_text())
    refusal = rep["results"]["partitions"]["hold_stiffness_port"]["legendre_refusal"]
    assert refusal.startswith("SingularHessian")


def test_cli_falsify_motor(tmp_path):
    code = main(["falsify", "dc_motor", "--partition", "hold_electrical", "--constraint", "1",
                 "--period", "1", "--out", str(tmp_path), "--quiet"])
    assert code == 0
    res = yaml.safe_load((tmp_path / "dc_motor-falsify" / "report.yaml").read_text())["results"]
    assert res["verdict"] == "witness" and res["integrated_supply"] <= -0.2
    assert (tmp_path / "dc_motor-falsify" / "witness.csv").exists()


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nmodel: ideal_gas\nmode: check\n")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 1
    assert "seed" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 1


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ScenarioError, match="line 3"):
        parse_scenario("name: x\nmodel: ideal_gas\nmode: explode\n")
    with pytest.raises(ScenarioError, match="line 4"):
        parse_scenario("name: x\nmodel: ideal_gas\nmode: check\nseed: 1.5\n")
    with pytest.raises(ScenarioError, match="line 2"):
        parse_scenario("model: ideal_gas\nbogus: 1\nmode: check\n")
    with pytest.raises(ScenarioError, match="line"):
        parse_scenario("model: [unclosed\n")


def test_parse_validates_shapes():
    with pytest.raises(ScenarioError, match="x0"):
        parse_scenario("model: ideal_gas\nmode: simulate\nx0: [1.0]\n")
    with pytest.raises(ScenarioError, match="partition"):
        parse_scenario("model: ideal_gas\nmode: falsify\nseed: 0\nconstraint: [300]\n")


def test_seed_override():
    sc = parse_scenario("model: ideal_gas\nmode: check\n", seed_override=7)
    assert sc.seed == 7


@pytest.mark.parametrize("name,code", [
    ("gas_check.yaml", 0), ("exchanger_expect_certified.yaml", 2), ("gas_isothermal.yaml", 0),
    ("motor_falsify.yaml", 0), ("inductor_storage.yaml", 0), ("custom_lc.yaml", 0),
])
def test_shipped_scenarios(name, code, tmp_path):
    rep = run(SCENARIOS / name, tmp_path)
    assert rep["exit_code"] == code


def test_reports_are_reproducible(tmp_path):
    a = run(SCENARIOS / "motor_falsify.yaml", tmp_path / "a")
    b = run(SCENARIOS / "motor_falsify.yaml", tmp_path / "b")
    for rep in (a, b):
        rep.pop("timing")
    assert a == b
    wa = (tmp_path / "a" / "motor-falsify" / "witness.csv").read_bytes()
    wb = (tmp_path / "b" / "motor-falsify" / "witness.csv").read_bytes()
    assert wa == wb


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "cyclopass.cli", "check", "coupled_inductors",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "pass" in out.stdout
