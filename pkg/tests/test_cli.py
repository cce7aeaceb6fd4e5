import subprocess
import sys
from pathlib import Path

import pytest

from mvsvi.cli import main
from mvsvi.config import load_config, parse_config, config_hash

SMALL = """\
name: {name}
seed: 99
coefficients: {{kind: ou_meanfield, params: {{sigma: 1.0}}}}
psi: {{kind: interval, params: {{lo: -5.0, hi: 5.0}}}}
initial: {{kind: gaussian, params: {{m: 0.5, s: 1.0}}}}
scheme: {{kind: proximal}}
grid: {{T: 0.5, dt: 0.05}}
experiment: {experiment}
"""

OU = "kind: ou_meanfield, params: {sigma: 1.0}"

EXPERIMENTS = {
    "simulate": "{kind: simulate, params: {paths: 50, write_paths: 2}}",
    "particles": "{kind: particles, params: {N: 40, write_particles: 5}}",
    "picard": "{kind: picard, params: {M: 100, K_max: 6, tol: 1.0e-6}}",
    "poc": "{kind: poc, params: {N_list: [8, 16, 32], M_ref: 64, trials: 2, probe_particles: 4}}",
    "validate": "{kind: validate, params: {n_points: 32, R_levels: [1.0, 2.0]}}",
    "convergence": "{kind: convergence, params: {n_list: [4, 16], levels: 3, paths: 20}}",
}


def scenario(tmp_path, experiment, name=None):
    name = name or experiment
    path = tmp_path / f"{name}.scenario"
    text = SMALL.format(name=name, experiment=EXPERIMENTS[experiment])
    if experiment == "simulate":
        # independent copies need coefficients that do not read the measure
        text = text.replace(OU, 'kind: custom, params: {drift: "-x", diffusion: "1"}')
    path.write_text(text)
    return path


def csv_bytes(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).glob("*.csv"))}


@pytest.mark.parametrize("experiment", sorted(EXPERIMENTS))
def test_every_experiment_runs_and_is_thread_independent(tmp_path, experiment, capsys):
    path = scenario(tmp_path, experiment)
    assert main(["run", str(path), "--output-dir", str(tmp_path / "a")]) == 0
    assert main(["run", str(path), "--output-dir", str(tmp_path / "b"), "--threads", "8"]) == 0
    a, b = csv_bytes(tmp_path / "a"), csv_bytes(tmp_path / "b")
    assert a and a == b
    report = (tmp_path / "a" / f"{experiment}.report.txt").read_text()
    assert f"config_hash: {config_hash(load_config(path))}" in report
    assert "seed: 99" in report and "versions: mvsvi=" in report
    assert "scenario: " in capsys.readouterr().out


def test_simulate_with_zero_dynamics_writes_constant_paths(tmp_path):
    path = tmp_path / "zero.scenario"
    path.write_text(SMALL.format(name="zero", experiment=EXPERIMENTS["simulate"])
                    .replace(OU,
                             'kind: custom, params: {drift: "0", diffusion: "0"}'))
    assert main(["run", str(path), "--output-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "zero.paths.csv").read_text().splitlines()
    assert rows[0] == "path,t,X,phi,var_phi"
    for pid in ("0", "1"):
        xs = {r.split(",")[2] for r in rows[1:] if r.split(",")[0] == pid}
        assert len(xs) == 1


def test_replay_reproduces_outputs(tmp_path):
    path = scenario(tmp_path, "particles")
    assert main(["run", str(path), "--output-dir", str(tmp_path / "a")]) == 0
    report = tmp_path / "a" / "particles.report.txt"
    assert main(["replay", str(report), "--output-dir", str(tmp_path / "b")]) == 0
    assert csv_bytes(tmp_path / "a") == csv_bytes(tmp_path / "b")


def test_replay_detects_tampering(tmp_path, capsys):
    path = scenario(tmp_path, "simulate")
    main(["run", str(path), "--output-dir", str(tmp_path)])
    report = tmp_path / "simulate.report.txt"
    report.write_text(report.read_text().replace("seed: 99\n", "seed: 100\n", 2))
    assert main(["replay", str(report)]) == 2
    assert "does not match" in capsys.readouterr().err


def test_output_dir_precedence(tmp_path, monkeypatch):
    path = scenario(tmp_path, "simulate")
    path.write_text(path.read_text() + f"output_dir: {tmp_path / 'cfg'}\n")
    monkeypatch.delenv("MVSVI_OUTPUT_DIR")
    main(["run", str(path)])
    assert (tmp_path / "cfg" / "simulate.report.txt").exists()
    monkeypatch.setenv("MVSVI_OUTPUT_DIR", str(tmp_path / "env"))
    main(["run", str(path)])
    assert (tmp_path / "env" / "simulate.report.txt").exists()
    main(["run", str(path), "--output-dir", str(tmp_path / "flag")])
    assert (tmp_path / "flag" / "simulate.report.txt").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.scenario"
    bad.write_text(SMALL.format(name="bad", experiment=EXPERIMENTS["simulate"])
                   .replace("dt: 0.05", "dt: 0"))
    assert main(["run", str(bad)]) == 2
    assert "grid.dt" in capsys.readouterr().err
    assert main(["validate", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.scenario")]) == 2
    bad.write_text("name: [unclosed\n")
    assert main(["validate", str(bad)]) == 2
    assert main(["run", str(scenario(tmp_path, "simulate")), "--threads", "0"]) == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    path = tmp_path / "blowup.scenario"
    path.write_text(SMALL.format(name="blowup", experiment=EXPERIMENTS["simulate"])
                    .replace(OU,
                             'kind: custom, params: {drift: "1/x", diffusion: "0"}')
                    .replace("kind: gaussian, params: {m: 0.5, s: 1.0}",
                             "kind: deterministic, params: {x0: 0.0}")
                    .replace("psi: {kind: interval, params: {lo: -5.0, hi: 5.0}}\n", ""))
    assert main(["run", str(path)]) == 3
    assert "non-finite" in capsys.readouterr().err


def test_validate_prints_canonical_config(tmp_path, capsys):
    path = scenario(tmp_path, "picard")
    assert main(["validate", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# config_hash: ")
    assert parse_config(out) == load_config(path)


def test_validate_experiment_on_toy_scenario(tmp_path, capsys):
    assert main(["run", "toy_cubic_validate", "--output-dir", str(tmp_path)]) == 0
    report = (tmp_path / "toy_cubic_validate.report.txt").read_text()
    assert "assumption1: pass" in report
    table = (tmp_path / "toy_cubic_validate.validation.csv").read_text()
    assert table.startswith("check,status,estimate,declared,note")
    assert "fail" not in table


def test_list_registry(capsys):
    assert main(["list-registry"]) == 0
    out = capsys.readouterr().out
    for word in ("toy_cubic", "ou_meanfield", "cir_like", "custom", "interval", "gaussian",
                 "convergence", "reflected_bm"):
        assert word in out


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5 and "FAIL" not in out


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "mvsvi.cli", "list-registry"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "toy_cubic" in res.stdout
