import json
from pathlib import Path

import pytest

from gpsspoof.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main

ROOT = Path(__file__).resolve().parents[1]


def out_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_run_ok(tmp_path, capsys):
    assert main(["run", "--config", str(ROOT / "configs/fig8a_constrained.toml"), "--out", str(tmp_path)]) == EXIT_OK
    assert out_json(capsys)["verdict"] == "Collided"
    assert (tmp_path / "trajectory.csv").exists() and (tmp_path / "summary.json").exists()


def test_run_uses_env_default_out(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GPSSPOOF_OUT", str(tmp_path))
    assert main(["run", "--config", str(ROOT / "configs/fig8b_baseline.toml")]) == EXIT_OK
    assert (tmp_path / "fig8b-baseline" / "trajectory.csv").exists()


def test_config_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    bad = tmp_path / "bad.toml"
    bad.write_text('schema_version = 1\nbogus = 2\n[environment]\ntarget = [0, 10]\n')
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err


def test_missing_policy_exit_2(tmp_path, capsys):
    cfg = tmp_path / "w.toml"
    cfg.write_text('schema_version = 1\n[environment]\ntarget = [0, 150]\n'
                   f'[policy]\nkind = "weights"\npath = "{tmp_path / "none.gsnp"}"\n')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert main(["replicate", "fig8a", "--policy", str(tmp_path / "none.gsnp"),
                 "--out", str(tmp_path / "r")]) == EXIT_INFEASIBLE


def test_analyze_delay(capsys):
    assert main(["analyze", "delay", "--offset-m", "3.3"]) == EXIT_OK
    rep = out_json(capsys)
    assert 15 <= rep["T"] <= 60 and rep["max_test_ratio"] < 1


def test_analyze_delay_never_converges(capsys):
    assert main(["analyze", "delay", "--offset-m", "50"]) == EXIT_INFEASIBLE


def test_train_tiny(tmp_path, capsys):
    pol = tmp_path / "p.gsnp"
    assert main(["train", "--out", str(pol), "--steps", "300", "--log-every", "0"]) == EXIT_OK
    assert pol.exists() and (tmp_path / "p.curve.csv").read_text().startswith("episode,return,success,length")
    meta = json.loads((tmp_path / "p.gsnp.json").read_text())["metadata"]
    assert meta["td3"]["total_steps"] == 300 and "train_seconds" in meta


def test_bad_subcommand_usage():
    with pytest.raises(SystemExit) as e:
        main(["replicate", "fig9"])
    assert e.value.code == 2
