import json

import pytest

from blockperm.cli import main


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"m": 2, "q": [0.6, 0.4], "mu": [2, 1], "k": [2, 2], "l": [2, 2]}))
    return str(path)


@pytest.mark.parametrize("cmd", ["perm", "bethe", "bethe2", "saddle", "spectrum", "predict", "coeffs"])
def test_spec_commands_json(cmd, spec_file, capsys):
    assert main([cmd, "--spec", spec_file]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out


def test_perm_from_flags_csv(capsys):
    assert main(["perm", "--q", "0.6,0.4", "--mu", "2,1", "--k", "1,1", "--l", "1,1", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split(",")[:2] == ["n", "method"]


def test_bad_spec_exit_code(capsys):
    assert main(["perm", "--q", "0.6,0.4", "--mu", "2,1", "--k", "1,1", "--l", "1,2"]) == 2
    assert "InvalidSpec" in capsys.readouterr().err


def test_ensemble_env_seed(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("BPL_SEED", "11")
    main(["ensemble", "--n", "4", "--trials", "3", "--out", str(a)])
    main(["ensemble", "--n", "4", "--trials", "3", "--seed", "11", "--out", str(b), "--threads", "3"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("trial_index,n,m,log_perm,log_bethe2,log_bethe,log_scsink,rho2,pred_thm1")


def test_sweep_json(tmp_path):
    out = tmp_path / "s.json"
    assert main(["sweep", "--ns", "2,4", "--format", "json", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["records"]) == 2
