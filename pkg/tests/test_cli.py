import csv
import json

import numpy as np
import pytest
import tomli

from jumpsense import cli

FAST_FIG2 = """
[delay]
n_samples = 40
n_points = 6
t_max = 20.0
"""

FAST_TRAJ = """
[run]
duration = 2.0
n_traj = 20
record_interval = 0.5
"""


def _spec(tmp_path, text, name="spec.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_print_defaults_round_trips(capsys):
    for sub in cli.DEFAULTS:
        assert cli.main([sub, "--print-defaults"]) == 0
        parsed = tomli.loads(capsys.readouterr().out)
        assert parsed == cli.DEFAULTS[sub]


def test_unknown_key_rejected(tmp_path, capsys):
    spec = _spec(tmp_path, "[delay]\nbogus = 1\n")
    out = tmp_path / "out"
    assert cli.main(["fig2", "--spec", spec, "--out", str(out)]) == 1
    assert "delay.bogus" in capsys.readouterr().err
    assert not out.exists()


def test_wrong_type_rejected(tmp_path):
    spec = _spec(tmp_path, "[delay]\nn_samples = 2.5\n")
    assert cli.main(["fig2", "--spec", spec, "--out", str(tmp_path / "o")]) == 1


def test_malformed_toml(tmp_path, capsys):
    spec = _spec(tmp_path, "[delay\nnot toml")
    out = tmp_path / "out"
    assert cli.main(["fig2", "--spec", spec, "--out", str(out)]) == 1
    assert "invalid configuration" in capsys.readouterr().err
    assert not out.exists()


def test_invalid_physics_parameter(tmp_path):
    spec = _spec(tmp_path, FAST_TRAJ + "dt = 0.5\n")
    out = tmp_path / "out"
    assert cli.main(["trajectory", "--spec", spec, "--out", str(out)]) == 1
    assert not out.exists()


def test_fig2_columns_and_header(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["fig2", "--spec", _spec(tmp_path, FAST_FIG2), "--out", str(out)]) == 0
    text = (out / "fig2.csv").read_text()
    assert text.startswith("# jumpsense fig2 schema_version=1")
    assert '"tau": 0.2' in text.splitlines()[1]
    rows = _rows(out / "fig2.csv")
    assert len(rows) == 6
    assert {"t", "p_exact", "p_order2", "p_order3"} <= set(rows[0])
    doc = json.loads((out / "fig2.json").read_text())
    assert doc["schema_version"] == 1 and doc["spec"]["delay"]["g"] == 0.2


def test_table1_rows(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["table1", "--out", str(out)]) == 0
    rows = json.loads((out / "table1.json").read_text())["results"]["rows"]
    assert [r["alpha"] for r in rows] == [0.01, 0.03, 0.05, 0.08]
    for r in rows:
        assert r["decay"] == pytest.approx(r["reference_decay"], rel=0.1)
        assert "fit_at_fit_g" in r


def test_rerun_byte_identical(tmp_path):
    spec = _spec(tmp_path, FAST_TRAJ)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["trajectory", "--spec", spec, "--out", str(a)]) == 0
    assert cli.main(["trajectory", "--spec", spec, "--out", str(b)]) == 0
    for name in ("trajectory.csv", "trajectory.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    # rerunning into the same directory overwrites in place
    assert cli.main(["trajectory", "--spec", spec, "--out", str(a)]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_seed_override(tmp_path):
    spec = _spec(tmp_path, FAST_TRAJ + "\n[noise]\nloss_alpha = 0.3\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["trajectory", "--spec", spec, "--out", str(a), "--seed", "7"]) == 0
    assert cli.main(["trajectory", "--spec", spec, "--out", str(b)]) == 0
    doc = json.loads((a / "trajectory.json").read_text())
    assert doc["spec"]["run"]["seed"] == 7
    pa = [float(r["p"]) for r in _rows(a / "trajectory.csv")]
    pb = [float(r["p"]) for r in _rows(b / "trajectory.csv")]
    assert not np.allclose(pa, pb)


def test_klcheck_code_file(tmp_path):
    s = 1 / np.sqrt(2)
    # (|uu> + |dd>)/sqrt2 and (|ud> + |du>)/sqrt2: each qubit equally excited
    code = {"n_qubits": 2, "states": [[[s, 0], [0, 0], [0, 0], [s, 0]],
                                      [[0, 0], [s, 0], [s, 0], [0, 0]]]}
    path = tmp_path / "code.json"
    path.write_text(json.dumps(code))
    spec = _spec(tmp_path, f'[check]\ncode_file = "{path}"\nn_random = 5\nhomodyne_codes = 5\n')
    out = tmp_path / "out"
    assert cli.main(["klcheck", "--spec", spec, "--out", str(out)]) == 0
    res = json.loads((out / "klcheck.json").read_text())["results"]
    assert res["kl"]["full_ok"] is False
    assert res["kl"]["diagonal_ok"] is True
    assert res["sigma_z_nogo"]["n_violations"] == 0


def test_klcheck_bad_code_file(tmp_path):
    path = tmp_path / "code.json"
    path.write_text('{"n_qubits": 2}')
    spec = _spec(tmp_path, f'[check]\ncode_file = "{path}"\n')
    assert cli.main(["klcheck", "--spec", spec, "--out", str(tmp_path / "o")]) == 1


def test_master_subcommand(tmp_path):
    spec = _spec(tmp_path, "[run]\nduration = 40.0\n[noise]\nloss_alpha = 0.05\n")
    out = tmp_path / "out"
    assert cli.main(["master", "--spec", spec, "--out", str(out)]) == 0
    res = json.loads((out / "master.json").read_text())["results"]
    assert res["fit"]["m2"] == pytest.approx(0.11, rel=0.15)


def test_threads_must_be_positive(tmp_path):
    assert cli.main(["table1", "--threads", "0", "--out", str(tmp_path / "o")]) == 1
