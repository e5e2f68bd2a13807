import json
import subprocess
import sys

import pytest

from fracoron import cli


def run(args, tmp_path, capsys):
    code = cli.run(list(args) + ["--output-dir", str(tmp_path)])
    return code, capsys.readouterr()


def test_constant_json(tmp_path, capsys):
    code, out = run(["constant", "--dim", "2", "--s", "0.5", "--json"], tmp_path, capsys)
    assert code == 0
    rep = json.loads(out.out)
    assert list(rep) == ["C", "rel_err"]
    assert rep["C"] == pytest.approx(0.15915494309189537, rel=1e-12)
    assert (tmp_path / "constant.json").read_text() == out.out


def test_prop1_writes_sweep_and_report(tmp_path, capsys):
    code, out = run(["prop1", "--dim", "2", "--s", "0.5", "--eps", "0.05", "--delta-sweep", "4",
                     "--z", "0,0", "--format", "csv"], tmp_path, capsys)
    lines = (tmp_path / "prop1.csv").read_text().splitlines()
    assert lines[0] == "# fracoron v1, command=prop1"
    assert lines[1] == "delta,excess"
    assert len(lines) == 6
    assert float(lines[2].split(",")[0]) == pytest.approx(0.05 / 16)
    rep = json.loads((tmp_path / "prop1.json").read_text())
    assert rep["command"] == "prop1" and "report" in rep
    assert code == (0 if rep["passes"] else 1)
    assert out.out == (tmp_path / "prop1.csv").read_text()


def test_verification_failure_exit_code(tmp_path, capsys):
    # the deficit slope over this sweep is far from N
    code, _ = run(["prop2", "--eps", "0.05", "--delta-sweep", "4"], tmp_path, capsys)
    rep = json.loads((tmp_path / "prop2.json").read_text())
    assert code == 1 and rep["passes"] is False
    assert rep["report"]["fitted_slope"] < 1.7


@pytest.mark.parametrize("args", [
    ["nonsense"],
    ["constant", "--dim", "1", "--s", "0.7"],
    ["constant", "--bogus-flag"],
    ["bubble", "--dim", "2", "--z", "1,2,3"],
    ["prop1", "--delta-sweep", "2"],
    ["gap", "--varpi", "0.5"],
])
def test_usage_errors(args, tmp_path, capsys):
    code, _ = run(args, tmp_path, capsys)
    assert code == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    code, out = run(["bubble", "--rel-tol", "1e-15"], tmp_path, capsys)
    assert code == 3
    assert "numerical failure" in out.err


def test_thread_variable_is_validated(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FRACORON_THREADS", "0")
    assert run(["constant"], tmp_path, capsys)[0] == 2
    monkeypatch.setenv("FRACORON_THREADS", "2")
    assert run(["constant"], tmp_path, capsys)[0] == 0


def test_config_file_merges_under_flags(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep settings\ndim = 1\ns = 0.25\neps = 0.5\n")
    code, out = run(["bubble", "--config", str(cfg), "--eps", "2.0"], tmp_path, capsys)
    rep = json.loads(out.out)
    assert code == 0
    assert rep["eps"] == 2.0 and rep["z"] == [0.0]
    cfg.write_text("colour = red\n")
    assert run(["bubble", "--config", str(cfg)], tmp_path, capsys)[0] == 2


def test_reports_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.run(["identities", "--res", "16", "--seed", "4", "--output-dir", str(d)]) == 0
    capsys.readouterr()
    for name in ("identities.json", "identities.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gap_samples_follow_the_seed(tmp_path, capsys, monkeypatch):
    seen = []
    monkeypatch.setattr(cli.est, "rayleigh_gap", lambda e, zs, *a, **k: seen.append(zs.copy()) or
                        cli.est.GapResult(1.0, True, 2.0, 1.0, [1.0] * len(zs)))
    for seed in (1, 1, 2):
        run(["gap", "--samples", "8", "--seed", str(seed)], tmp_path, capsys)
    assert (seen[0] == seen[1]).all() and not (seen[0] == seen[2]).all()
    lines = (tmp_path / "gap.csv").read_text().splitlines()
    assert lines[:2] == ["# fracoron v1, command=gap", "z0,z1,quotient"] and len(lines) == 10


def test_json_round_trip():
    rep = {"b": 0.1, "a": [1e-300, 2.5e10, float("nan")], "ok": True, "n": 3, "name": 'x"y'}
    text = cli.to_json(rep)
    back = json.loads(text)
    assert list(back) == ["b", "a", "ok", "n", "name"]
    assert back["b"] == 0.1 and back["a"][:2] == [1e-300, 2.5e10] and back["a"][2] is None
    assert back["name"] == 'x"y'


def test_solve_small(tmp_path, capsys):
    code, out = run(["solve", "--r1", "0.1", "--r2", "4", "--res", "24", "--epsbar", "0.05"], tmp_path, capsys)
    rep = json.loads(out.out)
    assert code == (0 if rep["window_ok"] and rep["positivity_ok"] else 1)
    head = (tmp_path / "solve_field.txt").read_text().splitlines()[0]
    assert head.startswith("FRACORON-FIELD v1 N=2 s=0.5 res=24 bbox=")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fracoron", "constant", "--dim", "3", "--s", "0.75",
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["rel_err"] < 1e-6
