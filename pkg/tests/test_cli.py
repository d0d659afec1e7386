import json

import pytest

from conftest import FIXTURES
from reflow import cli
from reflow.geom import CSV_COLUMNS
from reflow.loops import load_connection


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_pair_possible(capsys):
    code, out, _ = run(capsys, "pair", "--config", FIXTURES / "s21_sweep.ini")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("family SpaceForm n=2 k=1")
    assert lines[1].startswith("dims pp=")
    assert lines[2:] == ["rank 2", "possible: rank=2"]


def test_pair_lagrangian(capsys):
    code, out, _ = run(capsys, "pair", "--config", FIXTURES / "lagrangian2.ini")
    assert code == 0 and out.splitlines()[-1] == "possible: rank=2"


def test_pair_reports_obstruction_without_failing(capsys):
    code, out, _ = run(capsys, "pair", "--config", FIXTURES / "obstructed.ini")
    assert code == 0 and out.splitlines()[-1] == "obstructed: n=3 > rank=2"


def test_vacuum_obstructed_exit_code(capsys, tmp_path):
    code, _, err = run(capsys, "vacuum", "--config", FIXTURES / "obstructed.ini", "--out", tmp_path)
    assert code == cli.EXIT_OBSTRUCTED
    assert "obstructed: n=3 > rank=2" in err
    assert not any(tmp_path.iterdir())


def test_vacuum_writes_flat_container(capsys, tmp_path):
    code, out, _ = run(capsys, "vacuum", "--config", FIXTURES / "s22.ini", "--out", tmp_path)
    assert code == 0
    f = load_connection(tmp_path / "connection.rfc")
    assert f.spec.k == 2
    assert "mc residual max" in out


@pytest.mark.parametrize("argv", [
    ("verify", "--config", FIXTURES / "zero_lambda.ini"),
    ("verify", "--config", FIXTURES / "s21_sweep.ini", "--tol", "nonsense=1e-3"),
    ("verify", "--config", FIXTURES / "s21_sweep.ini", "--tol", "sec_dev"),
    ("verify", "--lambda", "1,abc"),
    ("frobnicate",),
    (),
])
def test_config_errors(capsys, argv):
    assert run(capsys, *argv)[0] == cli.EXIT_CONFIG


def test_missing_config_is_config_error(capsys, tmp_path):
    assert run(capsys, "pair", "--config", tmp_path / "none.ini")[0] == cli.EXIT_CONFIG


def test_missing_input_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "verify", "--input", tmp_path / "missing.rfc", "--out", tmp_path)
    assert code == cli.EXIT_IO and "I/O error" in err


def test_corrupt_input_is_io_error(capsys, tmp_path):
    bad = tmp_path / "bad.rfc"
    bad.write_bytes(b"not a container")
    assert run(capsys, "verify", "--input", bad, "--out", tmp_path)[0] == cli.EXIT_IO


def test_unwritable_output_is_io_error(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, _ = run(capsys, "vacuum", "--config", FIXTURES / "s22.ini", "--out", blocker / "sub")
    assert code == cli.EXIT_IO


def test_verify_is_byte_identical_across_runs(capsys, tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        code, _, _ = run(capsys, "verify", "--config", FIXTURES / "s21_sweep.ini", "--out", d)
        assert code == 0
        outs.append(((d / "report.csv").read_bytes(), (d / "report.json").read_bytes()))
    assert outs[0] == outs[1]
    header, *rows = outs[0][0].decode().splitlines()
    assert header == ",".join(CSV_COLUMNS)
    assert [r.split(",")[3] for r in rows] == ["0.5", "1.0", "2.0", "3.0"]
    assert [d["lambda"] for d in json.loads(outs[0][1])] == [0.5, 1.0, 2.0, 3.0]


def test_thread_count_does_not_change_reports(capsys, tmp_path, monkeypatch):
    got = []
    for threads in ("1", "3"):
        monkeypatch.setenv("REFLOW_THREADS", threads)
        d = tmp_path / threads
        assert run(capsys, "verify", "--config", FIXTURES / "lagrangian2.ini", "--out", d)[0] == 0
        got.append((d / "report.csv").read_bytes())
    assert got[0] == got[1]


def test_bad_thread_count(capsys, monkeypatch):
    monkeypatch.setenv("REFLOW_THREADS", "many")
    assert run(capsys, "verify", "--config", FIXTURES / "lagrangian2.ini")[0] == cli.EXIT_CONFIG


def test_imported_fixture_verifies(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--config", FIXTURES / "imported.ini", "--out", tmp_path)
    assert code == 0, out
    assert out.count(" ok") == 2


@pytest.mark.parametrize("fixture,names", [
    ("defect_bracket", ["mc"]),
    ("defect_degree", ["degree", "mc"]),
])
def test_planted_defects_fail_with_named_check(capsys, tmp_path, fixture, names):
    code, out, _ = run(capsys, "verify", "--config", FIXTURES / f"{fixture}.ini", "--out", tmp_path)
    assert code == cli.EXIT_VERIFY
    line = [l for l in out.splitlines() if l.startswith("verification failed: ")][0]
    assert [p.split("=")[0] for p in line.removeprefix("verification failed: ").split(", ")] == names
    assert (tmp_path / "report.failed").exists()
    assert not (tmp_path / "report.csv").exists()


def test_tight_budget_fails_named_check(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--config", FIXTURES / "tight_curvature.ini", "--out", tmp_path)
    assert code == cli.EXIT_VERIFY
    assert "FAIL sec_dev=" in out
    assert (tmp_path / "report.csv").exists()


def test_hyperbolic_verify(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--config", FIXTURES / "hyperbolic21.ini", "--out", tmp_path)
    assert code == 0, out
    assert "expected -0.640000" in out


def test_scan_sorts_lambda(capsys, tmp_path):
    code, _, _ = run(capsys, "scan", "--config", FIXTURES / "s21_sweep.ini", "--lambda", "3,-2,1",
                     "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "scan.csv").read_text().splitlines()[1:]
    assert [r.split(",")[3] for r in rows] == ["-2.0", "1.0", "3.0"]


def test_lambda_sweep_helper():
    lams = cli.lambda_sweep(1, 100, 3, True)
    assert lams == pytest.approx((1.0, 10.0, 100.0))
    with pytest.raises(cli.ConfigError):
        cli.lambda_sweep(-1, 10, 3, True)
