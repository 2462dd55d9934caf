import subprocess
import sys

import pytest

from imro import cli
from imro.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from imro.trace import read_trace


@pytest.fixture
def manifest(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gen", "--m", "30", "--n", "80", "--k", "4", "--lambda", "0.1", "--seed", "1", "--out", str(out)]) == 0
    return out


def test_gen_writes_manifest(manifest, capsys):
    assert manifest.exists()
    assert (manifest.parent / "g.A.f64").exists()


def test_gen_missing_required(capsys):
    assert main(["gen", "--m", "10", "--k", "2", "--lambda", "0.1"]) == EXIT_USAGE


def test_gen_missing_m_for_dense(tmp_path):
    assert main(["gen", "--n", "10", "--k", "2", "--lambda", "0.1", "--out", str(tmp_path / "x")]) == EXIT_USAGE


def test_gen_conditioned_and_oracle(tmp_path, capsys):
    out = tmp_path / "c.json"
    argv = ["gen", "--family", "conditioned", "--m", "20", "--n", "40", "--k", "3", "--lambda", "0.1"]
    argv += ["--cond", "100", "--oracle", "--oracle-iters", "2000", "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert str(out) in capsys.readouterr().out
    assert (tmp_path / "c.x_oracle.f64").exists()


def test_solve_prints_summary_and_trace(manifest, capsys):
    assert main(["solve", str(manifest), "--solver", "imro2d"]) == EXIT_OK
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("imro2d, Converged, ")
    tr = read_trace(manifest.parent / "g.imro2d.trace.csv")
    assert tr.solver == "imro2d" and tr.records


def test_solve_deterministic_without_timing(manifest, tmp_path):
    paths = [tmp_path / "t1.csv", tmp_path / "t2.csv"]
    for p in paths:
        assert main(["solve", str(manifest), "--solver", "imro1d", "--no-timing", "--trace", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_solve_op_budget(manifest, tmp_path, capsys):
    t = tmp_path / "b.csv"
    assert main(["solve", str(manifest), "--max-ops", "10", "--trace", str(t)]) == EXIT_OK
    tr = read_trace(t)
    assert tr.status.value == "OpBudget"
    assert tr.records[-1].a_calls <= 10


def test_solve_usage_and_runtime_errors(manifest, tmp_path):
    assert main(["solve", str(manifest), "--solver", "cgd"]) == EXIT_USAGE
    assert main(["solve", str(manifest), "--max-ops", "0"]) == EXIT_USAGE
    assert main(["solve", str(tmp_path / "missing.json")]) == EXIT_FAIL
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", str(bad)]) == EXIT_FAIL
    assert main(["solve", str(manifest), "--solver", "fimro", "--target-objective", "1.0"]) == EXIT_USAGE


def test_bench_table(tmp_path, capsys):
    easy = tmp_path / "easy.json"
    hard = tmp_path / "hard.json"
    main(["gen", "--m", "30", "--n", "60", "--k", "3", "--lambda", "0.1", "--seed", "2", "--out", str(easy)])
    main(["gen", "--family", "conditioned", "--m", "60", "--n", "60", "--k", "5", "--lambda", "1e-3",
          "--cond", "1e3", "--seed", "3", "--out", str(hard)])
    rows, traces = cli.bench([easy, hard], ["imro2d", "imro1d", "ista"], dnc_factor=2)
    assert len(rows) == 6
    by = {(r["instance"], r["solver"]): r for r in rows}
    assert by[("hard", "ista")]["a_calls"] == "DNC"
    ref = by[("easy", "imro2d")]
    assert ref["status"] == "Converged"
    ista_easy = by[("easy", "ista")]
    if ista_easy["a_calls"] != "DNC":
        assert ref["a_calls"] < ista_easy["a_calls"]
    assert main(["bench", str(easy), "--solvers", "imro2d,fista", "--trace-dir", str(tmp_path / "tr")]) == 0
    out = capsys.readouterr().out
    assert "instance" in out and "fista" in out
    assert (tmp_path / "tr" / "easy.fista.trace.csv").exists()
    assert main(["bench", str(easy), "--solvers", "newton"]) == EXIT_USAGE


def test_check_passes(manifest, capsys):
    assert main(["check", str(manifest), "--iters", "100"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 5


def test_module_entry_point(manifest):
    r = subprocess.run([sys.executable, "-m", "imro", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "solve" in r.stdout
