"""Command-line parsing, exit statuses and reproducible outputs."""
import io
import subprocess
import sys

import pytest

from transitory_sim.cli import UsageError, execute, main, parse_invocation


def run(*argv):
    return subprocess.run([sys.executable, "-m", "transitory_sim.cli", *argv],
                          capture_output=True, text=True)


def test_happy_path_parse():
    inv = parse_invocation("verify --experiment fclt_counting --model exp:1 --n 500 --reps 5000 --seed 42".split())
    assert inv.subcommand == "verify" and inv.n == (500,) and inv.reps == 5000 and inv.seed == 42


def test_missing_seed_is_usage_error():
    with pytest.raises(UsageError):
        parse_invocation(["sample", "--n", "5"])
    proc = run("sample", "--n", "5")
    assert proc.returncode == 2
    assert "seed" in proc.stderr


@pytest.mark.parametrize("argv", [["frobnicate"], ["mu", "--n", "3", "--bogus"], ["verify", "--seed", "1"],
                                  ["verify", "--seed", "1", "--experiment", "nope"]])
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nreps=1000\nmodel.family=exponential\nmodel.rate=2.0\n"
                   "n=10,20\ntolerance.alpha=0.01\n")
    inv = parse_invocation(["verify", "--experiment", "fslln", "--config", str(cfg), "--reps", "5000", "--seed", "1"])
    assert inv.reps == 5000
    assert inv.model == "exp:2.0" and inv.n == (10, 20)
    assert dict(inv.tolerances) == {"alpha": 0.01}


@pytest.mark.parametrize("body", ["colour=blue\n", "reps\n", "reps=many\n", "model.family=weibull\n"])
def test_bad_config_files(tmp_path, body):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(body)
    with pytest.raises(UsageError):
        parse_invocation(["verify", "--experiment", "fslln", "--seed", "1", "--config", str(cfg)])


def test_unreadable_config():
    assert main(["mu", "--n", "3", "--config", "/nonexistent/file.cfg"]) == 2


def test_mu_prints_closed_form():
    proc = run("mu", "--model", "exp:1", "--T", "1", "--n", "9")
    assert proc.returncode == 0
    assert abs(float(proc.stdout) - 0.1) < 1e-8


def test_mu_json_lists_every_n():
    out = io.StringIO()
    assert execute(parse_invocation(["mu", "--n", "0,9", "--format", "json"]), out) == 0
    assert '"0":1,"9":0.1000000000' in out.getvalue()


def test_invalid_model_exit_2():
    out = io.StringIO()
    assert execute(parse_invocation(["mu", "--model", "exp:-1", "--n", "3"]), out) == 2


def test_verify_inverse_bound_exits_0(tmp_path):
    out = io.StringIO()
    inv = parse_invocation(["verify", "--experiment", "inverse_bound", "--model", "unif:1", "--n", "10,50",
                            "--reps", "150", "--seed", "4", "--out", str(tmp_path / "o")])
    assert execute(inv, out) == 0


def test_failed_verdict_exits_1():
    # the n=10^4 bound cannot hold at n=100
    argv = ["verify", "--experiment", "fslln", "--n", "10,100", "--reps", "100", "--seed", "1"]
    assert execute(parse_invocation(argv), io.StringIO()) == 1


def test_same_seed_gives_identical_files(tmp_path):
    base = ["verify", "--experiment", "workload_bb", "--n", "50", "--reps", "100", "--grid", "16",
            "--paths", "3", "--seed", "9"]
    for name in ("a", "b"):
        assert main(base + ["--out", str(tmp_path / name)]) in (0, 1)   # n=50 is far from the limit
    for f in ("report.json", "summary.csv", "paths.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_refuses_to_overwrite_then_force(tmp_path):
    argv = ["sample", "--n", "5", "--reps", "3", "--seed", "1", "--out", str(tmp_path)]
    assert main(argv) == 0
    assert main(argv) == 3
    assert main(argv + ["--force"]) == 0
    lines = (tmp_path / "paths.csv").read_text().splitlines()
    assert lines[0].startswith("# seed=1 config_sha256=")
    assert len(lines) == 2 + 15


def test_report_subcommand(tmp_path, capsys):
    assert main(["compare-ht", "--n", "100", "--reps", "200", "--theta", "0", "--seed", "3",
                 "--grid", "64", "--out", str(tmp_path)]) in (0, 1)
    capsys.readouterr()
    status = main(["report", "--out", str(tmp_path)])
    text = capsys.readouterr().out
    assert "ht_compare" in text and ("PASS" in text or "FAIL" in text)
    assert status in (0, 1)
    assert main(["report", "--out", str(tmp_path / "missing")]) == 2


def test_simulate_workload_outputs_paths(tmp_path):
    assert main(["simulate-workload", "--n", "40", "--reps", "20", "--paths", "2", "--grid", "10",
                 "--seed", "5", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "paths.csv").read_text().splitlines()[2:]
    assert len(rows) == 2 * 11
    assert all(float(r.split(",")[2]) >= 0 for r in rows)
