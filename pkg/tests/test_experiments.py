"""Experiment engine: configuration, determinism, schedule independence, report format."""
import json
import os
import subprocess
import sys

import pytest

from transitory_sim.experiments import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    canonical_json,
    csv_text,
    run_experiment,
    write_outputs,
)
from transitory_sim.samplers import AcceptanceTooLow


def small(experiment, **kw):
    kw.setdefault("reps", 200)
    return ExperimentConfig(experiment, seed=kw.pop("seed", 1), **kw)


def test_every_experiment_is_registered():
    assert len(EXPERIMENTS) == 10


@pytest.mark.parametrize("kw", [dict(reps=99), dict(n=(0,)), dict(T=0.0), dict(seed=-1),
                                dict(tolerances=(("bogus", 1.0),)), dict(model="weibull:1"),
                                dict(t=(2.0,))])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        run_experiment(small("fslln", **kw))


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        ExperimentConfig("nope", seed=1).resolved()


def test_defaults_are_filled():
    cfg = ExperimentConfig("fclt_poisson", seed=3).resolved()
    assert cfg.n == (400,) and cfg.reps == 5000 and cfg.model == "rate:0:0,1:2" and cfg.t == (0.5, 0.8)
    assert dict(cfg.tolerances)["alpha"] == 1e-3


def test_mu_n_lemma_reports_closed_form():
    rep = run_experiment(small("mu_n_lemma", n=(9, 99)))
    assert rep.results["n=9"]["mu_n"] == pytest.approx(0.1, abs=1e-8)
    assert rep.results["n=99"]["mu_n"] == pytest.approx(0.01, abs=1e-8)
    assert rep.passed


def test_inverse_bound_has_no_violations():
    rep = run_experiment(small("inverse_bound", n=(10, 100), reps=300, model="gamma:0.5,1"))
    assert rep.passed
    assert all(rep.results[k]["violations"] == 0 for k in ("n=10", "n=100"))


def test_report_is_deterministic_and_schedule_independent():
    cfg = small("fclt_counting", n=(100,), reps=300)
    a = run_experiment(cfg, workers=1).to_json()
    b = run_experiment(cfg, workers=1).to_json()
    c = run_experiment(cfg, workers=3).to_json()
    assert a == b == c
    d = run_experiment(small("fclt_counting", n=(100,), reps=300, seed=2), workers=1).to_json()
    assert a != d


def test_every_verdict_names_a_criterion():
    for name in ("exchangeability", "fclt_poisson", "os_vs_rejection"):
        rep = run_experiment(small(name, reps=300))
        assert rep.verdicts and all(v.criterion for v in rep.verdicts)


def test_acceptance_failure_carries_context():
    cfg = small("fslln", n=(50,), autoscale=False, model="exp:0.001", max_attempts=100)
    with pytest.raises(AcceptanceTooLow, match=r"fslln n=50 replication 0"):
        run_experiment(cfg)


def test_experiment_specific_preconditions():
    with pytest.raises(ConfigError):
        run_experiment(small("workload_bb", T=2.0))
    with pytest.raises(ConfigError):
        run_experiment(small("os_vs_rejection", model="gamma:2,1"))


def test_non_exponential_workload_reports_without_asserting():
    rep = run_experiment(small("workload_bb", n=(100,), model="gamma:2,1", grid=64))
    assert rep.verdicts == []
    assert "bridge_scale_sq_fit" in rep.results["n=100"]


def test_canonical_json_format():
    text = canonical_json({"b": 0.1, "a": [1, True, None, float("nan")]})
    assert text == '{"a":[1,true,null,"nan"],"b":0.10000000000000001}\n'


def test_outputs_carry_provenance_and_refuse_overwrite(tmp_path):
    rep = run_experiment(small("fclt_counting", n=(50,), reps=100, paths=2, grid=8))
    written = write_outputs(rep, tmp_path)
    names = sorted(p.name for p in written)
    assert names == ["paths.csv", "report.json", "summary.csv"]
    header = f"# seed=1 config_sha256={rep.config_hash}"
    for csv in ("paths.csv", "summary.csv"):
        assert (tmp_path / csv).read_text().splitlines()[0] == header
    assert (tmp_path / "paths.csv").read_text().splitlines()[1] == "replication,t,value"
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["provenance"] == {"seed": 1, "config_sha256": rep.config_hash}
    with pytest.raises(FileExistsError):
        write_outputs(rep, tmp_path)
    write_outputs(rep, tmp_path, force=True)


def test_csv_floats_round_trip():
    text = csv_text(("x",), [(0.1,), (1 / 3,)], 5, "ab")
    assert [float(v) for v in text.splitlines()[2:]] == [0.1, 1 / 3]


def test_report_identical_across_kernel_backends():
    code = ("from transitory_sim.experiments import ExperimentConfig, run_experiment;"
            "import sys; sys.stdout.write(run_experiment(ExperimentConfig('workload_bb', seed=5, n=(60,),"
            " reps=150, grid=32)).to_json())")
    outs = []
    for pure in ("0", "1"):
        env = {**os.environ, "TRANSITORY_SIM_PURE": pure}
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    assert outs[0] == outs[1] and outs[0].startswith("{")
