"""Tests for the experiment harness: grad-check, configs, runner, CLI."""

import json
import math
import os

import numpy as np
import pytest

from dmaxopt.core import (
    CapabilityError,
    DMaxProblem,
    ParameterError,
    ProblemConstants,
)
from dmaxopt.harness import (
    ExperimentConfig,
    RunAborted,
    apply_overrides,
    build_problem,
    build_schedule,
    config_hash,
    grad_check,
    load_config,
    mode_for_algorithm,
    read_trace,
    run_experiment,
    trace_payload,
)
from dmaxopt.harness.cli import main
from dmaxopt.problems import make_onedim_dwc, make_quadratic_minmax


# ---------------------------------------------------------------------------
# grad-check


def test_grad_check_onedim_is_accurate():
    prob = make_onedim_dwc(1.0, 0.5)
    rep = grad_check(prob, 1.0, n_points=10, min_kink_gap=0.1, seed=0)
    assert rep.max_rel_err < 1e-6
    assert rep.n_checked == 10
    assert rep.n_rejected >= 0


def test_grad_check_minmax_uses_exact_aux():
    prob = make_quadratic_minmax(dim=2)
    rep = grad_check(prob, 0.5, n_points=5, min_kink_gap=0.05, seed=1)
    assert rep.max_rel_err < 1e-6


def test_grad_check_deterministic_in_seed():
    prob = make_onedim_dwc(1.0, 0.5)
    a = grad_check(prob, 1.0, n_points=5, min_kink_gap=0.1, seed=3)
    b = grad_check(prob, 1.0, n_points=5, min_kink_gap=0.1, seed=3)
    assert a == b


def test_grad_check_resample_failure():
    prob = make_onedim_dwc(1.0, 0.5)
    # every point of [-3,3] is within 5 of a kink at gamma=1
    with pytest.raises(RuntimeError, match="resample failure"):
        grad_check(prob, 1.0, n_points=3, min_kink_gap=5.0)


def test_grad_check_needs_envelope_machinery():
    prob = DMaxProblem(
        dim_x=1,
        constants=ProblemConstants(m_bound=1.0),
        phi_subgrad_x=lambda x, y, tok: np.zeros(1),
        psi_subgrad_x=lambda x, z, tok: np.zeros(1),
    )
    with pytest.raises(CapabilityError):
        grad_check(prob, 1.0, n_points=2)


def test_grad_check_validation():
    prob = make_onedim_dwc(1.0, 0.5)
    with pytest.raises(ParameterError):
        grad_check(prob, 1.0, h=0.0)
    with pytest.raises(ParameterError):
        grad_check(prob, 1.0, n_points=0)
    with pytest.raises(ParameterError):
        grad_check(prob, 1.0, sample_box=(3.0, -3.0))


# ---------------------------------------------------------------------------
# configs


def test_load_config_requires_object(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("[1, 2, 3]")
    with pytest.raises(ParameterError):
        load_config(p)
    p.write_text('{"a": 1}')
    assert load_config(p) == {"a": 1}


def test_apply_overrides_dotted_and_typed():
    base = {"schedule": {"gamma": 0.5}, "seeds": [0]}
    out = apply_overrides(base, ["schedule.gamma=1.0", "seeds=[1,2]",
                                 "problem.kind=onedim-dwc", "t_total=10"])
    assert out["schedule"]["gamma"] == 1.0
    assert out["seeds"] == [1, 2]
    assert out["problem"] == {"kind": "onedim-dwc"}  # string fallback
    assert out["t_total"] == 10
    assert base["schedule"]["gamma"] == 0.5  # original untouched
    with pytest.raises(ParameterError):
        apply_overrides(base, ["no_equals_sign"])


def test_config_hash_canonical():
    a = {"x": 1, "y": {"z": [1, 2]}}
    b = {"y": {"z": [1, 2]}, "x": 1}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({"x": 2, "y": {"z": [1, 2]}})
    assert len(config_hash(a)) == 64


def _good_cfg(**over):
    cfg = {
        "problem": {"kind": "onedim-dwc", "noise_sigma": 0.1},
        "algorithm": "smag-dwc",
        "seeds": [0, 1],
        "t_total": 20,
        "x0": 2.0,
        "schedule": {"source": "manual", "gamma": 0.5,
                     "eta0": 0.005, "eta1": 0.01},
        "output_dir": "toy",
    }
    cfg.update(over)
    return cfg


def test_experiment_config_validation():
    ExperimentConfig.from_dict(_good_cfg())
    with pytest.raises(ParameterError, match="unknown config keys"):
        ExperimentConfig.from_dict(_good_cfg(bogus=1))
    with pytest.raises(ParameterError, match="missing"):
        ExperimentConfig.from_dict({"problem": {"kind": "onedim-dwc"}})
    with pytest.raises(ParameterError, match="algorithm"):
        ExperimentConfig.from_dict(_good_cfg(algorithm="adam"))
    with pytest.raises(ParameterError, match="seeds"):
        ExperimentConfig.from_dict(_good_cfg(seeds=[0, 0]))
    with pytest.raises(ParameterError, match="seeds"):
        ExperimentConfig.from_dict(_good_cfg(seeds=[-1]))
    with pytest.raises(ParameterError, match="schedule"):
        ExperimentConfig.from_dict(_good_cfg(schedule={}))
    with pytest.raises(ParameterError, match="lr"):
        ExperimentConfig.from_dict(_good_cfg(algorithm="sgd"))
    with pytest.raises(ParameterError, match="lr_y"):
        ExperimentConfig.from_dict(_good_cfg(algorithm="sgda", lr=0.1))


def test_mode_for_algorithm():
    assert mode_for_algorithm("smag-dmax") == "dmax"
    assert mode_for_algorithm("smag-dwc") == "dwc"
    assert mode_for_algorithm("smag-minmax") == "minmax"
    assert mode_for_algorithm("sgd") is None


def test_build_problem_kinds(tmp_path):
    assert build_problem({"kind": "onedim-dwc"}).name == "onedim-dwc"
    assert build_problem({"kind": "quadratic-minmax",
                          "dim": 3}).dim_x == 3
    pu = build_problem({"kind": "pu-synth", "pi_p": 0.5, "n_pos": 20,
                        "n_unl": 30, "dim": 4})
    assert pu.name == "pu-hinge" and pu.dim_x == 4
    with pytest.raises(ParameterError, match="pi_p"):
        build_problem({"kind": "pu-synth"})
    pauc = build_problem({"kind": "pauc-synth", "n": 40, "dim": 3,
                          "alpha_fair": 0.5})
    assert pauc.name == "pauc-fair"
    with pytest.raises(ParameterError, match="kind"):
        build_problem({"kind": "nope"})
    with pytest.raises(ParameterError):
        build_problem({})


def test_build_problem_libsvm_kinds(tmp_path):
    p = tmp_path / "toy.libsvm"
    p.write_text("+1 1:1.0 2:0.5\n+1 1:0.8 2:-0.2\n-1 1:-1.0 2:0.3\n"
                 "-1 1:-0.7 2:-0.6\n")
    pu = build_problem({"kind": "pu-libsvm", "path": str(p), "pi_p": 0.5,
                        "batch_pos": 2, "batch_unl": 2})
    assert pu.name == "pu-hinge" and pu.dim_x == 2
    with pytest.raises(ParameterError, match="pi_p"):
        build_problem({"kind": "pu-libsvm", "path": str(p)})
    pauc = build_problem({"kind": "pauc-libsvm", "path": str(p),
                          "sensitive_feature": 2, "alpha_fair": 0.1})
    assert pauc.name == "pauc-fair"
    with pytest.raises(ParameterError, match="sensitive_feature"):
        build_problem({"kind": "pauc-libsvm", "path": str(p),
                       "sensitive_feature": 9})


def test_build_schedule_manual_and_theory():
    cfg = ExperimentConfig.from_dict(_good_cfg())
    prob = build_problem(cfg.problem)
    sched = build_schedule(cfg, prob)
    assert sched.t_total == 20 and sched.gamma == 0.5

    theory = _good_cfg(schedule={"source": "theory", "gamma": 0.5,
                                 "epsilon": 0.5})
    cfg_t = ExperimentConfig.from_dict(theory)
    sched_t = build_schedule(cfg_t, prob)
    assert sched_t.t_total == 20  # capped by config t_total
    assert sched_t.epsilon == 0.5

    missing = _good_cfg(schedule={"source": "manual", "gamma": 0.5})
    with pytest.raises(ParameterError, match="eta0"):
        build_schedule(ExperimentConfig.from_dict(missing), prob)
    bad_src = _good_cfg(schedule={"source": "mystery", "gamma": 0.5})
    with pytest.raises(ParameterError, match="source"):
        build_schedule(ExperimentConfig.from_dict(bad_src), prob)
    baseline = ExperimentConfig.from_dict(
        _good_cfg(algorithm="sgd", lr=0.1, schedule={}))
    with pytest.raises(ParameterError):
        build_schedule(baseline, prob)


def test_build_schedule_infeasible_override():
    cfg = ExperimentConfig.from_dict(_good_cfg(
        schedule={"source": "manual", "gamma": 0.5, "eta0": 50.0,
                  "eta1": 50.0}))
    prob = build_problem(cfg.problem)
    with pytest.raises(ParameterError):
        build_schedule(cfg, prob)
    loose = ExperimentConfig.from_dict(_good_cfg(
        schedule={"source": "manual", "gamma": 0.5, "eta0": 50.0,
                  "eta1": 50.0, "allow_infeasible": True}))
    sched = build_schedule(loose, prob)
    assert sched.eta1 == 50.0


# ---------------------------------------------------------------------------
# runner


def test_run_experiment_writes_traces_and_summary(tmp_path):
    res = run_experiment(_good_cfg(), output_root=str(tmp_path))
    assert sorted(res.trace_paths) == [0, 1]
    assert res.aborted_seeds == []
    for seed, path in res.trace_paths.items():
        meta, records = read_trace(path)
        assert meta["format"] == "dmaxopt-trace v1"
        assert meta["config_hash"] == res.cfg_hash
        assert meta["seed"] == str(seed)
        assert meta["algorithm"] == "smag-dwc"
        assert meta["problem"] == "onedim-dwc"
        assert meta["stationarity"] == "exact-envelope-grad"
        assert meta["objective"] == "full-data"
        assert [r.t for r in records] == list(range(1, 21))
        assert all(r.seed == seed for r in records)
        assert not math.isnan(records[-1].objective)
    with open(res.summary_path) as fh:
        text = fh.read()
    assert f"# config_hash: {res.cfg_hash}" in text
    assert "final_objective" in text and "final_stationarity" in text


def test_run_experiment_is_bit_reproducible(tmp_path):
    r1 = run_experiment(_good_cfg(), output_root=str(tmp_path / "a"))
    r2 = run_experiment(_good_cfg(), output_root=str(tmp_path / "b"))
    for seed in (0, 1):
        assert trace_payload(r1.trace_paths[seed]) == \
               trace_payload(r2.trace_paths[seed])


def test_run_experiment_pool_matches_serial(tmp_path):
    serial = run_experiment(_good_cfg(output_dir="s", workers=1),
                            output_root=str(tmp_path))
    pooled = run_experiment(_good_cfg(output_dir="p", workers=2),
                            output_root=str(tmp_path))
    for seed in (0, 1):
        meta_s, rows_s = trace_payload(serial.trace_paths[seed])
        meta_p, rows_p = trace_payload(pooled.trace_paths[seed])
        assert rows_s == rows_p
        # workers and output_dir are part of the config, hence the hash;
        # everything else about the runs must agree
        for m in (meta_s, meta_p):
            m.pop("config_hash")
        assert meta_s == meta_p


def test_run_experiment_zero_iterations(tmp_path):
    res = run_experiment(_good_cfg(t_total=0), output_root=str(tmp_path))
    meta, records = read_trace(res.trace_paths[0])
    assert records == []
    assert meta["note"] == "zero iterations requested"
    with open(res.summary_path) as fh:
        assert "zero iterations requested" in fh.read()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_experiment_abort_keeps_traces(tmp_path):
    cfg = {
        "problem": {"kind": "quadratic-minmax", "dim": 1},
        "algorithm": "smag-minmax",
        "seeds": [0],
        "t_total": 400,
        "x0": 1.0,
        "schedule": {"source": "manual", "gamma": 0.5, "eta0": 100.0,
                     "eta1": 100.0, "allow_infeasible": True},
        "output_dir": "boom",
    }
    with pytest.raises(RunAborted) as exc_info:
        run_experiment(cfg, output_root=str(tmp_path))
    result = exc_info.value.result
    assert result.aborted_seeds == [0]
    meta, records = read_trace(result.trace_paths[0])
    assert "aborted" in meta
    assert len(records) >= 1  # partial trace was kept


def test_run_experiment_sgd_baseline(tmp_path):
    cfg = {
        "problem": {"kind": "onedim-dwc", "noise_sigma": 0.1},
        "algorithm": "sgd",
        "seeds": [0],
        "t_total": 15,
        "x0": 2.0,
        "lr": 0.05,
        "output_dir": "sgd",
    }
    res = run_experiment(cfg, output_root=str(tmp_path))
    meta, records = read_trace(res.trace_paths[0])
    assert meta["stationarity"] == "step-direction-norm"
    assert all(math.isnan(r.p_t) for r in records)  # blank column round-trips


def test_run_experiment_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("DMAXOPT_OUTPUT_ROOT", str(tmp_path / "envroot"))
    res = run_experiment(_good_cfg())
    assert res.output_dir.startswith(str(tmp_path / "envroot"))


def test_read_trace_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ParameterError, match="header"):
        read_trace(str(bad))
    empty = tmp_path / "empty.csv"
    empty.write_text("# only: meta\n")
    with pytest.raises(ParameterError, match="no trace header"):
        read_trace(str(empty))


# ---------------------------------------------------------------------------
# CLI


def _write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_cli_run(tmp_path, capsys):
    path = _write_cfg(tmp_path, _good_cfg())
    code = main(["run", path, "--output-root", str(tmp_path / "out"),
                 "--set", "t_total=5", "--set", "seeds=[3]"])
    out = capsys.readouterr().out
    assert code == 0
    assert "config_hash" in out
    assert "seed 3:" in out
    trace = os.path.join(str(tmp_path / "out"), "toy", "trace_seed3.csv")
    assert os.path.exists(trace)
    _, records = read_trace(trace)
    assert [r.t for r in records] == [1, 2, 3, 4, 5]


def test_cli_run_bad_config(tmp_path, capsys):
    path = _write_cfg(tmp_path, _good_cfg(bogus=1))
    assert main(["run", path]) == 2
    assert "error:" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_run_abort_exit_code(tmp_path, capsys):
    cfg = {
        "problem": {"kind": "quadratic-minmax", "dim": 1},
        "algorithm": "smag-minmax",
        "seeds": [0],
        "t_total": 400,
        "x0": 1.0,
        "schedule": {"source": "manual", "gamma": 0.5, "eta0": 100.0,
                     "eta1": 100.0, "allow_infeasible": True},
        "output_dir": "boomcli",
    }
    path = _write_cfg(tmp_path, cfg)
    code = main(["run", path, "--output-root", str(tmp_path / "out")])
    assert code == 3
    assert "runtime failure" in capsys.readouterr().err


def test_cli_schedule_frozen_example(tmp_path, capsys):
    cfg = {
        "constants": {"delta_phi": 1.0, "delta_psi": 1.0, "mu_phi": 1.0,
                      "mu_psi": 1.0, "l_phi_yx": 1.0, "l_psi_zx": 1.0,
                      "m_bound": 1.0},
        "gamma": 0.5,
        "epsilon": 0.1,
        "mode": "dmax",
    }
    path = _write_cfg(tmp_path, cfg)
    assert main(["schedule", path]) == 0
    out = capsys.readouterr().out
    assert "alpha = 0.25" in out
    assert "eta1 = 1.0172526041666669e-07" in out
    assert "t_total = 32212254720000" in out
    payload = json.loads(out.strip().splitlines()[-1])
    assert payload["tau"] == 0.00390625
    missing = _write_cfg(tmp_path, {"gamma": 0.5}, name="missing.json")
    assert main(["schedule", missing]) == 2


def test_cli_grad_check(tmp_path, capsys):
    cfg = {"problem": {"kind": "onedim-dwc"}, "gamma": 1.0,
           "n_points": 5, "min_kink_gap": 0.1}
    path = _write_cfg(tmp_path, cfg)
    assert main(["grad-check", path]) == 0
    out = capsys.readouterr().out
    assert "max_rel_err" in out
    # an absurd threshold flips it to a runtime failure
    assert main(["grad-check", path, "--set", "max_rel_err=1e-30"]) == 3
    assert "FAIL" in capsys.readouterr().out


def test_cli_fairness(tmp_path, capsys):
    scores = tmp_path / "scores.csv"
    scores.write_text("# produced by a test\n"
                      "score,label,attr\n"
                      "2.0,1,1\n1.0,-1,1\n-1.0,1,-1\n0.5,-1,-1\n")
    path = _write_cfg(tmp_path, {"scores_csv": str(scores), "rho": 1.0})
    assert main(["fairness", path]) == 0
    out = capsys.readouterr().out
    for name in ("dp", "eop", "eod", "pauc"):
        assert f"{name} = " in out

    headerless = tmp_path / "plain.csv"
    headerless.write_text("2.0,1,1\n1.0,-1,1\n-1.0,1,-1\n0.5,-1,-1\n")
    path2 = _write_cfg(tmp_path, {"scores_csv": str(headerless), "rho": 1.0},
                       name="cfg2.json")
    assert main(["fairness", path2]) == 0

    bad = tmp_path / "bad.csv"
    bad.write_text("wat,no,header\n1,1,1\n")
    path3 = _write_cfg(tmp_path, {"scores_csv": str(bad)}, name="cfg3.json")
    assert main(["fairness", path3]) == 2

    path4 = _write_cfg(tmp_path, {"scores_csv": str(tmp_path / "ghost.csv")},
                       name="cfg4.json")
    assert main(["fairness", path4]) == 2
