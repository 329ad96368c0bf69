import json

import numpy as np
import pytest

from zeroinertia import PhaseEnsemble, RadialPotential, SpatialEnsemble, write_ensemble_csv
from zeroinertia.harness import (
    ExperimentSpec,
    SpecError,
    emit_report,
    load_spec,
    load_summary,
    parse_spec_text,
    read_series_csv,
    run_experiment,
    sweep_epsilon,
    write_series_csv,
)
from zeroinertia.harness.cli import main
from zeroinertia.harness.scenarios import build_initial
from zeroinertia.metrics import RateFit

SMALL = dict(scenario="gaussian_blob", n_atoms=40, horizon=0.5, seed=5, w1_times=(0.5,),
             epsilon_list=(0.1, 0.05, 0.025))


def _spec(tmp_path, **kw):
    return ExperimentSpec(**{**SMALL, "output_dir": str(tmp_path), **kw})


# -- specification ---------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(SpecError, match="seed"):
        ExperimentSpec()
    with pytest.raises(SpecError, match="decreasing"):
        ExperimentSpec(seed=1, epsilon_list=(0.01, 0.1))
    with pytest.raises(SpecError):
        ExperimentSpec(seed=1, epsilon_list=())
    with pytest.raises(SpecError):
        ExperimentSpec(seed=1, scenario="spiral")
    with pytest.raises(SpecError):
        ExperimentSpec(scenario="two_atom_quadratic", n_atoms=3)
    with pytest.raises(SpecError):
        ExperimentSpec(scenario="custom_csv", n_atoms=2)
    with pytest.raises(SpecError, match="multiple"):
        ExperimentSpec(seed=1, snapshot_interval=0.0015)
    assert ExperimentSpec(scenario="two_atom_quadratic", n_atoms=2).seed is None


def test_spec_text_round_trip(tmp_path):
    spec = ExperimentSpec(seed=3, name="x", potential=RadialPotential.smoothed_morse(smoothing=0.3),
                          epsilon_list=(0.2, 0.1), cutoff=4.0, diagnostics=("I", "w1"))
    assert parse_spec_text(spec.to_text()) == spec
    path = tmp_path / "exp.cfg"
    path.write_text("# comment line\n" + spec.to_text() + "\n")
    assert load_spec(path) == spec
    assert load_spec(path, n_atoms=10).n_atoms == 10


def test_spec_text_errors(tmp_path):
    with pytest.raises(SpecError, match="unknown config key"):
        parse_spec_text("colour = red\n")
    with pytest.raises(SpecError, match="duplicate"):
        parse_spec_text("seed = 1\nseed = 2\n")
    with pytest.raises(SpecError, match="expected"):
        parse_spec_text("seed 1\n")
    with pytest.raises(SpecError, match="bad value"):
        parse_spec_text("seed = one\n")
    with pytest.raises(SpecError, match="cannot read"):
        load_spec(tmp_path / "missing.cfg")


def test_two_atom_default_count():
    assert parse_spec_text("scenario = two_atom_quadratic\n").n_atoms == 2


def test_config_hash_semantics():
    base = ExperimentSpec(seed=1)
    assert base.replace(name="other", output_dir="elsewhere").config_hash() == base.config_hash()
    for change in (dict(seed=2), dict(n_atoms=999), dict(epsilon_list=(0.1, 0.05)), dict(step=5e-4),
                   dict(potential=RadialPotential.gaussian_attractive(length=2.0)), dict(diagnostics=("I",)),
                   dict(include_self_term=False)):
        assert base.replace(**change).config_hash() != base.config_hash(), change


# -- scenarios -----------------------------------------------------------------------------

def test_scenarios_are_seeded():
    a, _ = build_initial(ExperimentSpec(**{**SMALL, "velocity_init": "noise"}))
    b, _ = build_initial(ExperimentSpec(**{**SMALL, "velocity_init": "noise"}))
    assert np.array_equal(a.points, b.points)
    ring, p = build_initial(ExperimentSpec(scenario="ring_2d", n_atoms=50, seed=1))
    assert p.kind == "gaussian_pair"
    assert np.allclose(np.linalg.norm(ring.x, axis=1), 1.0, atol=0.3)
    two, p = build_initial(ExperimentSpec(scenario="two_atom_quadratic", n_atoms=2, dim=3))
    assert p.kind == "quadratic_with_cutoff" and np.array_equal(two.x[0], -two.x[1])
    zero, _ = build_initial(ExperimentSpec(**{**SMALL, "velocity_init": "zero"}))
    assert not zero.v.any()


def test_custom_csv_scenario(tmp_path):
    x = np.random.default_rng(0).normal(size=(6, 2))
    write_ensemble_csv(SpatialEnsemble.uniform(x), tmp_path / "s.csv")
    f, _ = build_initial(ExperimentSpec(scenario="custom_csv", input_csv=str(tmp_path / "s.csv"), n_atoms=6))
    assert np.array_equal(f.x, x)
    write_ensemble_csv(PhaseEnsemble.uniform(x, -x), tmp_path / "p.csv")
    g, _ = build_initial(ExperimentSpec(scenario="custom_csv", input_csv=str(tmp_path / "p.csv"), n_atoms=6))
    assert np.array_equal(g.v, -x)
    with pytest.raises(SpecError, match="dimension"):
        build_initial(ExperimentSpec(scenario="custom_csv", input_csv=str(tmp_path / "s.csv"), dim=3))
    with pytest.raises(SpecError, match="cannot read"):
        build_initial(ExperimentSpec(scenario="custom_csv", input_csv=str(tmp_path / "none.csv")))


# -- runs ----------------------------------------------------------------------------------

def test_run_is_byte_reproducible(tmp_path):
    s1 = run_experiment(_spec(tmp_path / "a"))
    s2 = run_experiment(_spec(tmp_path / "b"))
    text1 = (tmp_path / "a" / "experiment" / "summary.json").read_text()
    assert text1 == (tmp_path / "b" / "experiment" / "summary.json").read_text()
    for name in ("series.csv", "reference/trajectory.csv", "eps_01_0.05/diagnostics.csv",
                 "eps_01_0.05/trajectory.csv"):
        assert (tmp_path / "a" / "experiment" / name).read_bytes() == \
            (tmp_path / "b" / "experiment" / name).read_bytes()
    assert s1.passed == s2.passed
    data = json.loads(text1)
    assert {"slope", "constant", "residual", "config_hash"} <= data.keys()
    assert data["config_hash"] == _spec(tmp_path).config_hash()


def test_worker_count_does_not_change_output(tmp_path, monkeypatch):
    run_experiment(_spec(tmp_path / "one"))
    monkeypatch.setenv("ZEROINERTIA_WORKERS", "3")
    run_experiment(_spec(tmp_path / "three"))
    for name in ("summary.json", "series.csv", "eps_02_0.025/trajectory.csv"):
        assert (tmp_path / "one" / "experiment" / name).read_bytes() == \
            (tmp_path / "three" / "experiment" / name).read_bytes()


def test_single_eps_records_insufficient_points(tmp_path):
    summary = run_experiment(_spec(tmp_path, epsilon_list=(0.05,)))
    assert summary.fits["I_sup"] == "insufficient points"
    data = json.loads((tmp_path / "experiment" / "summary.json").read_text())
    assert data["fits"]["I_sup"] == {"error": "insufficient points"}
    assert data["metadata"]["phase_space_norm"].startswith("euclidean")


def test_sweep_epsilon_shapes():
    out = sweep_epsilon(ExperimentSpec(**SMALL))
    assert [e for e, _ in out] == [0.1, 0.05, 0.025]
    for _, s in out:
        assert len(s.times) == len(s.I) == 51
        assert np.all(s.I >= 0) and np.all(s.support >= 0)
        assert np.isnan(s.w1[0]) and s.w1[-1] >= 0


def test_two_atom_trajectory_slope(tmp_path):
    spec = ExperimentSpec(scenario="two_atom_quadratic", n_atoms=2, epsilon_list=(0.1, 0.05, 0.025, 0.0125),
                          output_dir=str(tmp_path))
    summary = run_experiment(spec)
    fit = summary.fits["traj_err_sup"]
    assert isinstance(fit, RateFit) and 0.8 <= fit.slope <= 1.3
    assert summary.passed


def test_report_and_series_round_trip(tmp_path):
    summary = run_experiment(_spec(tmp_path))
    run_dir = tmp_path / "experiment"
    text = (run_dir / "report.txt").read_text()
    for check in summary.checks:
        assert check.line() in text
    back = read_series_csv(run_dir / "series.csv")
    for a, b in zip(summary.series, back):
        assert a.epsilon == b.epsilon
        for col, values in a.columns().items():
            assert np.array_equal(values, b.columns()[col], equal_nan=True), col
    loaded = load_summary(run_dir)
    assert loaded.to_json() == summary.to_json()
    write_series_csv(back, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == (run_dir / "series.csv").read_bytes()


def test_empty_diagnostics_report(tmp_path):
    summary = run_experiment(_spec(tmp_path, diagnostics=()))
    report = (tmp_path / "experiment" / "report.txt").read_text()
    assert "configuration:" in report and "checks:" not in report and "rate fits" not in report
    assert summary.checks == [] and summary.passed
    out_dir = tmp_path / "copy"
    report_path, series_path = emit_report(summary, out_dir)
    assert report_path.read_text() == report
    assert series_path.read_text().splitlines()[0] == "series,epsilon,t,value"


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="run directory"):
        run_experiment(_spec(tmp_path, output_dir=str(blocker)))


# -- command line --------------------------------------------------------------------------

def test_cli_sweep_and_report(tmp_path, capsys):
    args = ["sweep", "--scenario", "two_atom_quadratic", "--epsilon-list", "0.1,0.05,0.025",
            "--output-dir", str(tmp_path), "--name", "two"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "overall: PASS" in out
    assert main(["report", str(tmp_path / "two")]) == 0
    assert "checks:" in capsys.readouterr().out


def test_cli_simulate(tmp_path):
    assert main(["simulate", "--scenario", "gaussian_blob", "--seed", "1", "--n-atoms", "20", "--horizon", "0.2",
                 "--w1-times", "0.2", "--epsilon", "0.05", "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "experiment" / "eps_00_0.05" / "diagnostics.csv").exists()


def test_cli_fail_exit_code(tmp_path):
    # horizon 0.2 ends before the burn-in 10*eps, so the moment-functional check cannot pass
    code = main(["sweep", "--scenario", "gaussian_blob", "--seed", "2", "--n-atoms", "20", "--horizon", "0.2",
                 "--w1-times", "0.2", "--epsilon-list", "0.1,0.05", "--output-dir", str(tmp_path)])
    assert code == 1
    summary = load_summary(tmp_path / "experiment")
    assert summary.fits["I_sup"].startswith("no snapshots after the burn-in")
    assert not summary.passed


def test_cli_errors(tmp_path, capsys):
    assert main(["sweep", "--scenario", "gaussian_blob"]) == 2
    assert "seed" in capsys.readouterr().err
    assert main(["sweep", "--scenario", "nowhere", "--seed", "1"]) == 2
    assert main(["sweep", "--potential", "kind"]) == 2
    assert main(["w1", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 2
    assert main(["bogus"]) == 2
    assert main([]) == 2


def test_cli_w1_and_adjoint(tmp_path, capsys):
    rng = np.random.default_rng(0)
    write_ensemble_csv(SpatialEnsemble.uniform(rng.normal(size=(5, 2))), tmp_path / "a.csv")
    write_ensemble_csv(SpatialEnsemble.uniform(rng.normal(size=(5, 2))), tmp_path / "b.csv")
    assert main(["w1", str(tmp_path / "a.csv"), str(tmp_path / "b.csv"), "--method", "flow"]) == 0
    flow = float(capsys.readouterr().out)
    assert main(["w1", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(flow, abs=1e-12)
    assert main(["adjoint-check", "--seed", "4", "--configs", "2"]) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("scenario = gaussian_blob\nseed = 9\nn_atoms = 20\nhorizon = 0.2\nw1_times = 0.2\n"
                   "epsilon_list = 0.1\npotential.kind = gaussian_pair\n")
    assert main(["sweep", "--config", str(cfg), "--output-dir", str(tmp_path), "--name", "c"]) == 0
    spec = load_summary(tmp_path / "c").spec
    assert spec.potential.kind == "gaussian_pair" and spec.seed == 9
