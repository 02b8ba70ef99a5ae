import csv
import json
import os

import numpy as np
import pytest

from caerom.errors import (
    CompatibilityError,
    ConfigurationError,
    DimensionError,
    FormatError,
    SolverError,
    StageError,
    TrainingError,
)
from caerom.pipeline import (
    build_config,
    convergence_study,
    default_config,
    file_checksum,
    load_config,
    load_dataset,
    load_report,
    load_summary,
    make_problem,
    offline_run,
    online_mc_run,
    report_emit,
    save_dataset,
    save_report,
    validate_run,
)
from caerom.pipeline import runner
from caerom.pipeline.cli import main
from caerom.pipeline.dataset import DatasetWriter
from caerom.pipeline.report import read_matrix_csv
from caerom.pipeline.runner import convergence_cells, evaluate_ebar
from caerom.stats import McReport, normalized_error
from caerom.surrogate import load_checkpoint
from caerom.surrogate.checkpoint import to_bytes

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")

SMOKE = {
    "problem": "burgers",
    "sampling": {"n": 2},
    "solver": {"burgers": {"n_x": 40, "n_t": 40}},
    "cae": {"latent_dim": 2, "filters": [8, 4], "train": {"epochs": 3, "lr": 1e-3, "batch_size": 2}},
    "ffnn": {"hidden": [8], "train": {"epochs": 5, "lr": 1e-3, "batch_size": 2}},
    "mc": {"n": 4, "batch": 3, "probes": [{"label": "centre", "x": 0.0, "t": 2.0}]},
    "validate": {"thetas": [[0.5]]},
    "converge": {"latent_dims": [2], "dataset_sizes": [2], "n_eval": 3, "reference_latent": 2,
                 "reference_size": 2},
}


def smoke_config(out, **extra):
    from caerom.pipeline.config import deep_merge

    return build_config(deep_merge(SMOKE, extra), out=str(out))


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    cfg = smoke_config(out)
    return cfg, offline_run(cfg)


# ---- configuration ---------------------------------------------------------

@pytest.mark.parametrize("problem", ["burgers", "elasticity"])
def test_defaults_validate(problem):
    cfg = build_config({"problem": problem})
    assert cfg["problem"] == problem


@pytest.mark.parametrize("name", ["burgers.toml", "elasticity.toml", "elasticity_reduced.toml", "smoke.toml"])
def test_shipped_configs_load(name):
    cfg = load_config(os.path.join(CONFIG_DIR, name))
    make_problem(cfg).cae_architecture().validate()


def test_schema_error_names_the_path():
    with pytest.raises(ConfigurationError, match="cae/train/lr"):
        build_config({"cae": {"train": {"lr": -1.0}}})
    with pytest.raises(ConfigurationError, match="bogus"):
        build_config({"bogus": 1})


@pytest.mark.parametrize("user, match", [
    ({"sampling": {"parameters": [{"name": "a", "kind": "uniform", "lo": 0, "hi": 1},
                                  {"name": "b", "kind": "uniform", "lo": 0, "hi": 1}]}}, "exactly one"),
    ({"sampling": {"parameters": [{"name": "nu", "kind": "uniform", "lo": 0.5, "hi": 0.5}]}}, "lo < hi"),
    ({"ffnn": {"latent_dim": 4}}, "latent_dim"),
    ({"sampling": {"n": 10}}, "batch_size"),
    ({"validate": {"thetas": [[0.1, 0.2]]}}, "validate theta"),
    ({"converge": {"dataset_sizes": [200]}}, "dataset_sizes"),
])
def test_cross_field_rules(user, match):
    with pytest.raises(ConfigurationError, match=match):
        build_config(user)


def test_elasticity_cross_field_rules():
    with pytest.raises(ConfigurationError, match="moduli"):
        build_config({"problem": "elasticity",
                      "sampling": {"parameters": [{"name": "E", "kind": "lognormal", "mean": 1.0, "sd": 0.1}]}})
    with pytest.raises(ConfigurationError, match="either csv"):
        build_config({"problem": "elasticity",
                      "solver": {"elasticity": {"ground_motion": {"csv": "a.csv", "seed": 1}}}})
    # a csv-only table replaces the synthetic default rather than merging into it
    cfg = build_config({"problem": "elasticity", "solver": {"elasticity": {"ground_motion": {"csv": "a.csv"}}}})
    assert cfg["solver"]["elasticity"]["ground_motion"] == {"csv": "a.csv"}


def test_bad_toml_is_a_configuration_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("problem = \n")
    with pytest.raises(ConfigurationError):
        load_config(str(path))


def test_overrides_win():
    cfg = build_config({"seed": 3}, seed=11, out="elsewhere")
    assert cfg["seed"] == 11 and cfg["out"] == "elsewhere"
    assert default_config("burgers")["seed"] == 0


# ---- problems --------------------------------------------------------------

def test_burgers_probe_snaps_to_grid():
    problem = make_problem(build_config({}))
    (label, row, col), _ = problem.resolve_probes()
    assert label == "x=-0.5075,t=2.4747"
    assert row == np.argmin(np.abs(problem.base.x + 0.5075))
    assert col == np.argmin(np.abs(problem.base.t - 2.4747))
    assert problem.shape == (200, 100)


def test_probe_outside_matrix_rejected():
    cfg = build_config({"mc": {"probes": [{"row": 500, "col": 0}]}})
    with pytest.raises(ConfigurationError):
        make_problem(cfg).resolve_probes()


def test_reduced_structural_problem():
    cfg = load_config(os.path.join(CONFIG_DIR, "elasticity_reduced.toml"))
    problem = make_problem(cfg)
    assert problem.shape == (204, 150)
    rows = [r for _, r, _ in problem.resolve_probes()]
    assert rows == [r for _, r in problem.history_rows()]
    U = problem.solve([30e9, 30e9, 30e9]).values
    assert U.shape == problem.shape and np.all(np.isfinite(U))


def test_sampling_is_float32_exact_and_seeded():
    problem = make_problem(build_config({}))
    a = problem.sample(50, seed=4)
    assert np.array_equal(a, a.astype(np.float32).astype(float))
    assert np.array_equal(a, problem.sample(50, seed=4))
    assert not np.array_equal(a, problem.sample(50, seed=4, stream="mc"))
    assert np.all((a >= 0) & (a <= 1))


def test_fingerprint_tracks_solver_settings():
    a = make_problem(build_config({}))
    b = make_problem(build_config({"solver": {"burgers": {"substeps": 2}}}))
    assert a.fingerprint() == make_problem(build_config({"seed": 9})).fingerprint()
    assert a.fingerprint() != b.fingerprint()


# ---- dataset file ----------------------------------------------------------

def _toy_dataset(n=3, d=4, nt=5):
    rng = np.random.default_rng(0)
    return rng.normal(size=(n, 2)).astype(np.float32), rng.normal(size=(n, d, nt))


def test_dataset_round_trip(tmp_path):
    params, sols = _toy_dataset()
    path = str(tmp_path / "ds.bin")
    checksum = save_dataset(path, params, sols, ["a", "b"], "fp")
    ds = load_dataset(path)
    assert ds.checksum == checksum and ds.fingerprint == "fp" and ds.param_names == ["a", "b"]
    assert np.array_equal(ds.params, params.astype(float))
    assert np.array_equal(ds.solutions, sols.astype(np.float32).astype(float))
    assert float.fromhex(ds.stats["max"]) == float(sols.astype(np.float32).max())
    mm = load_dataset(path, mmap=True)
    assert np.array_equal(np.asarray(mm.solutions, dtype=float), ds.solutions)


def test_dataset_checksum_is_deterministic(tmp_path):
    params, sols = _toy_dataset()
    a = save_dataset(str(tmp_path / "a.bin"), params, sols)
    b = save_dataset(str(tmp_path / "b.bin"), params, sols)
    assert a == b
    assert file_checksum(str(tmp_path / "a.bin")) == file_checksum(str(tmp_path / "b.bin"))


@pytest.mark.parametrize("damage", ["flip", "truncate", "magic"])
def test_dataset_corruption_detected(tmp_path, damage):
    params, sols = _toy_dataset()
    path = tmp_path / "ds.bin"
    save_dataset(str(path), params, sols)
    data = bytearray(path.read_bytes())
    if damage == "flip":
        data[-20] ^= 0x01
    elif damage == "truncate":
        data = data[:-3]
    else:
        data[:8] = b"NOTADATA"
    path.write_bytes(bytes(data))
    with pytest.raises(FormatError):
        load_dataset(str(path))


def test_incomplete_dataset_rejected(tmp_path):
    params, sols = _toy_dataset()
    w = DatasetWriter(str(tmp_path / "ds.bin"), params, sols.shape[1:])
    w.write(sols[0])
    with pytest.raises(DimensionError):
        w.write(sols[0][:, :2])
    with pytest.raises(DimensionError):
        w.close()


def test_burgers_dataset_header_shape(tmp_path):
    cfg = build_config({})
    problem = make_problem(cfg)
    thetas = problem.sample(100, cfg["seed"])
    ds = runner.stage_solve(problem, thetas, str(tmp_path / "ds.bin"))
    assert ds.shape == (100, 200, 100)


# ---- offline run -----------------------------------------------------------

def test_smoke_offline_run_artifacts_load(smoke_run):
    cfg, res = smoke_run
    ds = load_dataset(res.paths["dataset"])
    assert ds.shape == (2, 40, 40)
    cae = load_checkpoint(res.paths["cae"])
    ffnn = load_checkpoint(res.paths["ffnn"])
    assert cae.kind == "cae" and ffnn.kind == "ffnn"
    assert cae.metadata["dataset"] == ds.checksum
    assert to_bytes(cae.model) == to_bytes(res.cae)
    assert to_bytes(ffnn.model) == to_bytes(res.ffnn)


def test_offline_ledger_is_consistent(smoke_run):
    _, res = smoke_run
    led = res.ledger
    stages = ["setup", "sample", "solve", "train_cae", "train_ffnn"]
    assert all(led[s] >= 0 for s in stages)
    assert led["total"] == pytest.approx(sum(led[s] for s in stages), abs=1e-9)
    assert abs(led["wall"] - led["total"]) < 0.05


def test_offline_rerun_is_bit_identical(smoke_run, tmp_path):
    cfg, res = smoke_run
    again = offline_run(smoke_config(tmp_path))
    for key in ("dataset", "cae", "ffnn"):
        assert file_checksum(again.paths[key]) == file_checksum(res.paths[key])


def test_stage_failure_names_stage_and_keeps_artifacts(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise TrainingError("synthetic failure", {"epoch": 0})

    monkeypatch.setattr(runner, "train_ffnn", boom)
    with pytest.raises(StageError) as info:
        offline_run(smoke_config(tmp_path))
    assert info.value.stage == "train_ffnn"
    assert isinstance(info.value.cause, TrainingError)
    assert os.path.exists(tmp_path / "dataset.bin") and os.path.exists(tmp_path / "cae.ckpt")
    assert not os.path.exists(tmp_path / "ffnn.ckpt")


# ---- online phase ----------------------------------------------------------

def test_identical_thetas_give_zero_variance(smoke_run):
    cfg, res = smoke_run
    rep = online_mc_run(cfg, res.cae, res.ffnn, res.problem, thetas=[[0.4], [0.4]])
    assert rep.n_samples == 2
    assert np.all(rep.variance == 0.0)


@pytest.mark.parametrize("batch", [1, 4, 11])
def test_mc_streaming_matches_two_pass(smoke_run, batch):
    cfg, res = smoke_run
    thetas = np.linspace(0.05, 0.95, 11)[:, None]
    rep = online_mc_run(dict(cfg, mc=dict(cfg["mc"], batch=batch)), res.cae, res.ffnn, res.problem, thetas=thetas)
    preds = np.concatenate([v for _, v in runner.predict_batched(res.ffnn, res.cae, thetas, batch)])
    scale = np.max(np.abs(preds))
    assert np.max(np.abs(rep.mean - preds.mean(0))) <= 1e-12 * scale
    assert np.max(np.abs(rep.variance - preds.var(0, ddof=1))) <= 1e-12 * scale**2
    # the float32 networks round differently per batch size; agreement is at float32 level
    ref = online_mc_run(cfg, res.cae, res.ffnn, res.problem, thetas=thetas)
    assert np.max(np.abs(rep.mean - ref.mean)) <= 1e-5 * scale


def test_mc_exact_comparison_matches_direct_evaluation(smoke_run):
    cfg, res = smoke_run
    thetas = np.linspace(0.1, 0.9, 5)[:, None]
    rep = online_mc_run(cfg, res.cae, res.ffnn, res.problem, thetas=thetas, exact=True)
    exact = np.stack([res.problem.solve(t).values for t in thetas])
    sur = np.stack([res.cae.decode(res.ffnn(t)) for t in thetas])
    assert rep.errors["mean"] == pytest.approx(normalized_error(exact.mean(0), sur.mean(0)), rel=1e-9)
    assert rep.errors["ebar"] == pytest.approx(np.mean([normalized_error(e, s) for e, s in zip(exact, sur)]),
                                               rel=1e-9)
    assert rep.ledger["speedup"] > 0
    assert set(rep.histories) == {"centre"}


def test_mc_pdfs_and_out_of_range_count(smoke_run):
    cfg, res = smoke_run
    thetas = np.linspace(-0.5, 1.0, 150)[:, None]
    rep = online_mc_run(cfg, res.cae, res.ffnn, res.problem, thetas=thetas)
    pdf = rep.pdfs["centre"]["surrogate"]
    assert pdf.grid.shape == (cfg["mc"]["pdf_points"],)
    assert rep.summary["out_of_range"] == int(np.sum(~res.ffnn.in_range(thetas)))


def test_mc_rejects_incompatible_checkpoints(smoke_run, tmp_path):
    cfg, res = smoke_run
    other = offline_run(smoke_config(tmp_path, cae={"latent_dim": 3}))
    with pytest.raises(CompatibilityError):
        online_mc_run(cfg, res.cae, other.ffnn, res.problem)


# ---- validation and convergence ---------------------------------------------

def test_validate_empty_list(smoke_run):
    cfg, res = smoke_run
    rows, profiles = validate_run(cfg, res.cae, res.ffnn, thetas=[], problem=res.problem)
    assert rows == [] and profiles == []


def test_validate_continues_after_solver_failure(smoke_run, monkeypatch):
    cfg, res = smoke_run
    problem = make_problem(cfg)
    original = problem.solve

    def flaky(theta):
        if float(np.ravel(theta)[0]) == 0.3:
            raise SolverError("no convergence", step=1, residual=1.0)
        return original(theta)

    monkeypatch.setattr(problem, "solve", flaky)
    rows, profiles = validate_run(cfg, res.cae, res.ffnn, thetas=[[0.3], [0.6]], problem=problem)
    assert rows[0]["status"].startswith("failed") and np.isnan(rows[0]["error"])
    assert rows[1]["status"] == "ok" and np.isfinite(rows[1]["error"])
    assert len(profiles) == 1 and profiles[0]["exact"].shape == (40, len(profiles[0]["cols"]))


def test_convergence_cells():
    assert convergence_cells([2, 4, 8], [25, 50, 100]) == [(2, 100), (4, 100), (8, 100), (8, 25), (8, 50)]
    assert len(convergence_cells([2, 4], [10, 20], mode="grid")) == 4
    with pytest.raises(ConfigurationError):
        convergence_cells([], [10])


def test_single_cell_study_equals_offline_run(smoke_run, tmp_path):
    cfg, res = smoke_run
    out_csv = str(tmp_path / "conv.csv")
    table = convergence_study(cfg, [2], [2], out_csv=out_csv)
    problem = res.problem
    eval_thetas = problem.sample(cfg["converge"]["n_eval"], cfg["seed"], stream="eval")
    eval_sols = np.stack([problem.solve(t).values for t in eval_thetas])
    direct = evaluate_ebar(res.cae, res.ffnn, eval_thetas, eval_sols)
    assert table[0]["status"] == "ok"
    assert table[0]["ebar"] == direct
    with open(out_csv) as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["ebar"]) == direct


def test_convergence_cell_failure_recorded(smoke_run, monkeypatch):
    cfg, _ = smoke_run

    def boom(*args, **kwargs):
        raise TrainingError("synthetic")

    monkeypatch.setattr(runner, "train_cae", boom)
    table = convergence_study(cfg, [1, 2], [2])
    assert len(table) == 2 and all(r["status"].startswith("failed") for r in table)


# ---- reports ---------------------------------------------------------------

def _report(shape=(3, 4), var=None):
    rng = np.random.default_rng(1)
    mean = rng.normal(size=shape)
    rep = McReport(mean, np.zeros(shape) if var is None else var, 10, {"mean": 0.1 / 3})
    rep.ledger = {"online_total": 1.0 / 7, "n_mc": 10}
    rep.histories = {"h": {"t": np.arange(shape[1], dtype=float), "mean": mean[0], "variance": rep.variance[0]}}
    return rep


def test_zero_variance_csv_and_shapes(tmp_path):
    rep = _report()
    files = report_emit(rep, str(tmp_path / "r"))
    var = read_matrix_csv(files["variance"])
    assert var.shape == (3, 4) and np.all(var == 0.0)
    assert np.array_equal(read_matrix_csv(files["mean"]), rep.mean)


def test_summary_json_round_trips_bit_exactly(tmp_path):
    rep = _report()
    files = report_emit(rep, str(tmp_path / "r"))
    summary = load_summary(files["summary"])
    assert summary["errors"]["mean"] == rep.errors["mean"]
    assert summary["ledger"]["online_total"] == rep.ledger["online_total"]
    assert summary["mean_norm"] == float(np.linalg.norm(rep.mean))
    raw = json.load(open(files["summary"]))
    assert raw["errors"]["mean"] == (0.1 / 3).hex()


def test_saved_report_round_trip(smoke_run, tmp_path):
    cfg, res = smoke_run
    rep = online_mc_run(cfg, res.cae, res.ffnn, res.problem, thetas=np.linspace(0, 1, 120)[:, None],
                        exact=True)
    path = save_report(rep, str(tmp_path / "rep.npz"))
    back = load_report(path)
    assert np.array_equal(back.mean, rep.mean) and np.array_equal(back.variance, rep.variance)
    assert back.errors == rep.errors and back.ledger == rep.ledger
    assert np.array_equal(back.pdfs["centre"]["exact"].density, rep.pdfs["centre"]["exact"].density)
    assert np.array_equal(back.histories["centre"]["mean"], rep.histories["centre"]["mean"])
    a = report_emit(rep, str(tmp_path / "a"))
    b = report_emit(back, str(tmp_path / "b"))
    assert sorted(os.path.basename(p) for p in a.values()) == sorted(os.path.basename(p) for p in b.values())
    for key in a:
        assert file_checksum(a[key]) == file_checksum(b[key])


def test_report_io_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        report_emit(_report(), str(blocker / "sub"))


# ---- command line ----------------------------------------------------------

def _smoke_toml(tmp_path):
    path = tmp_path / "smoke.toml"
    path.write_text(
        'problem = "burgers"\n[sampling]\nn = 2\n[solver.burgers]\nn_x = 40\nn_t = 40\n'
        '[cae]\nlatent_dim = 2\nfilters = [8, 4]\ntrain = { epochs = 2, lr = 1e-3, batch_size = 2 }\n'
        '[ffnn]\nhidden = [8]\ntrain = { epochs = 2, lr = 1e-3, batch_size = 2 }\n'
        '[mc]\nn = 4\nbatch = 2\nprobes = [{ x = 0.0, t = 1.0 }]\n'
        '[validate]\nthetas = [[0.5]]\n'
        '[converge]\nlatent_dims = [2]\ndataset_sizes = [2]\nn_eval = 2\nreference_latent = 2\n'
        'reference_size = 2\n'
    )
    return str(path)


def test_cli_full_chain(tmp_path, capsys):
    config = _smoke_toml(tmp_path)
    out = str(tmp_path / "out")
    base = ["--config", config, "--out", out, "--seed", "5"]
    for cmd in (["sample"], ["solve"], ["train-cae"], ["train-ffnn"], ["predict", "--theta", "0.3"],
                ["mc", "--exact"], ["validate"], ["converge"], ["report", "--dest", str(tmp_path / "re")]):
        assert main(cmd[:1] + base + cmd[1:]) == 0, cmd
    assert os.path.exists(os.path.join(out, "report", "summary.json"))
    assert file_checksum(os.path.join(out, "report", "mean.csv")) == \
        file_checksum(str(tmp_path / "re" / "mean.csv"))
    ledger = json.load(open(os.path.join(out, "ledger.json")))
    assert {"solve", "train_cae", "train_ffnn", "mc_online_total"} <= set(ledger)
    assert load_checkpoint(os.path.join(out, "cae.ckpt")).metadata["seed"] == 5


def test_cli_global_flags_before_subcommand(tmp_path):
    config = _smoke_toml(tmp_path)
    assert main(["--config", config, "--out", str(tmp_path / "o"), "sample", "--n", "2"]) == 0


def test_cli_exit_codes(tmp_path, monkeypatch):
    config = _smoke_toml(tmp_path)
    out = str(tmp_path / "out")
    bad = tmp_path / "bad.toml"
    bad.write_text('problem = "heat"\n')
    assert main(["sample", "--config", str(bad), "--out", out]) == 2
    assert main(["mc", "--config", config, "--out", out]) == 4
    assert main(["solve", "--config", config, "--out", out]) == 0

    def diverge(*args, **kwargs):
        raise TrainingError("non-finite loss")

    monkeypatch.setattr(runner, "train_cae", diverge)
    assert main(["train-cae", "--config", config, "--out", out]) == 3
