"""Offline phase (sample, solve, train), online Monte-Carlo phase, validation and convergence studies."""

import csv
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from caerom.errors import CaeRomError, ConfigurationError, StageError
from caerom.pipeline.dataset import DatasetWriter, SnapshotDataset, load_dataset
from caerom.pipeline.problems import _stream_seed, make_problem
from caerom.stats import McReport, RunningMoments, normalized_error, pdf_estimate
from caerom.surrogate import TrainConfig, check_compatible, save_checkpoint, train_cae, train_ffnn

log = logging.getLogger(__name__)

DATASET_FILE = "dataset.bin"
CAE_FILE = "cae.ckpt"
FFNN_FILE = "ffnn.ckpt"
ENCODE_BATCH = 32


@dataclass
class OfflineResult:
    dataset: object
    cae: object
    ffnn: object
    ledger: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    problem: object = None


class StageTimer:
    """Per-stage wall-clock ledger; a failing stage is re-raised as :class:`StageError`."""

    def __init__(self):
        self.stages = {}

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except (CaeRomError, OSError, ValueError, ArithmeticError) as exc:
            raise StageError(name, exc) from exc
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0

    @property
    def total(self):
        return sum(self.stages.values())


def train_config(section, seed, stream):
    t = section["train"]
    return TrainConfig(epochs=t["epochs"], lr=t["lr"], batch_size=t["batch_size"],
                       seed=_stream_seed(seed, stream), shuffle=t.get("shuffle", True))


def _map(fn, items, threads):
    """Ordered map, fanned out over a bounded thread pool when ``threads > 1``."""
    if threads <= 1:
        for item in items:
            yield fn(item)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, items)


def solve_many(problem, thetas, threads=1):
    return _map(lambda th: problem.solve(th).values, list(thetas), threads)


def encode_batched(cae, solutions, batch=ENCODE_BATCH):
    """Latent vectors of a solution stack, encoded in fixed-size chunks."""
    out = [cae.encode(np.asarray(solutions[i:i + batch], dtype=float)) for i in range(0, len(solutions), batch)]
    return np.concatenate(out, axis=0).astype(float)


def predict_batched(ffnn, cae, thetas, batch):
    """Yield ``(thetas_chunk, values_chunk)`` for surrogate predictions."""
    thetas = np.asarray(thetas, dtype=float)
    for i in range(0, len(thetas), batch):
        th = thetas[i:i + batch]
        yield th, cae.decode(ffnn(th)).astype(float)


# -- offline stages ---------------------------------------------------------

def stage_solve(problem, thetas, path, threads=1):
    """Solve every design point and stream the results into a dataset file."""
    with DatasetWriter(path, thetas, problem.shape, problem.param_names, problem.fingerprint()) as w:
        for values in solve_many(problem, thetas, threads):
            w.write(values)
    return load_dataset(path)


def stage_train_cae(problem, dataset, cfg, path=None, latent_dim=None):
    arch = problem.cae_architecture(latent_dim)
    tc = train_config(cfg["cae"], cfg["seed"], "cae")
    res = train_cae(dataset.solutions, arch, tc)
    meta = {"seed": cfg["seed"], "threads": cfg["threads"], "train": tc.to_dict(), "dataset": dataset.checksum,
            "fingerprint": problem.fingerprint(), "final_loss": res.final_loss, "n_train": len(dataset.params)}
    if path is not None:
        save_checkpoint(res.model, path, meta)
    return res


def stage_train_ffnn(problem, dataset, cae, cfg, path=None, latent_dim=None):
    arch = problem.ffnn_architecture(latent_dim or cae.latent_dim)
    tc = train_config(cfg["ffnn"], cfg["seed"], "ffnn")
    latents = encode_batched(cae, dataset.solutions)
    res = train_ffnn(dataset.params, latents, arch, tc)
    meta = {"seed": cfg["seed"], "threads": cfg["threads"], "train": tc.to_dict(), "dataset": dataset.checksum,
            "param_names": problem.param_names, "final_loss": res.final_loss, "n_train": len(dataset.params)}
    if path is not None:
        save_checkpoint(res.model, path, meta)
    return res


def check_setup(cfg, problem):
    """Cross-checks that need the solver's output shape, run before any compute."""
    problem.cae_architecture()
    problem.ffnn_architecture()
    problem.resolve_probes()


def offline_run(cfg, out_dir=None, problem=None):
    """Sample, solve, train the autoencoder, train the regression network.

    Artifacts land in ``out_dir`` (default ``cfg['out']``) as they are
    produced, so a failing stage leaves the earlier ones in place.
    """
    out_dir = out_dir or cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    timer = StageTimer()
    problem = problem or timer.run("setup", make_problem, cfg)
    timer.run("setup", check_setup, cfg, problem)
    paths = {k: os.path.join(out_dir, f) for k, f in
             (("dataset", DATASET_FILE), ("cae", CAE_FILE), ("ffnn", FFNN_FILE))}
    t0 = time.perf_counter()
    thetas = timer.run("sample", problem.sample, cfg["sampling"]["n"], cfg["seed"])
    dataset = timer.run("solve", stage_solve, problem, thetas, paths["dataset"], cfg["threads"])
    cae = timer.run("train_cae", stage_train_cae, problem, dataset, cfg, paths["cae"])
    ffnn = timer.run("train_ffnn", stage_train_ffnn, problem, dataset, cae.model, cfg, paths["ffnn"])
    ledger = dict(timer.stages)
    ledger["total"] = timer.total
    ledger["wall"] = time.perf_counter() - t0 + timer.stages.get("setup", 0.0)
    ledger["cae_epochs"] = cae.config.epochs
    ledger["ffnn_epochs"] = ffnn.config.epochs
    return OfflineResult(dataset, cae.model, ffnn.model, ledger, paths, problem)


# -- online phase -----------------------------------------------------------

def online_mc_run(cfg, cae, ffnn, problem=None, thetas=None, exact=None):
    """Monte-Carlo statistics of the surrogate response, streamed in batches.

    Only the running moments, the probe values and (optionally) the exact
    moments are kept, so memory does not grow with the number of samples.
    With ``exact`` (default ``cfg['mc']['exact']``) every sample is also
    solved with the high-fidelity solver and the report gains mean, variance
    and average normalized errors.
    """
    check_compatible(ffnn, cae)
    problem = problem or make_problem(cfg)
    mc = cfg["mc"]
    exact = mc.get("exact", False) if exact is None else exact
    if thetas is None:
        thetas = problem.sample(mc["n"], cfg["seed"], method=mc["method"], stream="mc")
    thetas = np.asarray(thetas, dtype=float).reshape(len(thetas), -1)
    if thetas.shape[1] != problem.n_params:
        raise ConfigurationError(f"MC parameters have {thetas.shape[1]} columns, expected {problem.n_params}")
    probes = problem.resolve_probes()
    rows = np.array([r for _, r, _ in probes], dtype=int)
    cols = np.array([c for _, _, c in probes], dtype=int)

    sur = RunningMoments(problem.shape)
    sur_probe = []
    t0 = time.perf_counter()
    for _, values in predict_batched(ffnn, cae, thetas, mc["batch"]):
        sur.push_batch(values)
        sur_probe.append(values[:, rows, cols])
    t_sur = time.perf_counter() - t0
    sur_probe = np.concatenate(sur_probe, axis=0) if sur_probe else np.zeros((0, len(probes)))

    report = McReport(sur.mean, sur.variance if sur.count > 1 else np.zeros(problem.shape), sur.count)
    n = len(thetas)
    report.ledger = {"online_total": t_sur, "online_per_sim": t_sur / n, "n_mc": n, "threads": cfg["threads"]}

    ex_probe = None
    if exact:
        ex = RunningMoments(problem.shape)
        ex_probe, errs = [], []
        t_solve = 0.0
        for th, values in predict_batched(ffnn, cae, thetas, mc["batch"]):
            t1 = time.perf_counter()
            U = np.stack(list(solve_many(problem, th, cfg["threads"])))
            t_solve += time.perf_counter() - t1
            ex.push_batch(U)
            ex_probe.append(U[:, rows, cols])
            errs.extend(normalized_error(u, v) for u, v in zip(U, values))
        ex_probe = np.concatenate(ex_probe, axis=0)
        report.ledger.update(exact_total=t_solve, exact_per_sim=t_solve / n,
                             speedup=(t_solve / n) / max(t_sur / n, 1e-300))
        report.errors["mean"] = normalized_error(ex.mean, report.mean)
        if n > 1:
            report.errors["variance"] = normalized_error(ex.variance, report.variance)
        report.errors["ebar"] = float(np.mean(errs))
        report.errors["max_sample"] = float(np.max(errs))
        report.summary["exact_mean"] = ex.mean
        report.summary["exact_variance"] = ex.variance if n > 1 else np.zeros(problem.shape)

    for k, (label, _, _) in enumerate(probes):
        entry = {"row": int(rows[k]), "col": int(cols[k])}
        if n >= 100:
            entry["surrogate"] = pdf_estimate(sur_probe[:, k], n_grid=mc["pdf_points"])
            if ex_probe is not None:
                grid = entry["surrogate"].grid
                entry["exact"] = pdf_estimate(ex_probe[:, k], grid=grid, n_grid=mc["pdf_points"])
        report.pdfs[label] = entry

    t_axis = problem.time_axis
    for label, row in problem.history_rows():
        h = {"t": t_axis, "mean": report.mean[row], "variance": report.variance[row]}
        if exact:
            h["exact_mean"] = report.summary["exact_mean"][row]
            h["exact_variance"] = report.summary["exact_variance"][row]
        report.histories[label] = h
    report.summary["n_params"] = problem.n_params
    report.summary["out_of_range"] = int(np.sum(~np.asarray(ffnn.in_range(thetas), dtype=bool)))
    return report


# -- validation and convergence ---------------------------------------------

def validate_run(cfg, cae, ffnn, thetas=None, problem=None, n_profiles=4):
    """Exact-vs-surrogate normalized error for each probe parameter vector.

    Returns ``(rows, profiles)``. A solver failure is recorded in the row's
    ``status`` and the remaining parameters are still evaluated.
    """
    check_compatible(ffnn, cae)
    problem = problem or make_problem(cfg)
    thetas = cfg["validate"]["thetas"] if thetas is None else thetas
    cols = np.unique(np.linspace(0, problem.shape[1] - 1, n_profiles).round().astype(int)) if n_profiles else []
    rows, profiles = [], []
    for theta in thetas:
        theta = np.asarray(theta, dtype=float).ravel()
        pred = cae.decode(ffnn(theta)).astype(float)
        row = {"theta": theta.tolist(), "error": float("nan"), "in_range": bool(ffnn.in_range(theta)),
               "status": "ok"}
        try:
            U = problem.solve(theta).values
            row["error"] = normalized_error(U, pred)
            profiles.append({"theta": theta.tolist(), "cols": list(map(int, cols)), "t": problem.time_axis[cols],
                             "exact": U[:, cols], "surrogate": pred[:, cols]})
        except CaeRomError as exc:
            row["status"] = f"failed: {exc}"
        rows.append(row)
    return rows, profiles


def evaluate_ebar(cae, ffnn, thetas, exact_solutions, batch=64):
    """Average normalized error over a fixed evaluation set."""
    errs = []
    for i, (_, pred) in enumerate(predict_batched(ffnn, cae, thetas, batch)):
        ref = exact_solutions[i * batch:i * batch + len(pred)]
        errs.extend(normalized_error(u, v) for u, v in zip(ref, pred))
    return float(np.mean(errs))


def convergence_cells(latent_dims, dataset_sizes, mode="cross", reference_latent=None, reference_size=None):
    """``(latent_dim, n)`` cells: the full grid, or one sweep per axis through the reference cell."""
    if not latent_dims or not dataset_sizes:
        raise ConfigurationError("convergence study needs non-empty latent_dims and dataset_sizes")
    if mode == "grid":
        return [(l, n) for l in latent_dims for n in dataset_sizes]
    ref_l = reference_latent or max(latent_dims)
    ref_n = reference_size or max(dataset_sizes)
    cells = [(l, ref_n) for l in latent_dims] + [(ref_l, n) for n in dataset_sizes]
    return list(dict.fromkeys(cells))


def convergence_study(cfg, latent_dims=None, dataset_sizes=None, mode=None, out_csv=None, problem=None):
    """Train one surrogate per cell and tabulate the average error on a fixed evaluation set.

    Training sets are nested prefixes of one design of ``max(dataset_sizes)``
    samples. Each cell uses the same training seeds as :func:`offline_run`,
    so a cell with ``n == sampling.n`` and the configured latent size
    reproduces the offline surrogate exactly.
    """
    conv = cfg["converge"]
    latent_dims = latent_dims or conv["latent_dims"]
    dataset_sizes = dataset_sizes or conv["dataset_sizes"]
    mode = mode or conv.get("mode", "cross")
    cells = convergence_cells(latent_dims, dataset_sizes, mode, conv.get("reference_latent"),
                              conv.get("reference_size"))
    problem = problem or make_problem(cfg)
    n_max = max(n for _, n in cells)
    thetas = problem.sample(max(n_max, cfg["sampling"]["n"]), cfg["seed"])[:n_max]
    train = np.stack(list(solve_many(problem, thetas, cfg["threads"])))
    # round-trip through float32 exactly as the dataset file does
    train = train.astype(np.float32).astype(float)
    eval_thetas = problem.sample(conv["n_eval"], cfg["seed"], stream="eval")
    eval_sols = np.stack(list(solve_many(problem, eval_thetas, cfg["threads"])))

    table = []
    for latent, n in cells:
        row = {"latent_dim": latent, "n": n, "ebar": float("nan"), "status": "ok", "cae_seconds": 0.0,
               "ffnn_seconds": 0.0}
        try:
            ds = SnapshotDataset(thetas[:n], train[:n], problem.param_names, problem.fingerprint())
            cell_cfg = _with_batch_limits(cfg, n)
            cae = stage_train_cae(problem, ds, cell_cfg, latent_dim=latent)
            ffnn = stage_train_ffnn(problem, ds, cae.model, cell_cfg, latent_dim=latent)
            row["cae_seconds"], row["ffnn_seconds"] = cae.wall_time, ffnn.wall_time
            row["ebar"] = evaluate_ebar(cae.model, ffnn.model, eval_thetas, eval_sols)
        except CaeRomError as exc:
            row["status"] = f"failed: {exc}"
            log.warning("convergence cell l=%d n=%d failed: %s", latent, n, exc)
        log.info("cell l=%d n=%d ebar=%s", latent, n, row["ebar"])
        table.append(row)
    if out_csv:
        write_table(out_csv, table, ["latent_dim", "n", "ebar", "status", "cae_seconds", "ffnn_seconds"])
    return table


def _with_batch_limits(cfg, n):
    """Copy of ``cfg`` with training batch sizes capped at the cell's dataset size."""
    out = dict(cfg)
    for section in ("cae", "ffnn"):
        out[section] = dict(cfg[section])
        out[section]["train"] = dict(cfg[section]["train"], batch_size=min(cfg[section]["train"]["batch_size"], n))
    return out


def write_table(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path
