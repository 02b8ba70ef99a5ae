"""Command-line entry point: ``caerom <command> [options]``.

Every offline and online step runs on its own and reads or writes its
artifacts in the output directory, so a pipeline can be resumed at any
stage. Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from caerom.errors import (
    AssemblyError,
    CaeRomError,
    CompatibilityError,
    ConfigurationError,
    DimensionError,
    FormatError,
    GeometryError,
    MetricError,
    SolverError,
    StageError,
    TrainingError,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("caerom")


def exit_code(exc):
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, (ConfigurationError, CompatibilityError, DimensionError, GeometryError)):
        return EXIT_CONFIG
    if isinstance(exc, (OSError, FormatError)):
        return EXIT_IO
    if isinstance(exc, (SolverError, TrainingError, AssemblyError, MetricError, ArithmeticError)):
        return EXIT_NUMERIC
    return EXIT_NUMERIC if isinstance(exc, CaeRomError) else EXIT_IO


def _common():
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--problem", choices=["burgers", "elasticity"], help="defaults to use without --config")
    p.add_argument("--seed", type=int, help="master seed (non-negative 64-bit integer)")
    p.add_argument("--threads", type=int, help="worker threads for solver fan-out")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="caerom", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], help="draw the training design")
    s.add_argument("--n", type=int, help="override sampling.n")

    s = sub.add_parser("solve", parents=[common], help="solve the design and write the dataset")
    s.add_argument("--design", help="design CSV (default: <out>/design.csv, sampled if missing)")

    s = sub.add_parser("train-cae", parents=[common], help="train the autoencoder")
    s.add_argument("--dataset")

    s = sub.add_parser("train-ffnn", parents=[common], help="train the parameter-to-latent network")
    s.add_argument("--dataset")
    s.add_argument("--cae")

    for name, helptext in (("predict", "surrogate prediction for given parameters"),
                           ("mc", "Monte-Carlo statistics through the surrogate"),
                           ("validate", "compare surrogate and exact solutions")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--cae")
        s.add_argument("--ffnn")
        if name in ("predict", "validate"):
            s.add_argument("--theta", action="append", help="comma-separated parameter vector; repeatable")
        if name == "mc":
            s.add_argument("--n", type=int, help="override mc.n")
            s.add_argument("--exact", action="store_true", help="also solve every sample exactly")

    s = sub.add_parser("converge", parents=[common], help="error vs latent size and dataset size")
    s.add_argument("--latent-dims", help="comma-separated list")
    s.add_argument("--sizes", help="comma-separated dataset sizes")
    s.add_argument("--mode", choices=["cross", "grid"])

    s = sub.add_parser("report", parents=[common], help="re-emit CSV/JSON from a saved MC report")
    s.add_argument("--report", help="saved report (default: <out>/mc_report.npz)")
    s.add_argument("--dest", help="destination directory (default: <out>/report)")
    return parser


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _thetas(values):
    return [[float(v) for v in t.split(",")] for t in values]


def _config(args):
    from caerom.pipeline.config import load_config

    overrides = {k: getattr(args, k) for k in ("problem", "seed", "threads", "out") if hasattr(args, k)}
    cfg = load_config(getattr(args, "config", None), **overrides)
    if getattr(args, "n", None) is not None:
        section = "mc" if args.command == "mc" else "sampling"
        cfg[section]["n"] = args.n
        from caerom.pipeline.config import validate_config

        validate_config(cfg)
    return cfg


def _path(args, cfg, attr, default):
    return getattr(args, attr, None) or os.path.join(cfg["out"], default)


def _update_ledger(cfg, entries):
    path = os.path.join(cfg["out"], "ledger.json")
    ledger = {}
    if os.path.exists(path):
        with open(path) as fh:
            ledger = json.load(fh)
    ledger.update(entries)
    with open(path, "w") as fh:
        json.dump(ledger, fh, indent=2, sort_keys=True)


def _write_design(path, names, thetas):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in thetas:
            w.writerow([repr(float(v)) for v in row])


def _read_design(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)


def _load_models(args, cfg):
    from caerom.surrogate import check_compatible, load_checkpoint

    cae = load_checkpoint(_path(args, cfg, "cae", "cae.ckpt")).model
    ffnn = load_checkpoint(_path(args, cfg, "ffnn", "ffnn.ckpt")).model
    check_compatible(ffnn, cae)
    return cae, ffnn


def cmd_sample(args, cfg, problem):
    thetas = problem.sample(cfg["sampling"]["n"], cfg["seed"])
    path = os.path.join(cfg["out"], "design.csv")
    _write_design(path, problem.param_names, thetas)
    print(f"wrote {len(thetas)} samples to {path}")


def cmd_solve(args, cfg, problem):
    from caerom.pipeline.runner import stage_solve

    design = _path(args, cfg, "design", "design.csv")
    if os.path.exists(design):
        thetas = _read_design(design).astype(np.float32).astype(float)
    elif getattr(args, "design", None):
        raise FileNotFoundError(f"design file {design} not found")
    else:
        thetas = problem.sample(cfg["sampling"]["n"], cfg["seed"])
    path = os.path.join(cfg["out"], "dataset.bin")
    t0 = time.perf_counter()
    ds = stage_solve(problem, thetas, path, cfg["threads"])
    _update_ledger(cfg, {"solve": time.perf_counter() - t0})
    print(f"wrote dataset {ds.shape} checksum {ds.checksum} to {path}")


def cmd_train_cae(args, cfg, problem):
    from caerom.pipeline.dataset import load_dataset
    from caerom.pipeline.runner import stage_train_cae

    ds = load_dataset(_path(args, cfg, "dataset", "dataset.bin"))
    path = os.path.join(cfg["out"], "cae.ckpt")
    res = stage_train_cae(problem, ds, cfg, path)
    _update_ledger(cfg, {"train_cae": res.wall_time})
    print(f"autoencoder trained: final loss {res.final_loss:.6g}, saved to {path}")


def cmd_train_ffnn(args, cfg, problem):
    from caerom.pipeline.dataset import load_dataset
    from caerom.pipeline.runner import stage_train_ffnn
    from caerom.surrogate import load_checkpoint

    ds = load_dataset(_path(args, cfg, "dataset", "dataset.bin"))
    cae = load_checkpoint(_path(args, cfg, "cae", "cae.ckpt")).model
    path = os.path.join(cfg["out"], "ffnn.ckpt")
    res = stage_train_ffnn(problem, ds, cae, cfg, path)
    _update_ledger(cfg, {"train_ffnn": res.wall_time})
    print(f"regression network trained: final loss {res.final_loss:.6g}, saved to {path}")


def cmd_predict(args, cfg, problem):
    from caerom.pipeline.report import write_matrix_csv
    from caerom.surrogate import predict

    if not getattr(args, "theta", None):
        raise ConfigurationError("predict needs at least one --theta")
    cae, ffnn = _load_models(args, cfg)
    for i, theta in enumerate(_thetas(args.theta)):
        res = predict(theta, ffnn, cae)
        path = os.path.join(cfg["out"], f"prediction_{i}.csv")
        write_matrix_csv(path, res.values)
        flag = " (outside training range)" if res.any_out_of_range else ""
        print(f"theta={theta}: wrote {path}{flag}")


def cmd_mc(args, cfg, problem):
    from caerom.pipeline.report import report_emit, save_report
    from caerom.pipeline.runner import online_mc_run

    cae, ffnn = _load_models(args, cfg)
    exact = True if getattr(args, "exact", False) else None
    report = online_mc_run(cfg, cae, ffnn, problem, exact=exact)
    save_report(report, os.path.join(cfg["out"], "mc_report.npz"))
    report_emit(report, os.path.join(cfg["out"], "report"))
    _update_ledger(cfg, {f"mc_{k}": v for k, v in report.ledger.items()})
    print(f"MC over {report.n_samples} samples done; errors: {report.errors}")


def cmd_validate(args, cfg, problem):
    from caerom.pipeline.report import write_matrix_csv
    from caerom.pipeline.runner import validate_run, write_table

    cae, ffnn = _load_models(args, cfg)
    thetas = _thetas(args.theta) if getattr(args, "theta", None) else None
    rows, profiles = validate_run(cfg, cae, ffnn, thetas, problem)
    table = [dict(r, theta=" ".join(repr(v) for v in r["theta"])) for r in rows]
    write_table(os.path.join(cfg["out"], "validate.csv"), table, ["theta", "error", "in_range", "status"])
    for i, prof in enumerate(profiles):
        for key in ("exact", "surrogate"):
            write_matrix_csv(os.path.join(cfg["out"], f"validate_profile_{i}_{key}.csv"), prof[key])
    for r in rows:
        print(f"theta={r['theta']}: error {r['error']:.4%} [{r['status']}]")


def cmd_converge(args, cfg, problem):
    from caerom.pipeline.runner import convergence_study

    dims = _ints(args.latent_dims) if getattr(args, "latent_dims", None) else None
    sizes = _ints(args.sizes) if getattr(args, "sizes", None) else None
    path = os.path.join(cfg["out"], "converge.csv")
    table = convergence_study(cfg, dims, sizes, getattr(args, "mode", None), out_csv=path, problem=problem)
    for r in table:
        print(f"l={r['latent_dim']:>3} N={r['n']:>4}: ebar {r['ebar']:.4%} [{r['status']}]")


def cmd_report(args, cfg, problem):
    from caerom.pipeline.report import load_report, report_emit

    rep = load_report(_path(args, cfg, "report", "mc_report.npz"))
    files = report_emit(rep, _path(args, cfg, "dest", "report"))
    print(f"wrote {len(files)} report files")


COMMANDS = {
    "sample": cmd_sample, "solve": cmd_solve, "train-cae": cmd_train_cae, "train-ffnn": cmd_train_ffnn,
    "predict": cmd_predict, "mc": cmd_mc, "validate": cmd_validate, "converge": cmd_converge,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        os.makedirs(cfg["out"], exist_ok=True)
        from caerom.pipeline.problems import make_problem

        problem = None if args.command == "report" else make_problem(cfg)
        COMMANDS[args.command](args, cfg, problem)
    except (CaeRomError, OSError, ArithmeticError) as exc:
        code = exit_code(exc)
        print(f"caerom {args.command}: error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
