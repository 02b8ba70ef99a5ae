"""Write Monte-Carlo reports as CSV tables plus a JSON summary.

Floats in ``summary.json`` are stored as ``float.hex`` strings so they
re-parse to exactly the in-memory values; CSV files use 17 significant
digits, which also round-trips float64.
"""

import csv
import json
import os
import re

import numpy as np

from caerom.stats import McReport, PdfEstimate

_HEX_FLOAT = re.compile(r"^-?(0x[0-9a-f]\.?[0-9a-f]*p[+-]\d+|inf|nan)$")


def _fmt(x):
    return format(float(x), ".17g")


def _hexify(obj):
    if isinstance(obj, (float, np.floating)):
        return float(obj).hex()
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _hexify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_hexify(v) for v in obj]
    return obj


def unhex(obj):
    """Inverse of the hex encoding used in ``summary.json``."""
    if isinstance(obj, str):
        return float.fromhex(obj) if _HEX_FLOAT.match(obj) else obj
    if isinstance(obj, dict):
        return {k: unhex(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [unhex(v) for v in obj]
    return obj


def write_matrix_csv(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in M:
            w.writerow([_fmt(v) for v in row])
    return path


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    return path


def report_emit(report, out_dir):
    """Write ``report`` into ``out_dir``; returns a dict of the files written.

    I/O failures are raised as ``OSError`` naming the offending path.
    """
    files = {}
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out_dir}: {exc}") from exc

    def target(name):
        return os.path.join(out_dir, name)

    try:
        files["mean"] = write_matrix_csv(target("mean.csv"), report.mean)
        files["variance"] = write_matrix_csv(target("variance.csv"), report.variance)
        for key in ("exact_mean", "exact_variance"):
            if key in report.summary:
                files[key] = write_matrix_csv(target(f"{key}.csv"), report.summary[key])
        files["errors"] = _write_rows(target("errors.csv"), ["metric", "value"], sorted(report.errors.items()))
        files["ledger"] = _write_rows(target("ledger.csv"), ["item", "value"],
                                      [(k, v) for k, v in sorted(report.ledger.items())])
        for label, entry in sorted(report.pdfs.items()):
            est = entry.get("surrogate")
            if est is None:
                continue
            name = "pdf_" + re.sub(r"[^A-Za-z0-9.=+-]+", "_", label) + ".csv"
            rows = _pdf_rows(est, entry.get("exact"))
            files[f"pdf:{label}"] = _write_rows(target(name), ["value", "surrogate", "exact"], rows)
        if report.histories:
            labels = sorted(report.histories)
            first = report.histories[labels[0]]
            header, columns = ["t"], [first["t"]]
            for label in labels:
                for key in ("mean", "variance", "exact_mean", "exact_variance"):
                    if key in report.histories[label]:
                        header.append(f"{label}:{key}")
                        columns.append(report.histories[label][key])
            files["histories"] = _write_rows(target("histories.csv"), header, zip(*columns))
        with open(target("summary.json"), "w") as fh:
            json.dump(summary_dict(report), fh, indent=2, sort_keys=True)
        files["summary"] = target("summary.json")
    except OSError as exc:
        raise OSError(f"writing report to {out_dir} failed: {exc}") from exc
    return files


def _pdf_rows(sur, exact):
    if sur.point_mass:
        return [(sur.location, "inf", "")]
    ex = exact.density if exact is not None and not exact.point_mass else [""] * len(sur.grid)
    return [(x, y, e if isinstance(e, str) else _fmt(e)) for x, y, e in zip(sur.grid, sur.density, ex)]


def summary_dict(report):
    pdfs = {}
    for label, entry in report.pdfs.items():
        info = {"row": entry["row"], "col": entry["col"]}
        for key in ("surrogate", "exact"):
            est = entry.get(key)
            if est is not None:
                info[key] = {"bandwidth": est.bandwidth, "point_mass": est.point_mass,
                             "location": est.location}
        pdfs[label] = info
    extra = {k: v for k, v in report.summary.items() if not isinstance(v, np.ndarray)}
    return _hexify({
        "n_samples": report.n_samples,
        "shape": list(np.shape(report.mean)),
        "errors": dict(report.errors),
        "ledger": dict(report.ledger),
        "pdfs": pdfs,
        "summary": extra,
        "mean_norm": float(np.linalg.norm(report.mean)),
        "variance_norm": float(np.linalg.norm(report.variance)),
    })


def load_summary(path):
    with open(path) as fh:
        return unhex(json.load(fh))


def save_report(report, path):
    """Binary snapshot of a report so ``report_emit`` can be rerun later."""
    arrays = {"mean": report.mean, "variance": report.variance}
    for k, v in report.summary.items():
        if isinstance(v, np.ndarray):
            arrays[f"summary:{k}"] = v
    meta = {
        "n_samples": report.n_samples, "errors": report.errors, "ledger": report.ledger,
        "summary": {k: v for k, v in report.summary.items() if not isinstance(v, np.ndarray)},
        "pdfs": {}, "histories": {},
    }
    for i, (label, entry) in enumerate(report.pdfs.items()):
        meta["pdfs"][label] = {"index": i, "row": entry["row"], "col": entry["col"], "estimates": {}}
        for key in ("surrogate", "exact"):
            est = entry.get(key)
            if est is None:
                continue
            meta["pdfs"][label]["estimates"][key] = {"bandwidth": est.bandwidth, "point_mass": est.point_mass,
                                                     "location": est.location}
            if not est.point_mass:
                arrays[f"pdf:{i}:{key}:grid"] = est.grid
                arrays[f"pdf:{i}:{key}:density"] = est.density
    for i, (label, h) in enumerate(report.histories.items()):
        meta["histories"][label] = {"index": i, "keys": sorted(h)}
        for key, v in h.items():
            arrays[f"hist:{i}:{key}"] = v
    arrays["meta"] = np.frombuffer(json.dumps(_hexify(meta), sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_report(path):
    with np.load(path) as z:
        arrays = {k: z[k] for k in z.files}
    meta = unhex(json.loads(arrays.pop("meta").tobytes().decode()))
    rep = McReport(arrays["mean"], arrays["variance"], int(meta["n_samples"]), meta["errors"], {}, meta["ledger"],
                   {}, meta["summary"])
    for k, v in arrays.items():
        if k.startswith("summary:"):
            rep.summary[k.split(":", 1)[1]] = v
    for label, info in meta["pdfs"].items():
        i = info["index"]
        entry = {"row": int(info["row"]), "col": int(info["col"])}
        for key, e in info["estimates"].items():
            est = PdfEstimate(bandwidth=e["bandwidth"], point_mass=e["point_mass"], location=e["location"])
            if not est.point_mass:
                est.grid = arrays[f"pdf:{i}:{key}:grid"]
                est.density = arrays[f"pdf:{i}:{key}:density"]
            entry[key] = est
        rep.pdfs[label] = entry
    for label, info in meta["histories"].items():
        rep.histories[label] = {key: arrays[f"hist:{info['index']}:{key}"] for key in info["keys"]}
    return rep
