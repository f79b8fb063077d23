"""On-disk formats: Cauchy data tables, truth sidecars, trajectories, checkpoints, manifests."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .mlp import MlpArch, MlpParams
from .sources import CauchyData, SourceSet

FLOAT_FMT = "%.17g"
THETA_DTYPE = "<f8"


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def truth_path(data_path) -> Path:
    p = Path(data_path)
    return p.with_name(p.stem + ".truth.json")


def write_cauchy(path, data: CauchyData, truth: dict | None = None) -> Path:
    """Write a data table; ``truth`` (a ground-truth record) goes to a sidecar JSON.

    Layout: one header line ``# d= n= delta= seed= operator= k=``, one
    column line, then one row per node with coordinates, normal, weight and
    the real and imaginary parts of both traces. ``nan`` marks a trace not
    observed at that node.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d, n = data.d, len(data)
    op = data.meta.get("operator", "laplace")
    k = float(data.meta.get("k", 0.0))
    seed = "none" if data.seed is None else int(data.seed)
    cols = [f"x{i + 1}" for i in range(d)] + [f"nu{i + 1}" for i in range(d)] + \
        ["weight", "f_re", "f_im", "g_re", "g_im"]
    f = data.f.astype(complex)
    g = data.g.astype(complex)
    # keep NaN in both parts of an unobserved trace
    f_im = np.where(np.isfinite(data.f), f.imag, np.nan)
    g_im = np.where(np.isfinite(data.g), g.imag, np.nan)
    table = np.column_stack([data.points, data.normals, data.weights,
                             np.where(np.isfinite(data.f), f.real, np.nan), f_im,
                             np.where(np.isfinite(data.g), g.real, np.nan), g_im])
    with open(path, "w") as fh:
        fh.write(f"# d={d} n={n} delta={_fmt(data.delta)} seed={seed} operator={op} k={_fmt(k)}\n")
        fh.write("# " + " ".join(cols) + "\n")
        for row in table:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    if truth is not None:
        with open(truth_path(path), "w") as fh:
            json.dump(truth, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def _parse_header(line: str) -> dict:
    if not line.startswith("#"):
        raise ValueError("data file must start with a '# d= n= ...' header")
    out = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise ValueError(f"malformed header token {tok!r}")
        key, val = tok.split("=", 1)
        out[key] = val
    for key in ("d", "n", "delta", "seed"):
        if key not in out:
            raise ValueError(f"data header lacks {key!r}")
    return out


def read_cauchy(path) -> tuple[CauchyData, dict | None]:
    """Inverse of :func:`write_cauchy`; returns the data and the truth record if present."""
    path = Path(path)
    with open(path) as fh:
        header = _parse_header(fh.readline().strip())
        fh.readline()
        table = np.loadtxt(fh, ndmin=2)
    d, n = int(header["d"]), int(header["n"])
    if table.size == 0:
        table = table.reshape(0, 2 * d + 5)
    if table.shape != (n, 2 * d + 5):
        raise ValueError(f"expected {n} rows of {2 * d + 5} columns, found {table.shape}")
    operator = header.get("operator", "laplace")
    k = float(header.get("k", 0.0))
    f_re, f_im, g_re, g_im = (table[:, 2 * d + 1 + i] for i in range(4))
    complex_data = operator == "helmholtz" or np.any(np.nan_to_num(f_im) != 0) or np.any(np.nan_to_num(g_im) != 0)
    f = f_re + 1j * f_im if complex_data else f_re
    g = g_re + 1j * g_im if complex_data else g_re
    if complex_data:
        # a NaN real part marks the node as unobserved; keep it NaN, not nan+nanj noise
        f = np.where(np.isnan(f_re), np.nan, f)
        g = np.where(np.isnan(g_re), np.nan, g)
    seed = None if header["seed"] == "none" else int(header["seed"])
    data = CauchyData(table[:, :d], table[:, d:2 * d], table[:, 2 * d], f, g,
                      float(header["delta"]), seed, {"operator": operator, "k": k})
    truth = None
    tp = truth_path(path)
    if tp.exists():
        with open(tp) as fh:
            truth = json.load(fh)
    return data, truth


def write_trajectories(path, report) -> Path:
    """Loss terms and source snapshots, one row per logged iteration."""
    M = report.intensities.shape[1] if report.intensities.ndim == 2 else 0
    d = report.locations.shape[2] if report.locations.ndim == 3 else 0
    header = ["iter", "total", "residual", "dirichlet", "neumann"] + \
        [f"c_{j + 1}" for j in range(M)] + [f"x_{j + 1}_{i + 1}" for j in range(M) for i in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, it in enumerate(report.iterations):
            row = [int(it)] + [_fmt(v) for v in report.losses[k]]
            row += [_fmt(v) for v in report.intensities[k]]
            row += [_fmt(v) for v in report.locations[k].ravel()]
            w.writerow(row)
    return Path(path)


def read_trajectories(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path} holds no logged iterations")
    header, body = rows[0], np.array(rows[1:], dtype=float)
    return {name: body[:, i] for i, name in enumerate(header)}


def save_checkpoint(directory, nets: list[MlpParams], sources: SourceSet, seed: int, iteration: int) -> Path:
    """Architecture and bookkeeping as JSON, each parameter vector as raw little-endian float64."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, p in enumerate(nets):
        name = f"theta_{i}.bin"
        p.theta.astype(THETA_DTYPE).tofile(directory / name)
        files.append(name)
    meta = {"arch": str(nets[0].arch) if nets else None, "dtype": THETA_DTYPE, "theta_files": files,
            "seed": int(seed), "iteration": int(iteration), "sources": sources.to_dict(),
            "d": sources.d if sources.M else (nets[0].arch.input_dim if nets else 0)}
    with open(directory / "checkpoint.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return directory / "checkpoint.json"


def load_checkpoint(directory) -> tuple[list[MlpParams], SourceSet, dict]:
    directory = Path(directory)
    path = directory / "checkpoint.json"
    if not path.exists():
        raise FileNotFoundError(f"no checkpoint in {directory}")
    with open(path) as fh:
        meta = json.load(fh)
    nets = []
    if meta["arch"]:
        arch = MlpArch.parse(meta["arch"])
        for name in meta["theta_files"]:
            theta = np.fromfile(directory / name, dtype=meta.get("dtype", THETA_DTYPE)).astype(float)
            nets.append(MlpParams(arch, theta))
    sources = SourceSet.from_dict({**meta["sources"], "d": meta.get("d", 0)})
    return nets, sources, meta


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_csv(path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return Path(path)
