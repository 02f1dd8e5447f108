"""Replicate-parallel experiment runner with fixed CSV schemas.

A run writes into its output directory

``results.csv``
    one row per replicate, columns fixed per experiment kind (:data:`COLUMNS`);
``frames.csv``
    recorded lattice or field frames, when ``stride > 0``;
``manifest.json``
    the fully resolved config, the library version and the file list.

Replicate ``r`` draws from stream ``first_stream + r`` of ``base_seed`` and
rows are written in replicate order whatever the worker count, so equal
configs give byte-identical files.  Reals are written with 17 significant
digits, missing values as empty fields, booleans as 0/1, lines end in LF.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError

COLUMNS = {
    "meanfield": (
        "replicate", "T", "U", "peak", "T_scaled", "U_scaled", "censored",
        "violations", "envelope_T", "envelope_U", "envelope_U_scaled", "envelope_censored",
    ),
    "spatial": (
        "replicate", "T", "U", "T_scaled", "U_scaled", "U_horizon", "mass_horizon", "m2_horizon", "censored",
        "violations", "envelope_T", "envelope_U_horizon", "envelope_mass_horizon", "envelope_m2_horizon",
        "envelope_censored",
    ),
    "diffusion": ("replicate", "time", "integral", "value", "censored"),
    "spde": ("replicate", "mass", "second_moment", "extinct"),
    "compare": ("column", "n_a", "n_b", "D", "ks_critical", "threshold", "censored_a", "censored_b", "verdict"),
}

#: columns whose censored values are lower bounds rather than exact
CENSORABLE = {
    "T", "U", "T_scaled", "U_scaled", "time", "integral",
    "envelope_T", "envelope_U", "envelope_U_scaled",
}

FRAME_COLUMNS = {
    "spatial": ("replicate", "t", "site", "infected", "envelope"),
    "spde": ("replicate", "t", "x", "X"),
}


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


# ---------------------------------------------------------------------------
# per-replicate simulation


def _meanfield_row(cfg, r, rng):
    from . import meanfield

    model, N, p, J0, steps = cfg["model"], cfg["N"], cfg["p"], cfg["J0"], cfg["max_steps"]
    if model == "GW":
        M = cfg["M"]
        tr = meanfield.run_gw(J0, N, p, rng, steps, record=False)
        return [r, tr.T, tr.U, tr.peak, tr.T / M, tr.U / M**2, tr.truncated] + [None] * 5
    if model == "graph":
        U = meanfield.sir_size_via_graph(N, p, J0, rng)
        return [r, None, U, None, None, U / N ** (2 * cfg["alpha"]), False] + [None] * 5
    base = model.split("-")[-1]
    Tn = N ** cfg["alpha"]
    Un = N ** (2 * cfg["alpha"])
    if model.startswith("coupled"):
        tr = meanfield.run_coupled(base, N, p, J0, rng, steps, record=False, continue_envelope=True)
        return [
            r, tr.T, tr.U, None, tr.T / Tn, tr.U / Un, tr.truncated,
            tr.violations, tr.envelope_T, tr.envelope_U, tr.envelope_U / Un, tr.envelope_truncated,
        ]
    tr = meanfield.run_meanfield(base, N, p, J0, rng, steps, record=False)
    return [r, tr.T, tr.U, tr.peak, tr.T / Tn, tr.U / Un, tr.truncated] + [None] * 5


def _spatial_initial(cfg):
    from . import spatial

    return spatial.standard_initial(cfg["M"], cfg["b"], cfg["kappa"], cfg["d"])


def _spatial_row(cfg, r, rng, initial):
    from . import spatial

    M = cfg["M"]
    h = int(round(cfg["horizon"] * M))
    stride = cfg["stride"] if r < cfg["frame_replicates"] else 0
    tr = spatial.run_spatial(cfg["model"], cfg["N"], cfg["p"], initial, rng, cfg["max_steps"], stride, h, cfg["d"])
    row = [
        r, tr.T, tr.U, tr.T / M, tr.U / M**2, tr.U_horizon / M**2, tr.mass_horizon / M, tr.m2_horizon / M,
        tr.truncated,
    ]
    env = tr.envelope
    if env is None:
        row += [None] * 6
    else:
        row += [tr.violations, env.T, env.U_horizon / M**2, env.mass_horizon / M, env.m2_horizon / M, env.truncated]
    frames = []
    for i, f in enumerate(tr.frames):
        ef = env.frames[i] if env is not None else None
        # red and envelope frames share one box
        occupied = f.counts > 0 if ef is None else (f.counts > 0) | (ef.counts > 0)
        for idx in zip(*np.nonzero(occupied)):
            site = tuple(o + k for o, k in zip(f.origin, idx))
            label = str(site[0]) if len(site) == 1 else ";".join(map(str, site))
            frames.append([r, f.t, label, int(f.counts[idx]), None if ef is None else int(ef.counts[idx])])
    return row, frames


def _diffusion_row(cfg, r, rng):
    from . import diffusion

    model = cfg["model"]
    if model in ("parabolic", "ou"):
        if model == "ou":
            s = diffusion.ou_passage_time(cfg["b"], cfg["a"], cfg["dt"], cfg["horizon"], rng, cfg["reversion"])
        else:
            s = diffusion.parabolic_passage_time(cfg["b"], cfg["a"], cfg["dt"], cfg["horizon"], rng)
        return [r, s.time, None, None, s.censored]
    fn = {"feller": diffusion.feller_path, "sis": diffusion.sis_limit_path, "sir": diffusion.sir_limit_path}[model]
    path = fn(cfg["b"], cfg["a"], cfg["dt"], cfg["horizon"], rng, bool(cfg["noise"]))
    k = int(round(cfg["at"] / cfg["dt"]))
    v = path.values[k] if path.values.ndim == 1 else path.values[k, 0]
    absorbed = path.absorbed_at
    t = absorbed * path.dt if absorbed is not None else path.horizon
    return [r, t, diffusion.path_integral(path), v, absorbed is None]


def _spde_profile(cfg):
    from . import spde

    L = spde.grid_half_width(cfg["width"], cfg["horizon"], cfg["dx"])
    return spde.bump(cfg["b"], cfg["width"], cfg["dx"], L)


def _spde_row(cfg, r, rng, X0):
    from . import spde

    stride = cfg["stride"] if r < cfg["frame_replicates"] else 0
    snaps = spde.dw_run(X0, cfg["model"], cfg["a"], cfg["dx"], cfg["dt"], cfg["horizon"], rng, stride or None)
    last = snaps[-1]
    frames = []
    if stride:
        for s in snaps:
            for x, X in zip(s.x, s.X):
                if X > 0:
                    frames.append([r, s.t, x, X])
    return [r, last.mass(), last.second_moment(), last.mass() == 0], frames


def _block(cfg: dict, start: int, stop: int):
    """Rows and frames for replicates ``start..stop-1``; runs inside a worker."""
    from .sampling import derive_stream

    kind = cfg["kind"]
    rows, frames = [], []
    shared = _spatial_initial(cfg) if kind == "spatial" else _spde_profile(cfg) if kind == "spde" else None
    for r in range(start, stop):
        rng = derive_stream(cfg["base_seed"], cfg["first_stream"] + r)
        if kind == "meanfield":
            rows.append(_meanfield_row(cfg, r, rng))
        elif kind == "diffusion":
            rows.append(_diffusion_row(cfg, r, rng))
        else:
            fn = _spatial_row if kind == "spatial" else _spde_row
            row, fr = fn(cfg, r, rng, shared)
            rows.append(row)
            frames.extend(fr)
    return rows, frames


def simulate(cfg: dict):
    """All rows and frames of a resolved simulation config, in replicate order."""
    n = cfg["replicates"]
    workers = cfg["workers"] or os.cpu_count() or 1
    workers = max(1, min(workers, n))
    if workers == 1 or n < 2:
        return _block(cfg, 0, n)
    chunks = min(n, 4 * workers)
    edges = np.linspace(0, n, chunks + 1).astype(int)
    rows, frames = [], []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(_block, cfg, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        for f in futs:
            r, fr = f.result()
            rows.extend(r)
            frames.extend(fr)
    return rows, frames


# ---------------------------------------------------------------------------
# compare


def read_column(path, column: str):
    """Values of ``column`` and the matching censoring mask from a results CSV.

    Only columns in :data:`CENSORABLE` carry censoring; for the others the
    mask is all false.  Empty fields are skipped.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or column not in reader.fieldnames:
                raise ConfigError(f"column {column!r} not found in {str(path)!r}")
            cens_col = "envelope_censored" if column.startswith("envelope_") else "censored"
            use_cens = column in CENSORABLE and cens_col in reader.fieldnames
            vals, cens = [], []
            for row in reader:
                if row[column] == "":
                    continue
                vals.append(float(row[column]))
                cens.append(use_cens and row[cens_col] == "1")
    except OSError as exc:
        raise ConfigError(f"cannot read {str(path)!r}: {exc.strerror}") from None
    return np.array(vals, float), np.array(cens, bool)


def compare_files(path_a, path_b, column: str, alpha: float = 0.01, floor: float = 0.0, column_b: str | None = None):
    """KS verdict for one column of two results files.

    Censored values are lower bounds, so the comparison is restricted to the
    region below the smallest censored value in either file.
    """
    from .stats import EmpiricalDistribution, compare

    va, ca = read_column(path_a, column)
    vb, cb = read_column(path_b, column_b or column)
    if va.size == 0 or vb.size == 0:
        raise ConfigError(f"column {column!r} has no values")
    h = min(np.min(va[ca], initial=np.inf), np.min(vb[cb], initial=np.inf))
    A = EmpiricalDistribution.from_values(va, ca, h)
    B = EmpiricalDistribution.from_values(vb, cb, h)
    try:
        return A, B, compare(A, B, alpha, floor)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# files


@dataclass
class RunResult:
    output: Path
    results: Path
    manifest: Path
    frames: Path | None
    rows: list


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def run_experiment(cfg: dict) -> RunResult:
    """Run a resolved config and write its files; on failure nothing is left behind."""
    out = Path(cfg["output"])
    created = not out.exists()
    written: list[Path] = []
    try:
        kind = cfg["kind"]
        if kind == "compare":
            A, B, v = compare_files(cfg["file_a"], cfg["file_b"], cfg["column"], cfg["alpha_ks"], cfg["floor"], cfg["column_b"])
            rows = [[cfg["column"], A.n, B.n, v.D, v.critical, v.threshold, v.censored_A, v.censored_B,
                     "PASS" if v.passed else "FAIL"]]
            frames = []
        else:
            rows, frames = simulate(cfg)
        out.mkdir(parents=True, exist_ok=True)
        results = out / "results.csv"
        results.write_text(_csv_text(COLUMNS[kind], rows), encoding="utf-8", newline="")
        written.append(results)
        frames_path = None
        if kind in FRAME_COLUMNS and cfg.get("stride"):
            frames_path = out / "frames.csv"
            frames_path.write_text(_csv_text(FRAME_COLUMNS[kind], frames), encoding="utf-8", newline="")
            written.append(frames_path)
        manifest = out / "manifest.json"
        doc = {
            "library": "epicrit",
            "version": __version__,
            "config": cfg,
            "columns": list(COLUMNS[kind]),
            "files": [p.name for p in written] + ["manifest.json"],
        }
        manifest.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="")
        written.append(manifest)
        return RunResult(out, results, manifest, frames_path, rows)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created and out.exists():
            shutil.rmtree(out, ignore_errors=True)
        raise
