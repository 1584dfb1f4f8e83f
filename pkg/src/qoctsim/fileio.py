"""CSV/JSON reading and writing for traces, spectra, runs, and reports.

All writes are atomic (temp file + rename).  Run directories carry a
manifest with SHA-256 content hashes so regression runs can be compared
byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .acquisition import MeasuredTrace, Run, RunSet
from .errors import ConfigError
from .interferometer import Interferogram
from .units import tau_from_mirror_um


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_of_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_interferogram_csv(path, ifg: Interferogram) -> None:
    """Columns: tau_s, delay_um, value, kind; metadata sidecar JSON with a
    content hash next to it."""
    path = Path(path)
    rows = ["tau_s,delay_um,value,kind"]
    for tau, x_um, v in zip(ifg.tau_grid, ifg.positions_um, ifg.values):
        rows.append(f"{tau:.12e},{x_um:.9f},{v:.12e},{ifg.kind}")
    atomic_write_text(path, "\n".join(rows) + "\n")
    meta = {k: v for k, v in ifg.meta.items() if _jsonable(v)}
    write_json(path.with_suffix(".json"), {
        "kind": ifg.kind,
        "points": int(ifg.values.size),
        "meta": meta,
        "sha256": sha256_of_file(path),
    })


def read_interferogram_csv(path) -> Interferogram:
    taus, values, kind = [], [], None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            taus.append(float(row["tau_s"]))
            values.append(float(row["value"]))
            kind = row["kind"]
    if not taus:
        raise ConfigError(f"{path}: empty interferogram file")
    return Interferogram(tau_grid=np.array(taus), values=np.array(values), kind=kind)


def write_measured_csv(path, run: Run) -> None:
    """Columns: position_um, counts, exposure_s, channel (channels stacked)."""
    rows = ["position_um,counts,exposure_s,channel"]
    for channel in sorted(run.traces):
        tr = run.traces[channel]
        for x, c, e in zip(tr.positions_um, tr.counts, tr.exposure_s):
            rows.append(f"{x:.9f},{int(c)},{e:.9e},{channel}")
    atomic_write_text(path, "\n".join(rows) + "\n")


def read_measured_csv(path) -> Run:
    data: dict[str, list] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            data.setdefault(row["channel"], []).append(
                (float(row["position_um"]), int(row["counts"]), float(row["exposure_s"]))
            )
    if not data:
        raise ConfigError(f"{path}: empty measured-trace file")
    traces = {}
    for channel, rows in data.items():
        arr = np.array(rows)
        traces[channel] = MeasuredTrace(
            positions_um=arr[:, 0],
            counts=arr[:, 1].astype(np.int64),
            exposure_s=arr[:, 2],
            channel=channel,
        )
    positions = next(iter(traces.values())).positions_um
    return Run(positions_um=positions, traces=traces, seed=-1)


def write_runset(directory, runset: RunSet, meta: dict | None = None) -> Path:
    """One CSV per run plus manifest.json with per-file hashes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for i, run in enumerate(runset.runs):
        name = f"run_{i:02d}.csv"
        write_measured_csv(directory / name, run)
        files[name] = sha256_of_file(directory / name)
    write_json(directory / "manifest.json", {
        "files": files,
        "runs": len(runset.runs),
        "channels": runset.channels(),
        "meta": meta or {},
    })
    return directory / "manifest.json"


def read_runset(directory) -> RunSet:
    directory = Path(directory)
    manifest = directory / "manifest.json"
    if not manifest.exists():
        raise ConfigError(f"{directory}: missing manifest.json")
    listed = json.loads(manifest.read_text())["files"]
    runs = [read_measured_csv(directory / name) for name in sorted(listed)]
    return RunSet(runs=runs)


def write_spectrum_csv(path, spec) -> None:
    rows = ["omega_over_omega_p,magnitude"]
    for w, m in zip(spec.omega_over_pump, spec.magnitude):
        rows.append(f"{w:.9f},{m:.12e}")
    atomic_write_text(path, "\n".join(rows) + "\n")


def read_xy_csv(path, x_col: str, y_col: str):
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            xs.append(float(row[x_col]))
            ys.append(float(row[y_col]))
    if not xs:
        raise ConfigError(f"{path}: no rows")
    return np.array(xs), np.array(ys)


def write_plot_spec(path, plots: list) -> None:
    """Renderer-agnostic plot description: which CSV columns to draw."""
    write_json(path, {"plots": plots})


def interferogram_tau_grid(positions_um) -> np.ndarray:
    return tau_from_mirror_um(np.asarray(positions_um, dtype=float))


def _jsonable(v) -> bool:
    return isinstance(v, (str, int, float, bool, type(None), list, dict))
