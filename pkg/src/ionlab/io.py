"""CSV and JSON file formats.

* trace CSV: ``bin_start_us,counts`` with a JSON sidecar (same stem) that
  carries ``bin_width_us``, ``n_sequences``, ``background_rate`` and the
  run manifest.
* model CSV: ``t_us,rate``.
* sweep CSV: ``tau_over_T,x_a_um,sigma_um,status``; rows whose status is
  not ``ok`` are failed per-point fits.
* voltage CSV: ``voltage_v,x_d_um,sigma_um``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .fluorescence import McsHistogram

TRACE_HEADER = ("bin_start_us", "counts")
SWEEP_HEADER = ("tau_over_T", "x_a_um", "sigma_um", "status")
VOLTAGE_HEADER = ("voltage_v", "x_d_um", "sigma_um")
MODEL_HEADER = ("t_us", "rate")


def _fmt(x):
    return "nan" if not math.isfinite(x) else f"{x:.9g}"


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_trace(hist: McsHistogram, path, metadata=None):
    path = Path(path)
    starts = hist.bin_starts() * 1e6
    with path.open("w", newline="") as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        for t, c in zip(starts, hist.counts):
            fh.write(f"{t:.6f},{int(c)}\n")
    meta = {"bin_width_us": hist.bin_width * 1e6, "n_sequences": hist.n_sequences,
            "background_rate": hist.background_rate, "t0_us": hist.t0 * 1e6}
    if metadata:
        meta.update(metadata)
    meta["digests"] = {path.name: file_digest(path)}
    write_json(meta, sidecar_path(path))
    return path


def read_trace(path) -> McsHistogram:
    path = Path(path)
    rows = _read_rows(path, TRACE_HEADER)
    starts = np.array([float(r[0]) for r in rows]) * 1e-6
    counts = np.array([int(r[1]) for r in rows], dtype=np.int64)
    meta = {}
    if sidecar_path(path).exists():
        meta = json.loads(sidecar_path(path).read_text())
    if "bin_width_us" in meta:
        width = float(meta["bin_width_us"]) * 1e-6
    elif starts.size > 1:
        width = float(np.median(np.diff(starts)))
    else:
        raise ValueError(f"{path}: cannot infer bin width from a single bin without sidecar")
    return McsHistogram(width, counts, int(meta.get("n_sequences", 1)),
                        float(meta.get("background_rate", 0.0)),
                        t0=float(starts[0]) if starts.size else 0.0)


def write_model(t, rate, path):
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(MODEL_HEADER) + "\n")
        for a, b in zip(np.asarray(t) * 1e6, rate):
            fh.write(f"{a:.6f},{_fmt(float(b))}\n")


def write_sweep(rows, path):
    """``rows`` are ``(tau_over_T, x_a [m], sigma [m], status)`` tuples."""
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(SWEEP_HEADER) + "\n")
        for r, x, s, status in rows:
            fh.write(f"{_fmt(r)},{_fmt(x * 1e6)},{_fmt(s * 1e6)},{status}\n")


def read_sweep(path):
    """Return ``(tau_over_T, x_a [m], sigma [m], status)`` rows."""
    rows = _read_rows(Path(path), SWEEP_HEADER[:3], allow_extra=True)
    out = []
    for r in rows:
        status = r[3] if len(r) > 3 else "ok"
        out.append((float(r[0]), float(r[1]) * 1e-6, float(r[2]) * 1e-6, status))
    return out


def write_voltage(rows, path):
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(VOLTAGE_HEADER) + "\n")
        for v, x, s in rows:
            fh.write(f"{_fmt(v)},{_fmt(x * 1e6)},{_fmt(s * 1e6)}\n")


def read_voltage(path):
    rows = _read_rows(Path(path), VOLTAGE_HEADER)
    V = np.array([float(r[0]) for r in rows])
    x = np.array([float(r[1]) for r in rows]) * 1e-6
    s = np.array([float(r[2]) for r in rows]) * 1e-6
    return V, x, s


def _read_rows(path: Path, header, allow_extra=False):
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        got = tuple(h.strip() for h in first)
        if (got[:len(header)] if allow_extra else got) != tuple(header):
            raise ValueError(f"{path}:1: expected header {','.join(header)}, got {','.join(got)}")
        return [row for row in reader if row]


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def file_digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()
