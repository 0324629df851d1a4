"""Serialization for time-series records and run artifacts.

Records are stored either as CSV (columns ``t_s,value``, 17 significant
digits, '.' decimal, no locale) or as a raw .npy column for long runs;
either way a JSON sidecar ``<file>.json`` carries sampling rate, kind,
units and provenance (plan hash, seed).  All writes are atomic
(temp file + rename) so partially written artifacts never appear.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dynamics import TimeSeriesRecord

_UNITS = {"displacement_m": "m", "voltage_v": "V"}


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic_write_bytes(Path(path), text.encode())


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def record_sidecar(record: TimeSeriesRecord) -> dict:
    return {
        "fs_hz": record.fs_hz,
        "kind": record.kind,
        "unit": _UNITS.get(record.kind, ""),
        "n_samples": int(len(record.samples)),
        "meta": record.meta,
    }


def save_record(record: TimeSeriesRecord, path, fmt: str = "csv") -> Path:
    """Write a record plus its JSON sidecar; returns the data path."""
    path = Path(path)
    if fmt == "csv":
        if path.suffix != ".csv":
            path = path.with_suffix(".csv")
        t = record.times()
        lines = ["t_s,value"]
        lines.extend(
            f"{ti:.17g},{vi:.17g}" for ti, vi in zip(t, record.samples)
        )
        _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())
    elif fmt == "npy":
        if path.suffix != ".npy":
            path = path.with_suffix(".npy")
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        os.close(fd)
        try:
            np.save(tmp + ".npy", record.samples)
            os.replace(tmp + ".npy", path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
    else:
        raise ValueError(f"unknown record format {fmt!r}")
    write_json(path.with_suffix(path.suffix + ".json"), record_sidecar(record))
    return path


def load_record(path) -> TimeSeriesRecord:
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if not sidecar_path.exists():
        raise FileNotFoundError(f"missing record sidecar {sidecar_path}")
    with open(sidecar_path) as fh:
        side = json.load(fh)
    if path.suffix == ".csv":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        samples = data[:, 1] if data.ndim > 1 else data[1:2]
    elif path.suffix == ".npy":
        samples = np.load(path)
    else:
        raise ValueError(f"unknown record format {path.suffix!r}")
    return TimeSeriesRecord(
        fs_hz=float(side["fs_hz"]),
        samples=np.asarray(samples, dtype=float),
        kind=side["kind"],
        meta=side.get("meta", {}),
    )


def write_csv(path, header: list[str], columns: list) -> None:
    """Unit-tagged CSV with deterministic 17-significant-digit floats."""
    rows = [",".join(header)]
    for vals in zip(*columns):
        rows.append(
            ",".join(
                f"{v:.17g}" if isinstance(v, (float, np.floating)) else str(v)
                for v in vals
            )
        )
    atomic_write_text(path, "\n".join(rows) + "\n")


def content_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def write_manifest(out_dir, command: str, config_dict: dict, seed, artifacts: list[str]) -> None:
    import numpy
    import scipy

    from . import __version__

    manifest = {
        "command": command,
        "config": config_dict,
        "config_hash": content_hash(config_dict),
        "seed": seed,
        "artifacts": sorted(artifacts),
        "versions": {
            "levibench": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
    }
    write_json(Path(out_dir) / "manifest.json", manifest)
