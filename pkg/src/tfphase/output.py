"""File formats written by the command line tool.

* energy CSV: header ``t,E,E_tilde,D_term,stab_term,max_abs_u,mean_u``, one
  row per tracked step, floats printed with 17 significant digits;
* binary snapshots in the ``TFP1`` layout (see :mod:`tfphase.fields`);
* 8-bit binary PGM (P5) images mapping ``[-1.05, 1.05]`` onto ``[0, 255]``;
* a plain-text manifest of every resolved parameter.
"""

from __future__ import annotations

import csv
import io
import re
from os import PathLike
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from tfphase.energy import EnergyRecord
from tfphase.fields import read_snapshot, write_snapshot

__all__ = [
    "PGM_RANGE",
    "emit_energy_csv",
    "emit_pgm",
    "emit_snapshot",
    "format_float",
    "pgm_levels",
    "read_energy_csv",
    "read_pgm",
    "read_snapshot",
    "write_manifest",
]

PGM_RANGE = (-1.05, 1.05)
_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _open_for_write(path: str | PathLike, mode: str):
    try:
        return open(path, mode)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def emit_energy_csv(records: Iterable[EnergyRecord], path: str | PathLike) -> None:
    """Write energy records; an empty iterable gives a header-only file."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EnergyRecord.FIELDS)
    for rec in records:
        writer.writerow([format_float(v) for v in rec.astuple()])
    with _open_for_write(path, "w") as fh:
        fh.write(buf.getvalue())


def read_energy_csv(path: str | PathLike) -> list[EnergyRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EnergyRecord.FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [EnergyRecord(**{k: float(v) for k, v in row.items()}) for row in reader]


def emit_snapshot(u: np.ndarray, path: str | PathLike) -> None:
    """Binary ``TFP1`` snapshot of *u*."""
    write_snapshot(u, path)


def pgm_levels(u: np.ndarray) -> np.ndarray:
    """Gray levels of *u*: linear map of ``PGM_RANGE`` onto ``0..255``,
    clipped, rounded half to even."""
    lo, hi = PGM_RANGE
    scaled = (np.asarray(u, dtype=np.float64) - lo) * 255.0 / (hi - lo)
    return np.rint(np.clip(scaled, 0.0, 255.0)).astype(np.uint8)


def emit_pgm(u: np.ndarray, path: str | PathLike) -> None:
    """Binary 8-bit PGM; the first image row is the first array row."""
    levels = pgm_levels(u)
    ny, nx = levels.shape
    with _open_for_write(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(levels.tobytes())


def read_pgm(path: str | PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    header = _PGM_HEADER.match(data)
    if header is None:
        raise ValueError(f"{path}: not a binary PGM")
    nx, ny, maxval = (int(g) for g in header.groups())
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=nx * ny, offset=header.end())
    return pixels.reshape(ny, nx)


def write_manifest(params: Mapping[str, object], path: str | PathLike) -> None:
    """``key = value`` lines in sorted key order (the config-file syntax)."""
    lines = []
    for key in sorted(params):
        value = params[key]
        if isinstance(value, float):
            value = format_float(value)
        lines.append(f"{key} = {value}")
    with _open_for_write(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
