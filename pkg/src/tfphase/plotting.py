"""Energy figures rendered to PNG files with matplotlib's Agg backend."""

from __future__ import annotations

from os import PathLike
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from tfphase.energy import EnergyRecord  # noqa: E402
from tfphase.output import read_energy_csv  # noqa: E402

__all__ = ["plot_dissipation", "plot_energies", "render_report"]

FIGSIZE = (6.0, 4.0)
DPI = 120


def _columns(records: Sequence[EnergyRecord]) -> dict[str, np.ndarray]:
    return {name: np.array([getattr(r, name) for r in records]) for name in EnergyRecord.FIELDS}


def _save(fig, path: str | PathLike) -> Path:
    path = Path(path)
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_energies(records: Sequence[EnergyRecord], path: str | PathLike, title: str = "") -> Path:
    """Original energy ``E`` and modified energy ``E~`` against time."""
    col = _columns(records)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(col["t"], col["E"], label=r"$E$", lw=1.5)
    ax.plot(col["t"], col["E_tilde"], label=r"$\tilde E$", lw=1.5, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_dissipation(records: Sequence[EnergyRecord], path: str | PathLike, title: str = "") -> Path:
    """Increments ``E~(t_n) - E~(t_{n-1})`` (top) and the gap ``E~ - E`` (bottom)."""
    col = _columns(records)
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(FIGSIZE[0], 1.5 * FIGSIZE[1]), sharex=True)
    if len(records) > 1:
        top.plot(col["t"][1:], np.diff(col["E_tilde"]), marker=".", lw=1)
    top.axhline(0.0, color="k", lw=0.8)
    top.set_ylabel(r"$\Delta\tilde E$")
    bottom.plot(col["t"], col["E_tilde"] - col["E"], lw=1.5)
    bottom.set_ylabel(r"$\tilde E - E$")
    bottom.set_xlabel("t")
    if title:
        top.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def render_report(directory: str | PathLike, title: str | None = None) -> list[Path]:
    """Render ``energy.png`` and ``dissipation.png`` from ``energy.csv`` in *directory*."""
    directory = Path(directory)
    records = read_energy_csv(directory / "energy.csv")
    title = directory.name if title is None else title
    return [
        plot_energies(records, directory / "energy.png", title),
        plot_dissipation(records, directory / "dissipation.png", title),
    ]
