"""Initial conditions and parameter sets of the standard experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from tfphase.fields import Grid
from tfphase.schemes import Scheme

__all__ = [
    "DEFAULT_SEED",
    "PRESETS",
    "Preset",
    "SEVEN_CIRCLES",
    "preset_ch_random",
    "preset_flower",
    "preset_seven_circles",
]

DEFAULT_SEED = 20240101

PI = np.pi
# (x_i, y_i, r_i)
SEVEN_CIRCLES = (
    (PI / 2, PI / 2, PI / 5),
    (PI / 4, 3 * PI / 4, 2 * PI / 15),
    (PI / 2, 5 * PI / 4, 2 * PI / 15),
    (PI, PI / 4, PI / 10),
    (3 * PI / 2, PI / 4, PI / 10),
    (PI, PI, PI / 4),
    (3 * PI / 2, 3 * PI / 2, PI / 4),
)


def preset_flower(grid: Grid, eps: float = 0.025) -> np.ndarray:
    """Four-petal interface centred at the origin.

    ``tanh((2r/3 - 1/4 - (1 + cos 4 theta)/16) / (sqrt(2) eps))`` with the
    polar angle ``theta = atan2(y, x)``.
    """
    x, y = grid.coordinates()
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    arg = 2.0 * r / 3.0 - 0.25 - (1.0 + np.cos(4.0 * theta)) / 16.0
    return np.tanh(arg / (np.sqrt(2.0) * eps))


def _bump(s: np.ndarray, eps: float) -> np.ndarray:
    out = np.zeros_like(s)
    inside = s < 0
    out[inside] = 2.0 * np.exp(-eps * eps / (s[inside] ** 2))
    return out


def preset_seven_circles(grid: Grid, eps: float = 0.1) -> np.ndarray:
    """``-1`` plus seven smooth bumps of height 2 at fixed centres and radii."""
    x, y = grid.coordinates()
    u = -np.ones(grid.shape)
    for xc, yc, rc in SEVEN_CIRCLES:
        u += _bump(np.hypot(x - xc, y - yc) - rc, eps)
    return u


def preset_ch_random(grid: Grid, seed: int = DEFAULT_SEED) -> np.ndarray:
    """I.i.d. uniform samples in ``[-1, 1]`` from numpy's PCG64 generator."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.uniform(-1.0, 1.0, size=grid.shape)


@dataclass(frozen=True)
class Preset:
    """Parameter set and initial condition of one experiment."""

    name: str
    scheme: Scheme
    eps: float
    gamma: float
    S: float
    dt: float
    length: float
    origin: float
    n: int
    initial: Callable[..., np.ndarray]
    seeded: bool = False

    def grid(self, n: int | None = None) -> Grid:
        return Grid.square(self.n if n is None else n, self.length, self.origin)

    def initial_field(self, grid: Grid, seed: int = DEFAULT_SEED) -> np.ndarray:
        if self.seeded:
            return self.initial(grid, seed)
        return self.initial(grid, self.eps)


PRESETS: dict[str, Preset] = {
    "flower": Preset("flower", Scheme.L1_AC, eps=0.025, gamma=2.0, S=20.0, dt=0.01,
                     length=2.0, origin=-1.0, n=128, initial=preset_flower),
    "circles": Preset("circles", Scheme.L2_AC, eps=0.1, gamma=1.0, S=1.0, dt=0.05,
                      length=2 * PI, origin=0.0, n=128, initial=preset_seven_circles),
    "ch-random": Preset("ch-random", Scheme.L1_CH, eps=0.05, gamma=0.02, S=0.1, dt=0.1,
                        length=2 * PI, origin=0.0, n=128, initial=preset_ch_random, seeded=True),
}
