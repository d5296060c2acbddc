"""Time-fractional Allen-Cahn and Cahn-Hilliard solvers with decreasing
modified energies."""

from tfphase.energy import EnergyRecord, QuadratureSpec, gl_energy
from tfphase.fields import Grid
from tfphase.fracops import FractionalOrder, SolveHistory, l1_weights, l2_coefficients
from tfphase.mittag import mittag_leffler
from tfphase.schemes import Scheme, SchemeConfig, run, stab_bound_l2

__all__ = [
    "EnergyRecord",
    "FractionalOrder",
    "Grid",
    "QuadratureSpec",
    "Scheme",
    "SchemeConfig",
    "SolveHistory",
    "gl_energy",
    "l1_weights",
    "l2_coefficients",
    "mittag_leffler",
    "run",
    "stab_bound_l2",
]
