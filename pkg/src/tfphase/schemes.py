"""Stabilized implicit-explicit time steppers for the time-fractional
Allen-Cahn and Cahn-Hilliard equations on a periodic grid.

Every implicit operator is diagonal in Fourier space, so one step costs a
handful of FFTs plus the ``O(n)`` history sum of the nonlocal operator.

Three schemes are available:

``L1_AC``
    L1 derivative, ``S (u^n - u^{n-1})`` stabilization, explicit ``f``.
``L2_AC``
    L2 derivative with a two-step Adams-Bashforth extrapolation of the
    truncated ``f`` and ``S dt (u^n - u^{n-1})`` stabilization.  The first
    step is taken with ``L1_AC``.
``L1_CH``
    L1 derivative for the Cahn-Hilliard form with the truncated ``f``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, NamedTuple

import numpy as np
from scipy.special import gamma as gamma_fn

from tfphase.energy import (
    EnergyRecord,
    ch_modified_energy,
    grid_sq_norms,
    l1_modified_energy,
    l2_modified_energy,
)
from tfphase.fields import Grid
from tfphase.fracops import (
    FractionalOrder,
    L1Weights,
    L2Coefficients,
    SolveHistory,
    l1_weights,
    l2_coefficients,
)
from tfphase.potentials import DoubleWell, TruncatedDoubleWell, truncated_F, truncated_f

__all__ = [
    "NonFiniteField",
    "RunResult",
    "Scheme",
    "SchemeConfig",
    "SimulationState",
    "SolveResidualError",
    "backward_euler_step",
    "l2_dissipation_margin",
    "run",
    "stab_bound_l2",
    "step",
    "step_l1_ac",
    "step_l1_ch",
    "step_l2_ac",
    "truncated_F",
    "truncated_f",
]

RESIDUAL_TOL = 1e-10


class Scheme(str, enum.Enum):
    L1_AC = "l1-ac"
    L2_AC = "l2-ac"
    L1_CH = "l1-ch"


class NonFiniteField(ArithmeticError):
    """A step produced NaN or Inf."""


class SolveResidualError(ArithmeticError):
    """The diagonal spectral solve failed its round-trip residual check."""


def stab_bound_l2(alpha: float, gamma: float, M: float = 1.0) -> float:
    r"""Smallest stabilization for which the L2 scheme is proved dissipative,

    .. math::

        S^* = \frac{3\alpha L}{2(1+\alpha)}
              \Big(\frac{3\gamma\Gamma(3-\alpha) L}{2\alpha(1+\alpha)}\Big)^{1/\alpha},
        \qquad L = 3M^2 - 1.
    """
    alpha = FractionalOrder(alpha).alpha
    if not gamma > 0:
        raise ValueError(f"mobility must be positive, got {gamma}")
    L = TruncatedDoubleWell(M).lipschitz
    inner = 3.0 * gamma * gamma_fn(3.0 - alpha) * L / (2.0 * alpha * (1.0 + alpha))
    return 3.0 * alpha * L / (2.0 * (1.0 + alpha)) * inner ** (1.0 / alpha)


def l2_dissipation_margin(alpha: float, gamma: float, M: float, S: float) -> float:
    """``min_{dt > 0} [alpha / (gamma Gamma(3 - alpha) dt^alpha) + S dt] - 3 L / 2``.

    Nonnegative exactly when the L2 scheme's dissipation argument applies
    for every step size.  The minimum is taken in closed form.
    """
    alpha = FractionalOrder(alpha).alpha
    L = TruncatedDoubleWell(M).lipschitz
    A = alpha / (gamma * gamma_fn(3.0 - alpha))
    if S <= 0:
        return -1.5 * L if S == 0 else -math.inf
    dt_star = (alpha * A / S) ** (1.0 / (1.0 + alpha))
    return A * dt_star**-alpha + S * dt_star - 1.5 * L


@dataclass(frozen=True)
class SchemeConfig:
    """Model and discretisation parameters of one run.

    ``nonlinear=False`` drops the potential term entirely; the remaining
    linear problem has a Mittag-Leffler reference solution.
    ``guarantee=True`` rejects stabilization values for which the
    corresponding dissipation theorem does not apply.
    """

    alpha: float
    gamma: float
    eps: float
    dt: float
    S: float = 0.0
    M: float = 1.0
    scheme: Scheme = Scheme.L1_AC
    n_steps: int = 0
    energy_tracking: bool = True
    energy_stride: int = 1
    nonlinear: bool = True
    guarantee: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", FractionalOrder(self.alpha).alpha)
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        for name in ("gamma", "eps", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.S >= 0:
            raise ValueError(f"stabilization must be nonnegative, got {self.S!r}")
        if not self.M >= 1:
            raise ValueError(f"truncation level M must be >= 1, got {self.M!r}")
        if self.n_steps < 0:
            raise ValueError(f"step count must be nonnegative, got {self.n_steps}")
        if self.energy_stride < 1:
            raise ValueError(f"energy stride must be >= 1, got {self.energy_stride}")
        if self.guarantee and not self.guarantee_applies:
            raise ValueError(f"S={self.S} is below the stabilization required by the "
                             f"dissipation theory for {self.scheme.value} ({self.required_S:.6g})")

    @property
    def required_S(self) -> float:
        """Stabilization above which monotone decay of the modified energy is proved."""
        if self.scheme is Scheme.L1_AC:
            return 2.0
        if self.scheme is Scheme.L2_AC:
            return stab_bound_l2(self.alpha, self.gamma, self.M)
        return 0.5 * TruncatedDoubleWell(self.M).lipschitz

    @property
    def guarantee_applies(self) -> bool:
        return self.S >= self.required_S

    @property
    def potential(self):
        """Potential used by the explicit term and by the energy."""
        if self.scheme is Scheme.L1_AC and self.S >= 2.0:
            return DoubleWell()
        return TruncatedDoubleWell(self.M)

    def with_(self, **changes) -> SchemeConfig:
        return replace(self, **changes)


# {{{ state

@dataclass
class SimulationState:
    """Everything a stepper needs: the history, the grid and the cached
    operators for the configured scheme."""

    cfg: SchemeConfig
    grid: Grid
    history: SolveHistory
    weights: L1Weights
    coeffs: L2Coefficients | None = None
    spectra: list[np.ndarray] = field(default_factory=list)
    last_residual: float = 0.0

    @classmethod
    def start(cls, cfg: SchemeConfig, u0: np.ndarray, grid: Grid) -> SimulationState:
        u0 = grid.check(u0)
        if not np.all(np.isfinite(u0)):
            raise NonFiniteField("initial field contains NaN or Inf")
        n_total = max(cfg.n_steps, 2)
        history = SolveHistory(u0, cfg.dt, sq_norms=grid_sq_norms(grid), capacity=cfg.n_steps + 1)
        coeffs = l2_coefficients(cfg.alpha, n_total) if cfg.scheme is Scheme.L2_AC else None
        state = cls(cfg, grid, history, l1_weights(cfg.alpha, cfg.dt, n_total), coeffs)
        if cfg.scheme is Scheme.L1_CH:
            state.spectra.append(grid.fft(u0))
        return state

    @property
    def n(self) -> int:
        return self.history.n

    @property
    def u(self) -> np.ndarray:
        return self.history[self.history.n]

    def ensure_capacity(self, n: int) -> None:
        """Extend cached coefficients so that step *n* can be taken."""
        if len(self.weights) < n:
            self.weights = l1_weights(self.cfg.alpha, self.cfg.dt, max(n, 2 * len(self.weights)))
        if self.cfg.scheme is Scheme.L2_AC and self.coeffs.n < n:
            self.coeffs = l2_coefficients(self.cfg.alpha, max(n, 2 * self.coeffs.n))

    def record(self) -> EnergyRecord:
        """Modified-energy record of the latest level."""
        cfg, n = self.cfg, self.n
        pot = cfg.potential
        if cfg.scheme is Scheme.L1_AC:
            return l1_modified_energy(self.history, self.weights, cfg.gamma, cfg.eps, n, self.grid, pot)
        if cfg.scheme is Scheme.L2_AC:
            return l2_modified_energy(self.history, self.coeffs, cfg.gamma, cfg.eps, cfg.M, n,
                                      self.grid, pot)
        spectra = np.stack(self.spectra) if self.spectra else None
        return ch_modified_energy(self.history, self.weights, cfg.gamma, cfg.eps, n, self.grid,
                                  pot, spectra)

# }}}


# {{{ steppers

def _force(cfg: SchemeConfig, u: np.ndarray, potential=None) -> np.ndarray:
    if not cfg.nonlinear:
        return np.zeros_like(u)
    potential = cfg.potential if potential is None else potential
    return potential.f(u)


def _l1_history_sum(state: SimulationState, n: int) -> np.ndarray:
    """``sum_{k<n} w_k u^k``, so the L1 derivative is ``b_0 u^n`` minus this."""
    w = state.weights.recast(n)
    return np.tensordot(w, state.history.fields[:n], axes=1)


def _solve(state: SimulationState, symbol: np.ndarray, rhs_hat: np.ndarray) -> np.ndarray:
    """Divide by the diagonal symbol, return to physical space and check the
    transform round trip."""
    grid = state.grid
    u_hat = rhs_hat / symbol
    u = grid.ifft(u_hat)
    if not np.all(np.isfinite(u)):
        raise NonFiniteField(f"step {state.n + 1} ({state.cfg.scheme.value}, t="
                             f"{(state.n + 1) * state.cfg.dt:g}) produced non-finite values; "
                             f"max|u^{state.n}| = {np.max(np.abs(state.u)):.3e}")
    resid = symbol * grid.fft(u) - rhs_hat
    scale = np.sqrt(grid.spectral_sq_sum(rhs_hat))
    state.last_residual = float(np.sqrt(grid.spectral_sq_sum(resid)) / scale) if scale > 0 else 0.0
    if state.last_residual > RESIDUAL_TOL:
        raise SolveResidualError(f"step {state.n + 1}: relative solve residual "
                                 f"{state.last_residual:.3e} > {RESIDUAL_TOL:.0e}")
    return u


def _commit(state: SimulationState, u: np.ndarray) -> SimulationState:
    state.history.append(u)
    if state.cfg.scheme is Scheme.L1_CH:
        state.spectra.append(state.grid.fft(u))
    return state


def _l1_ac_update(state: SimulationState, potential=None) -> np.ndarray:
    cfg, grid = state.cfg, state.grid
    n = state.n + 1
    state.ensure_capacity(n)
    b0 = state.weights.b[0]
    u_prev = state.u
    rhs = (_l1_history_sum(state, n) + cfg.gamma * cfg.S * u_prev
           - cfg.gamma * _force(cfg, u_prev, potential))
    symbol = b0 + cfg.gamma * cfg.S + cfg.gamma * cfg.eps**2 * grid.k_squared
    return _solve(state, symbol, grid.fft(rhs))


def step_l1_ac(state: SimulationState) -> SimulationState:
    r"""One stabilized L1-IMEX Allen-Cahn step,

    .. math::

        \bar\partial_t^\alpha u^n = \gamma\big(\varepsilon^2 \Delta u^n
            - f(u^{n-1}) - S (u^n - u^{n-1})\big).
    """
    return _commit(state, _l1_ac_update(state))


def step_l2_ac(state: SimulationState) -> SimulationState:
    r"""One stabilized L2 Adams-Bashforth Allen-Cahn step (``n >= 2``),

    .. math::

        L_n^\alpha u = \gamma\big(\varepsilon^2 \Delta u^n - 2\tilde f(u^{n-1})
            + \tilde f(u^{n-2}) - S\Delta t (u^n - u^{n-1})\big).

    At ``n = 1`` an L1 step with the truncated potential is taken instead.
    """
    cfg, grid = state.cfg, state.grid
    n = state.n + 1
    if n == 1:
        return _commit(state, _l1_ac_update(state, TruncatedDoubleWell(cfg.M)))
    state.ensure_capacity(n)
    alpha, coeffs = cfg.alpha, state.coeffs
    scale = 1.0 / (gamma_fn(3.0 - alpha) * cfg.dt**alpha)
    kappa = scale * (1.5 * alpha + coeffs.d[1])

    fields = state.history.fields
    du = np.diff(fields, axis=0)  # du[j - 1] = u^j - u^{j-1}, j = 1..n-1
    # everything in L_n except the d_1 and 3 alpha / 2 multiples of du^n:
    # -alpha/2 du^{n-1} + sum_{j=2}^n d_j du^{n-j+1} - c_n du^1
    hist = (np.tensordot(coeffs.d[n:1:-1], du, axes=1)
            - 0.5 * alpha * du[n - 2] - coeffs.c[n] * du[0])

    pot = TruncatedDoubleWell(cfg.M)
    u1, u2 = fields[n - 1], fields[n - 2]
    extrap = 2.0 * _force(cfg, u1, pot) - _force(cfg, u2, pot)
    stab = cfg.gamma * cfg.S * cfg.dt
    rhs = (kappa + stab) * u1 - scale * hist - cfg.gamma * extrap
    symbol = kappa + stab + cfg.gamma * cfg.eps**2 * grid.k_squared
    return _commit(state, _solve(state, symbol, grid.fft(rhs)))


def step_l1_ch(state: SimulationState) -> SimulationState:
    r"""One stabilized L1-IMEX Cahn-Hilliard step,

    .. math::

        \bar\partial_t^\alpha u^n = \gamma\Delta\big(-\varepsilon^2\Delta u^n
            + \tilde f(u^{n-1}) + S (u^n - u^{n-1})\big).

    The zero Fourier mode is copied from ``u^0`` so the mean is conserved to
    the roundoff of one inverse transform.
    """
    cfg, grid = state.cfg, state.grid
    n = state.n + 1
    state.ensure_capacity(n)
    b0 = state.weights.b[0]
    k2 = grid.k_squared
    u_prev = state.u
    explicit = _force(cfg, u_prev) - cfg.S * u_prev
    rhs_hat = grid.fft(_l1_history_sum(state, n)) - cfg.gamma * k2 * grid.fft(explicit)
    rhs_hat[0, 0] = state.spectra[0][0, 0] * b0
    symbol = b0 + cfg.gamma * k2 * (cfg.eps**2 * k2 + cfg.S)
    return _commit(state, _solve(state, symbol, rhs_hat))


_STEPPERS: dict[Scheme, Callable[[SimulationState], SimulationState]] = {
    Scheme.L1_AC: step_l1_ac,
    Scheme.L2_AC: step_l2_ac,
    Scheme.L1_CH: step_l1_ch,
}


def step(state: SimulationState) -> SimulationState:
    """Advance *state* by one step of its configured scheme."""
    return _STEPPERS[state.cfg.scheme](state)


def backward_euler_step(u: np.ndarray, grid: Grid, cfg: SchemeConfig) -> np.ndarray:
    """Classical (first-derivative) stabilized IMEX Euler step for Allen-Cahn,
    the ``alpha -> 1`` limit of :func:`step_l1_ac`."""
    u = grid.check(u)
    rhs = u / cfg.dt + cfg.gamma * cfg.S * u - cfg.gamma * _force(cfg, u)
    symbol = 1.0 / cfg.dt + cfg.gamma * cfg.S + cfg.gamma * cfg.eps**2 * grid.k_squared
    return grid.ifft(grid.fft(rhs) / symbol)

# }}}


# {{{ driver

class RunResult(NamedTuple):
    history: SolveHistory
    records: list[EnergyRecord]


Callback = Callable[[SimulationState, "EnergyRecord | None"], None]


def run(
    cfg: SchemeConfig,
    u0: np.ndarray,
    grid: Grid,
    callbacks: Iterable[Callback] = (),
) -> RunResult:
    """Take ``cfg.n_steps`` steps from *u0*.

    With energy tracking on, a record is produced at step 0, every
    ``cfg.energy_stride`` steps and at the final step.  Each callback is
    invoked after every step with the state and the record (or None).

    If a step fails, the exception carries the partial ``history`` and
    ``records`` as attributes.
    """
    callbacks = list(callbacks)
    state = SimulationState.start(cfg, u0, grid)
    records: list[EnergyRecord] = []

    def emit() -> None:
        n = state.n
        rec = None
        if cfg.energy_tracking and (n % cfg.energy_stride == 0 or n == cfg.n_steps):
            rec = state.record()
            records.append(rec)
        for cb in callbacks:
            cb(state, rec)

    try:
        emit()
        for _ in range(cfg.n_steps):
            step(state)
            emit()
    except Exception as exc:
        exc.history = state.history
        exc.records = records
        raise
    return RunResult(state.history, records)

# }}}
