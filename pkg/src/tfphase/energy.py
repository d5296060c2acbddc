"""Energy functionals for time-fractional phase-field models.

Continuous side: the Ginzburg-Landau energy and the nonlocal history term
``D_alpha(t)`` evaluated by graded Gauss-Legendre quadrature on a trajectory.

Discrete side: the history terms attached to the L1 and L2 operators and the
resulting modified energies, which are nonincreasing along the stabilized
IMEX schemes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma

from tfphase.fields import Grid, MeanTooLarge
from tfphase.fracops import L1Weights, L2Coefficients, SolveHistory, _as_alpha
from tfphase.potentials import DoubleWell

__all__ = [
    "EnergyRecord",
    "InsufficientSamples",
    "NegativeHistoryEnergy",
    "QuadratureSpec",
    "caputo_quadrature",
    "ch_modified_energy",
    "d_alpha_quadrature",
    "d_functional",
    "gl_energy",
    "grid_sq_norms",
    "hminus1_pair_sq_norms",
    "l1_discrete_D",
    "l1_modified_energy",
    "l2_discrete_D",
    "l2_modified_energy",
    "lemma31_residual",
]


class InsufficientSamples(ValueError):
    """The sampled trajectory cannot support the requested quadrature."""


class NegativeHistoryEnergy(ArithmeticError):
    """A discrete history energy came out negative, which would falsify the
    coefficient inequalities it relies on."""


@dataclass(frozen=True)
class EnergyRecord:
    """One row of energy output.

    ``E_tilde = E + D_term + stab_term``; ``D_term`` is the history
    contribution already divided by the mobility.
    """

    t: float
    E: float
    E_tilde: float
    D_term: float
    stab_term: float
    max_abs_u: float
    mean_u: float

    FIELDS = ("t", "E", "E_tilde", "D_term", "stab_term", "max_abs_u", "mean_u")

    def astuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.FIELDS)


# {{{ Ginzburg-Landau energy

def gl_energy(u: np.ndarray, grid: Grid, eps: float, potential=None) -> float:
    """``int eps^2 / 2 |grad u|^2 + F(u) dx`` with a spectral gradient.

    The gradient term is evaluated as ``<u, -Laplace u>`` in Fourier space so
    that it matches the Laplacian used by the time steppers exactly.
    """
    if not eps > 0:
        raise ValueError(f"interface width must be positive, got {eps}")
    potential = DoubleWell() if potential is None else potential
    u = grid.check(u)
    grad2 = grid.spectral_sq_sum(grid.fft(u), grid.k_squared)
    bulk = np.sum(potential.F(u)) * grid.cell_area
    return float(0.5 * eps * eps * grad2 + bulk)


def grid_sq_norms(grid: Grid) -> Callable[[np.ndarray], np.ndarray]:
    """Squared L2 norms of a stack of fields on *grid*."""
    area = grid.cell_area

    def sq_norms(diff: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...ij->...", diff, diff) * area

    return sq_norms

# }}}


# {{{ continuous history functional

@dataclass(frozen=True)
class QuadratureSpec:
    """Graded composite Gauss-Legendre rule on ``s = t - tau``.

    Panel edges are ``t * (i / nodes)**grading``; ``grading=None`` means
    ``2 / alpha``. ``levels`` successive doublings of ``nodes`` are combined
    by Richardson extrapolation.
    """

    nodes: int = 64
    grading: float | None = None
    levels: int = 3
    gauss_points: int = 8

    def __post_init__(self) -> None:
        if self.nodes < 16:
            raise ValueError(f"need at least 16 panels, got {self.nodes}")
        if self.grading is not None and self.grading < 1:
            raise ValueError(f"grading exponent must be >= 1, got {self.grading}")
        if self.levels < 1:
            raise ValueError(f"need at least one refinement level, got {self.levels}")

    def refined(self, factor: int = 2) -> QuadratureSpec:
        return QuadratureSpec(self.nodes * factor, self.grading, self.levels, self.gauss_points)


Trajectory = Callable[[float], np.ndarray] | tuple[Sequence[float], Sequence]


def _as_callable(trajectory: Trajectory, t: float, spec: QuadratureSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised ``tau -> u(tau)`` with time on the leading axis."""
    if callable(trajectory):
        def u_of(tau: np.ndarray) -> np.ndarray:
            values = [np.asarray(trajectory(float(x)), dtype=np.float64) for x in np.ravel(tau)]
            return np.stack(values)

        return u_of

    times, values = trajectory
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.ndim != 1 or times.size != values.shape[0]:
        raise InsufficientSamples("times and values disagree in length")
    if times.size < spec.nodes:
        raise InsufficientSamples(
            f"{times.size} samples cannot resolve a {spec.nodes}-panel quadrature")
    if np.any(np.diff(times) <= 0):
        raise InsufficientSamples("sample times must be strictly increasing")
    if times[0] > 0 or times[-1] < t * (1 - 1e-14):
        raise InsufficientSamples(f"samples cover [{times[0]}, {times[-1]}], need [0, {t}]")

    flat = values.reshape(times.size, -1)

    def u_of(tau: np.ndarray) -> np.ndarray:
        tau = np.ravel(tau)
        idx = np.clip(np.searchsorted(times, tau, side="right") - 1, 0, times.size - 2)
        theta = ((tau - times[idx]) / (times[idx + 1] - times[idx]))[:, None]
        out = (1.0 - theta) * flat[idx] + theta * flat[idx + 1]
        return out.reshape(tau.size, *values.shape[1:])

    return u_of


def _graded_rule(t: float, n_panels: int, grading: float, points: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(points)
    edges = t * (np.arange(n_panels + 1) / n_panels) ** grading
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _sq_norm(diff: np.ndarray, sq_norm: Callable | None) -> np.ndarray:
    if sq_norm is not None:
        return np.asarray(sq_norm(diff))
    axes = tuple(range(1, diff.ndim))
    return np.sum(diff * diff, axis=axes) if axes else diff * diff


def _richardson(values: list[float]) -> float:
    """Aitken-type extrapolation of a sequence from successive doublings."""
    if len(values) < 3:
        return values[-1]
    v0, v1, v2 = values[-3:]
    d1, d2 = v1 - v0, v2 - v1
    if d1 == 0 or d2 == 0 or d2 / d1 <= 0 or d2 / d1 >= 1:
        return v2
    ratio = d2 / d1
    return v2 + d2 * ratio / (1.0 - ratio)


def d_functional(
    trajectory: Trajectory,
    order: float,
    t: float,
    spec: QuadratureSpec | None = None,
    sq_norm: Callable | None = None,
    alpha: float | None = None,
) -> float:
    r"""Evaluate

    .. math::

        D_\beta(t) = \frac{\|u(t) - u(0)\|^2}{2 t^\beta}
            + \frac{\beta}{2} \int_0^t \frac{\|u(t) - u(\tau)\|^2}{(t - \tau)^{\beta + 1}}
              \,\mathrm{d}\tau

    for ``0 < order < 2``. The mesh is graded toward ``tau = t`` with exponent
    ``2 / alpha`` unless ``spec.grading`` is set.
    """
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    if not 0 < order < 2:
        raise ValueError(f"order must lie in (0, 2), got {order}")
    spec = QuadratureSpec() if spec is None else spec
    alpha = order if alpha is None else alpha
    grading = spec.grading if spec.grading is not None else max(1.0, 2.0 / alpha)
    u_of = _as_callable(trajectory, t, spec)

    ends = u_of(np.array([0.0, t]))
    u0, ut = ends[0], ends[1]
    boundary = float(_sq_norm((ut - u0)[None], sq_norm)[0]) / (2.0 * t**order)

    estimates = []
    for level in range(spec.levels):
        s, w = _graded_rule(t, spec.nodes * 2**level, grading, spec.gauss_points)
        g = _sq_norm(ut[None] - u_of(t - s), sq_norm)
        estimates.append(float(np.sum(w * g * s ** (-order - 1.0))))

    return boundary + 0.5 * order * _richardson(estimates)


def d_alpha_quadrature(
    trajectory: Trajectory,
    alpha: float,
    t: float,
    spec: QuadratureSpec | None = None,
    sq_norm: Callable | None = None,
) -> float:
    """``D_alpha(t)`` for a trajectory given as a callable or as samples
    ``(times, values)`` (linearly interpolated)."""
    alpha = _as_alpha(alpha)
    return d_functional(trajectory, alpha, t, spec, sq_norm)


def caputo_quadrature(
    u_fn: Callable[[float], np.ndarray],
    alpha: float,
    t: float,
    spec: QuadratureSpec | None = None,
) -> np.ndarray:
    r"""Caputo derivative from the integrated-by-parts form

    .. math::

        \frac{1}{\Gamma(1 - \alpha)} \Big( \frac{u(t) - u(0)}{t^\alpha}
        + \alpha \int_0^t \frac{u(t) - u(\tau)}{(t - \tau)^{\alpha + 1}} \,\mathrm{d}\tau \Big).
    """
    alpha = _as_alpha(alpha)
    spec = QuadratureSpec() if spec is None else spec
    grading = spec.grading if spec.grading is not None else max(1.0, 2.0 / alpha)
    u_of = _as_callable(u_fn, t, spec)
    ends = u_of(np.array([0.0, t]))

    estimates = []
    for level in range(spec.levels):
        s, w = _graded_rule(t, spec.nodes * 2**level, grading, spec.gauss_points)
        kernel = w * s ** (-alpha - 1.0)
        estimates.append(np.tensordot(kernel, ends[1][None] - u_of(t - s), axes=1))

    if len(estimates) >= 3:
        integral = np.vectorize(lambda a, b, c: _richardson([a, b, c]))(*estimates[-3:])
    else:
        integral = estimates[-1]
    return ((ends[1] - ends[0]) / t**alpha + alpha * integral) / gamma(1.0 - alpha)


def lemma31_residual(
    u_fn: Callable[[float], np.ndarray],
    alpha: float,
    t: float,
    spec: QuadratureSpec | None = None,
    du_fn: Callable[[float], np.ndarray] | None = None,
    h: float | None = None,
) -> float:
    r"""Return ``|LHS - RHS|`` for the identity

    .. math::

        \Gamma(1 - \alpha) \langle \partial_t^\alpha u, \partial_t u \rangle
        = \frac{\mathrm{d}}{\mathrm{d}t} D_\alpha(t) + \alpha D_{\alpha + 1}(t).

    The Caputo derivative and both history functionals come from independent
    quadratures; ``d D_alpha / dt`` is a central difference with step *h*,
    which defaults to ``t / (4 * spec.nodes)`` so that refining the spec
    refines both approximations.
    """
    alpha = _as_alpha(alpha)
    spec = QuadratureSpec() if spec is None else spec
    h = t / (4.0 * spec.nodes) if h is None else h
    if du_fn is None:
        def du_fn(x: float) -> np.ndarray:
            return (np.asarray(u_fn(x + h)) - np.asarray(u_fn(x - h))) / (2 * h)

    caputo = caputo_quadrature(u_fn, alpha, t, spec)
    lhs = gamma(1.0 - alpha) * float(np.sum(caputo * np.asarray(du_fn(t), dtype=np.float64)))

    d_plus = d_functional(u_fn, alpha, t + h, spec, alpha=alpha)
    d_minus = d_functional(u_fn, alpha, t - h, spec, alpha=alpha)
    d_next = d_functional(u_fn, alpha + 1.0, t, spec, alpha=alpha)
    rhs = (d_plus - d_minus) / (2 * h) + alpha * d_next
    return abs(lhs - rhs)

# }}}


# {{{ discrete history energies

def l1_discrete_D(history: SolveHistory, w: L1Weights, n: int | None = None) -> float:
    r"""History energy of the L1 operator,

    .. math::

        D^n = \frac12 \sum_{k=1}^{n-1} (b_{n-k-1} - b_{n-k}) \|u^n - u^k\|^2
              + \frac12 b_{n-1} \|u^n - u^0\|^2,

    with ``D^0 = 0``.
    """
    if n is None:
        n = history.n
    if n > history.n:
        raise ValueError(f"history holds {len(history)} levels, cannot evaluate D^{n}")
    if n == 0:
        return 0.0
    if len(w) < n:
        raise ValueError(f"step {n} needs {n} weights, got {len(w)}")
    return 0.5 * float(np.dot(w.recast(n), history.pair_sq_norms(n)))


def _l2_D_from_norms(pair: np.ndarray, coeffs: L2Coefficients, dt: float, n: int) -> float:
    """Assemble ``D~^n`` from ``pair[k] = ||u^n - u^k||^2``, ``k < n``."""
    alpha = coeffs.alpha
    a, c, d = coeffs.a, coeffs.c, coeffs.d
    acc = 0.25 * alpha * pair[n - 1] - 0.5 * a[n] * pair[0]
    if n >= 2:
        j = np.arange(1, n)
        acc += 0.5 * float(np.dot(d[n - j] - d[n - j + 1], pair[1:n]))
        acc += 0.5 * c[n] * pair[1]
    return acc / (gamma(3.0 - alpha) * dt**alpha)


def l2_discrete_D(history: SolveHistory, coeffs: L2Coefficients, dt: float, n: int | None = None) -> float:
    r"""History energy of the L2 operator,

    .. math::

        \tilde D^n = \frac{1}{\Gamma(3-\alpha)\Delta t^\alpha} \Big[
            \frac\alpha4 \|u^n - u^{n-1}\|^2
            + \frac12 \sum_{j=1}^{n-1} (d_{n-j} - d_{n-j+1}) \|u^n - u^j\|^2
            + \frac{c_n}{2} \|u^n - u^1\|^2 - \frac{a_n}{2} \|u^n - u^0\|^2 \Big].

    The same expression is used at ``n = 1`` (where the sum is empty and the
    ``c_n`` term vanishes) so that the energy is defined from the first step.

    Raises :class:`NegativeHistoryEnergy` if the result is negative beyond
    roundoff.
    """
    if n is None:
        n = history.n
    if n < 1:
        raise ValueError(f"L2 history energy needs n >= 1, got {n}")
    if n > history.n or n > coeffs.n:
        raise ValueError(f"cannot evaluate D~^{n}: history has {len(history)} levels, "
                         f"coefficients cover j <= {coeffs.n}")
    pair = history.pair_sq_norms(n)
    value = _l2_D_from_norms(pair, coeffs, dt, n)
    if value < -1e-12 * max(1.0, float(np.max(pair)) / dt**coeffs.alpha):
        raise NegativeHistoryEnergy(
            f"D~^{n} = {value:.3e} < 0 (alpha={coeffs.alpha}, a_n={coeffs.a[n]:.6e}, "
            f"c_n={coeffs.c[n]:.6e}, d[:n+1]={coeffs.d[: n + 1]!r})")
    return value


def _record(t, u, grid, E, D_term, stab_term=0.0) -> EnergyRecord:
    return EnergyRecord(
        t=float(t),
        E=float(E),
        E_tilde=float(E + D_term + stab_term),
        D_term=float(D_term),
        stab_term=float(stab_term),
        max_abs_u=float(np.max(np.abs(u))),
        mean_u=float(np.mean(u)),
    )


def l1_modified_energy(
    history: SolveHistory,
    w: L1Weights,
    gamma_: float,
    eps: float,
    n: int | None,
    grid: Grid,
    potential=None,
) -> EnergyRecord:
    """``E(u^n) + D^n / gamma`` for the L1 Allen-Cahn scheme."""
    n = history.n if n is None else n
    u = history[n]
    E = gl_energy(u, grid, eps, potential)
    return _record(n * history.dt, u, grid, E, l1_discrete_D(history, w, n) / gamma_)


def l2_modified_energy(
    history: SolveHistory,
    coeffs: L2Coefficients,
    gamma_: float,
    eps: float,
    M: float,
    n: int | None,
    grid: Grid,
    potential=None,
) -> EnergyRecord:
    """``E(u^n) + D~^n / gamma + (3 M^2 - 1) / 2 ||u^n - u^{n-1}||^2``."""
    n = history.n if n is None else n
    u = history[n]
    E = gl_energy(u, grid, eps, potential)
    if n == 0:
        return _record(0.0, u, grid, E, 0.0)
    D = l2_discrete_D(history, coeffs, history.dt, n)
    stab = 0.5 * (3.0 * M * M - 1.0) * float(history.pair_sq_norms(n)[n - 1])
    return _record(n * history.dt, u, grid, E, D / gamma_, stab)


def hminus1_pair_sq_norms(
    history: SolveHistory,
    grid: Grid,
    n: int | None = None,
    spectra: np.ndarray | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """``||grad Psi^{n,k}||^2`` with ``-Laplace Psi^{n,k} = u^n - u^k`` for ``k < n``.

    *spectra* may hold precomputed ``rfft2`` coefficients of every level.
    Each difference must have negligible mean (see
    :func:`~tfphase.fields.inv_neg_laplacian_zero_mean`).
    """
    n = history.n if n is None else n
    if n == 0:
        return np.zeros(0)
    fields = history.fields
    diff = fields[n] - fields[:n]
    means = diff.mean(axis=(-2, -1))
    norms = np.sqrt(history.pair_sq_norms(n))
    bad = np.abs(means) > tol * norms
    if np.any(bad):
        k = int(np.argmax(bad))
        raise MeanTooLarge(f"mean(u^{n} - u^{k}) = {means[k]:.3e} exceeds {tol:.1e} * "
                           f"||u^{n} - u^{k}|| = {tol * norms[k]:.3e}")

    if spectra is None:
        diff_hat = np.fft.rfft2(diff)
    else:
        diff_hat = spectra[n][None] - spectra[:n]
    return grid.spectral_sq_sum(diff_hat, grid.inv_k_squared)


def ch_modified_energy(
    history: SolveHistory,
    w: L1Weights,
    gamma_: float,
    eps: float,
    n: int | None,
    grid: Grid,
    potential=None,
    spectra: np.ndarray | None = None,
) -> EnergyRecord:
    """L1 modified energy for Cahn-Hilliard: the L2 norms of the Allen-Cahn
    version are replaced by ``H^{-1}`` seminorms."""
    n = history.n if n is None else n
    u = history[n]
    E = gl_energy(u, grid, eps, potential)
    if n == 0:
        return _record(0.0, u, grid, E, 0.0)
    pair = hminus1_pair_sq_norms(history, grid, n, spectra)
    D = 0.5 * float(np.dot(w.recast(n), pair))
    return _record(n * history.dt, u, grid, E, D / gamma_)

# }}}
