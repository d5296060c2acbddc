"""Two-parameter Mittag-Leffler function on the real axis.

``E_{a,b}(z) = sum_k z^k / Gamma(a k + b)`` is evaluated by one of two
routes, whichever has the smaller error estimate:

* the power series, summed in extended precision (``mpmath``) with enough
  digits to absorb the cancellation between its alternating terms, or
* the algebraic asymptotic expansion for large negative arguments,
  ``E_{a,b}(-x) ~ -sum_{k>=1} (-x)^{-k} / Gamma(b - a k)``, truncated at its
  smallest term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import mpmath
import numpy as np
from scipy.special import gammaln, gammasgn, rgamma

__all__ = [
    "ConvergenceFailure",
    "MLQuery",
    "linear_reference",
    "ml",
    "ml_derivative_check",
    "mittag_leffler",
]

MAX_SERIES_TERMS = 50_000
MAX_SERIES_DIGITS = 400


class ConvergenceFailure(ArithmeticError):
    """Neither the series nor the asymptotic expansion reaches the tolerance."""


@dataclass(frozen=True)
class MLQuery:
    alpha: float
    beta: float
    z: float
    tol: float = 1e-14

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.tol >= 1e-14:
            raise ValueError(f"tolerance below 1e-14 is not supported, got {self.tol}")


# {{{ asymptotic expansion

def _asymptotic(alpha: float, beta: float, xi: float, max_terms: int = 2000) -> tuple[float, float]:
    """Return ``(value, error_estimate)`` for ``E_{alpha,beta}(-xi)``.

    The truncation point minimises the envelope
    ``xi^{-k} Gamma(1 - beta + alpha k) / pi`` which bounds the terms through
    the reflection formula; individual terms can be deceptively small near
    poles of ``Gamma(beta - alpha k)``.
    """
    if not xi > 0 or alpha >= 2:
        return math.nan, math.inf

    k = np.arange(1, max_terms + 1)
    shifted = 1.0 - beta + alpha * k
    log_env = np.where(shifted > 0, gammaln(np.maximum(shifted, 1e-300)), 0.0) - k * math.log(xi) - math.log(math.pi)
    small = np.nonzero(log_env < math.log(1e-20))[0]
    n_keep = int(small[0]) if small.size else int(np.argmin(log_env))  # terms k = 1..n_keep are summed
    if log_env[n_keep] > 0:
        return math.nan, math.inf  # xi too small for the expansion to be useful
    err = math.exp(log_env[n_keep])

    kk = k[:n_keep]
    x = beta - alpha * kk
    pole = (x <= 0) & (x == np.round(x))
    xs = np.where(pole, 0.5, x)
    # 1 / Gamma(x) in log form to avoid overflow against xi^{-k}
    terms = -((-1.0) ** kk) * gammasgn(xs) * np.exp(-gammaln(xs) - kk * math.log(xi))
    terms[pole] = 0.0
    total = math.fsum(terms.tolist())

    # exponentially small contributions are not captured by the algebraic
    # series; for alpha >= 1 they only become negligible far out
    if alpha >= 1:
        rho = xi ** (1.0 / alpha)
        exp_mag = (2.0 / alpha) * rho ** (1.0 - beta) * math.exp(rho * math.cos(math.pi / alpha))
        err = max(err, exp_mag)
    return total, err

# }}}


# {{{ power series

def _series_plan(alpha: float, beta: float, x: float, tol: float) -> tuple[int, float] | None:
    """Number of terms and log10 of the largest term, or None if infeasible."""
    if x == 0:
        return 1, 0.0
    log10_x = math.log10(abs(x))
    k = np.arange(0, MAX_SERIES_TERMS + 1)
    arg = alpha * k + beta
    # |1/Gamma| is bounded by 1 near the poles for the arguments we see
    log10_mag = k * log10_x - np.where(arg > 0, gammaln(np.maximum(arg, 1e-300)), 0.0) / math.log(10)
    peak = int(np.argmax(log10_mag))
    target = math.log10(tol) - 3.0
    after = np.nonzero(log10_mag[peak:] < target)[0]
    if after.size == 0:
        return None
    return peak + int(after[0]) + 1, float(log10_mag[peak])


def _series(alpha: float, beta: float, x: float, n_terms: int, log10_peak: float) -> float:
    if log10_peak <= 0 and x >= 0:
        terms = [x**k * float(rgamma(alpha * k + beta)) for k in range(n_terms)]
        return math.fsum(terms)

    digits = int(max(log10_peak, 0.0)) + 25
    with mpmath.workdps(digits):
        z = mpmath.mpf(x)
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        for k in range(n_terms):
            total += power * mpmath.rgamma(a * k + b)
            power *= z
        return float(total)

# }}}


def mittag_leffler(z, alpha: float, beta: float = 1.0, tol: float = 1e-14):
    """Evaluate ``E_{alpha,beta}(z)`` for real ``z`` (scalar or array).

    Raises :class:`ConvergenceFailure` if no route meets *tol*.
    """
    if np.ndim(z):
        flat = [mittag_leffler(float(v), alpha, beta, tol) for v in np.ravel(z)]
        return np.array(flat).reshape(np.shape(z))

    x = float(z)
    MLQuery(alpha, beta, x, tol)
    if x == 0.0:
        return float(rgamma(beta))

    if x < 0:
        value, err = _asymptotic(alpha, beta, -x)
        if err <= tol * max(1.0, abs(value)):
            return value

    plan = _series_plan(alpha, beta, x, tol)
    if plan is None or plan[0] > MAX_SERIES_TERMS or plan[1] > MAX_SERIES_DIGITS:
        raise ConvergenceFailure(
            f"E_{{{alpha},{beta}}}({x}): series needs more than {MAX_SERIES_TERMS} terms "
            f"or {MAX_SERIES_DIGITS} digits and the asymptotic expansion does not reach {tol}")
    return _series(alpha, beta, x, *plan)


def ml(q: MLQuery) -> float:
    return mittag_leffler(q.z, q.alpha, q.beta, q.tol)


class DerivativeCheck(NamedTuple):
    """Finite-difference and closed-form values of two derivative identities."""

    fd_relaxation: float
    closed_relaxation: float
    fd_kernel: float
    closed_kernel: float


def ml_derivative_check(alpha: float, lam: float, t: float, h: float) -> DerivativeCheck:
    r"""Central differences against the closed forms

    .. math::

        \frac{d}{dt} E_{\alpha,1}(-\lambda t^\alpha)
            = -\lambda t^{\alpha-1} E_{\alpha,\alpha}(-\lambda t^\alpha),
        \qquad
        \frac{d}{dt} \big(t^{\alpha-1} E_{\alpha,\alpha}(-\lambda t^\alpha)\big)
            = t^{\alpha-2} E_{\alpha,\alpha-1}(-\lambda t^\alpha).
    """
    if not (t > 0 and 0 < h < t):
        raise ValueError(f"need 0 < h < t, got t={t}, h={h}")

    def relax(s):
        return mittag_leffler(-lam * s**alpha, alpha, 1.0)

    def kernel(s):
        return s ** (alpha - 1.0) * mittag_leffler(-lam * s**alpha, alpha, alpha)

    arg = -lam * t**alpha
    return DerivativeCheck(
        fd_relaxation=(relax(t + h) - relax(t - h)) / (2 * h),
        closed_relaxation=-lam * t ** (alpha - 1.0) * mittag_leffler(arg, alpha, alpha),
        fd_kernel=(kernel(t + h) - kernel(t - h)) / (2 * h),
        closed_kernel=t ** (alpha - 2.0) * mittag_leffler(arg, alpha, alpha - 1.0),
    )


def linear_reference(
    alpha: float,
    modes: Sequence[tuple[float, complex]],
    gamma: float,
    eps2: float,
    t: float,
) -> list[complex]:
    """Exact modal solution of ``d^alpha_t u = gamma eps2 Laplace u``.

    Each entry of *modes* is ``(|k|^2, coefficient at t = 0)``; the returned
    coefficients are ``c_k E_{alpha,1}(-gamma eps2 |k|^2 t^alpha)``.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    out = []
    for lam, coeff in modes:
        factor = mittag_leffler(-gamma * eps2 * lam * t**alpha, alpha, 1.0) if t > 0 else 1.0
        out.append(coeff * factor)
    return out
