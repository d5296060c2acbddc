"""Discrete Caputo operators on a uniform time mesh.

Two discretisations are provided:

* the L1 formula (piecewise-linear interpolation, order ``2 - alpha``), and
* the L2 formula (piecewise-quadratic interpolation, order ``3 - alpha``),
  in the ``delta u`` reformulation that the energy estimates are built on.

Fields can be arrays of any shape; the time index is always the leading axis
of a :class:`SolveHistory`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np
from scipy.special import gamma

__all__ = [
    "FractionalOrder",
    "L1Weights",
    "L2Coefficients",
    "SolveHistory",
    "caputo_exact_monomial",
    "l1_apply",
    "l1_apply_direct",
    "l1_weights",
    "l2_apply",
    "l2_apply_direct",
    "l2_coefficients",
]


def _validate_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha!r}")
    return alpha


@dataclass(frozen=True)
class FractionalOrder:
    """Order of the Caputo derivative, restricted to the open interval (0, 1)."""

    alpha: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", _validate_alpha(self.alpha))

    def __float__(self) -> float:
        return self.alpha


def _as_alpha(alpha: float | FractionalOrder) -> float:
    if isinstance(alpha, FractionalOrder):
        return alpha.alpha
    return _validate_alpha(alpha)


# {{{ L1

@dataclass(frozen=True)
class L1Weights:
    r"""Weights :math:`b_0, \dots, b_{n-1}` of the L1 formula.

    .. math::

        b_k = \frac{(k + 1)^{1 - \alpha} - k^{1 - \alpha}}
                   {\Gamma(2 - \alpha) \Delta t^\alpha}.
    """

    alpha: float
    dt: float
    b: np.ndarray

    def __len__(self) -> int:
        return self.b.size

    def recast(self, n: int) -> np.ndarray:
        r"""Coefficients :math:`w_k` such that the L1 derivative at step *n* is
        :math:`b_0 u^n - \sum_{k=0}^{n-1} w_k u^k`.

        ``w_0 = b_{n-1}`` and ``w_k = b_{n-k-1} - b_{n-k}`` for ``1 <= k < n``.
        All entries are positive.
        """
        if not 1 <= n <= len(self):
            raise ValueError(f"need 1 <= n <= {len(self)}, got {n}")
        b = self.b
        w = np.empty(n)
        w[0] = b[n - 1]
        if n > 1:
            # w_k = b_{n-k-1} - b_{n-k} for k = 1..n-1
            w[1:] = (b[: n - 1] - b[1:n])[::-1]
        return w


def _power_differences(p: float, k: np.ndarray) -> np.ndarray:
    """``(k + 1)**p - k**p`` without cancellation for large ``k``."""
    out = np.ones_like(k, dtype=np.float64)
    pos = k > 0
    kp = k[pos].astype(np.float64)
    out[pos] = kp**p * np.expm1(p * np.log1p(1.0 / kp))
    return out


@lru_cache(maxsize=64)
def _l1_weights_cached(alpha: float, dt: float, n: int) -> np.ndarray:
    k = np.arange(n)
    b = _power_differences(1.0 - alpha, k) / (gamma(2.0 - alpha) * dt**alpha)
    b.setflags(write=False)
    return b


def l1_weights(alpha: float | FractionalOrder, dt: float, n: int) -> L1Weights:
    """Build the first *n* L1 weights for a uniform step *dt*."""
    alpha = _as_alpha(alpha)
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt!r}")
    if n < 1:
        raise ValueError(f"need at least one weight, got n={n}")

    return L1Weights(alpha=alpha, dt=float(dt), b=_l1_weights_cached(alpha, float(dt), int(n)))


def l1_apply(history: SolveHistory | np.ndarray, w: L1Weights, n: int | None = None) -> np.ndarray:
    """Evaluate the L1 derivative at step *n* (default: the latest step).

    Uses the recast form ``b_0 u^n - sum_k w_k u^k`` with positive weights,
    which is a single contraction over the stored history.
    """
    fields = _fields_of(history)
    if n is None:
        n = fields.shape[0] - 1
    if n < 0 or n >= fields.shape[0]:
        raise ValueError(f"history holds {fields.shape[0]} fields, cannot evaluate step {n}")
    if n == 0:
        return np.zeros_like(fields[0])
    if len(w) < n:
        raise ValueError(f"step {n} needs {n} weights, got {len(w)}")

    return w.b[0] * fields[n] - np.tensordot(w.recast(n), fields[:n], axes=1)


def l1_apply_direct(history: SolveHistory | np.ndarray, w: L1Weights, n: int | None = None) -> np.ndarray:
    """Evaluate ``sum_{k=1}^n b_{n-k} (u^k - u^{k-1})`` term by term."""
    fields = _fields_of(history)
    if n is None:
        n = fields.shape[0] - 1
    if len(w) < n:
        raise ValueError(f"step {n} needs {n} weights, got {len(w)}")

    result = np.zeros_like(fields[0])
    for k in range(1, n + 1):
        result = result + w.b[n - k] * (fields[k] - fields[k - 1])
    return result

# }}}


# {{{ L2

@dataclass(frozen=True)
class L2Coefficients:
    r"""Coefficient families of the L2 formula, indexed from ``j = 1``.

    Arrays are stored with a dummy entry at index 0 so that ``a[j]`` matches
    the usual notation. ``d`` is the combination used by the reformulated
    operator (``d_1 = c_1 + 2 - 2 alpha``, ``d_j = c_j - a_{j-1}``), and
    ``r1 = 2 - alpha - d_1``.
    """

    alpha: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    r1: float

    @property
    def n(self) -> int:
        return self.a.size - 1

    def check(self) -> list[str]:
        """Return a list of violated coefficient inequalities (empty if none)."""
        a, b, c, d = self.a, self.b, self.c, self.d
        n = self.n
        problems = []

        scale = np.maximum(np.abs(a[1:]), 1.0)
        if np.any(np.abs(a[1:] + b[1:] + c[1:]) > 1e-12 * scale):
            problems.append("a_j + b_j + c_j != 0")
        if not self.r1 > 0:
            problems.append("r1 <= 0")
        if np.any(a[1:] >= 0):
            problems.append(f"a_j >= 0 at j={1 + int(np.argmax(a[1:] >= 0))}")
        if n >= 2:
            dc = c[1:n] - c[2:]
            dd = d[1:n] - d[2:]
            if np.any(dc < 0):
                problems.append("c_j not nonincreasing")
            if np.any(dd < dc):
                problems.append("d_{j-1} - d_j < c_{j-1} - c_j")
            if n >= 3 and np.any(dd[1:] > dd[:-1]):
                problems.append("d differences not nonincreasing")
        return problems


@lru_cache(maxsize=32)
def _l2_coefficients_cached(alpha: float, n: int) -> tuple[np.ndarray, ...]:
    with mpmath.workdps(40):
        al = mpmath.mpf(alpha)
        p1 = 1 - al
        p2 = 2 - al
        a = [mpmath.mpf(0)] * (n + 1)
        b = [mpmath.mpf(0)] * (n + 1)
        c = [mpmath.mpf(0)] * (n + 1)
        for j in range(1, n + 1):
            jm = mpmath.mpf(j)
            j1 = jm + 1
            q1, q0 = j1**p1, jm**p1
            s = j1**p2 - jm**p2
            a[j] = -mpmath.mpf(3) / 2 * p2 * q1 + p2 * q0 / 2 + s
            b[j] = 2 * p2 * q1 - 2 * s
            c[j] = -p2 * (q1 + q0) / 2 + s
        d = [mpmath.mpf(0)] * (n + 1)
        d[1] = c[1] + 2 - 2 * al
        for j in range(2, n + 1):
            d[j] = c[j] - a[j - 1]
        r1 = 2 + al / 2 - (al / 2 + 1) * mpmath.power(2, p1)

        arrays = tuple(np.array([float(x) for x in v]) for v in (a, b, c, d))
        for arr in arrays:
            arr.setflags(write=False)
        return (*arrays, float(r1))


def l2_coefficients(alpha: float | FractionalOrder, n: int) -> L2Coefficients:
    """Coefficients ``a_j, b_j, c_j, d_j`` for ``1 <= j <= n``.

    Evaluated in 40-digit arithmetic before rounding, since the closed forms
    subtract nearly equal powers for large ``j``.
    """
    alpha = _as_alpha(alpha)
    if n < 2:
        raise ValueError(f"L2 coefficients need n >= 2, got {n}")

    a, b, c, d, r1 = _l2_coefficients_cached(alpha, int(n))
    return L2Coefficients(alpha=alpha, a=a, b=b, c=c, d=d, r1=r1)


def _l2_scale(alpha: float, dt: float) -> float:
    return 1.0 / (gamma(3.0 - alpha) * dt**alpha)


def l2_apply(
    history: SolveHistory | np.ndarray,
    coeffs: L2Coefficients,
    dt: float,
    n: int | None = None,
) -> np.ndarray:
    r"""Evaluate the L2 derivative at step *n* in the increment form

    .. math::

        L_n^\alpha u = \frac{1}{\Gamma(3 - \alpha) \Delta t^\alpha} \Big(
            \tfrac{3\alpha}{2} \delta u^n - \tfrac{\alpha}{2} \delta u^{n-1}
            + \sum_{j=1}^n d_j \delta u^{n-j+1} - c_n \delta u^1 \Big),

    and ``(r_1 + d_1) delta u^1`` (times the same scale) for ``n = 1``.
    """
    fields = _fields_of(history)
    if n is None:
        n = fields.shape[0] - 1
    if n < 1 or n >= fields.shape[0]:
        raise ValueError(f"history holds {fields.shape[0]} fields, cannot evaluate step {n}")
    if n > coeffs.n:
        raise ValueError(f"coefficients only cover j <= {coeffs.n}, need {n}")

    alpha = coeffs.alpha
    scale = _l2_scale(alpha, dt)
    du = np.diff(fields[: n + 1], axis=0)  # du[j - 1] = u^j - u^{j-1}
    if n == 1:
        return scale * (coeffs.r1 + coeffs.d[1]) * du[0]

    # sum_{j=1}^n d_j du^{n-j+1} = sum_{i=1}^n d_{n-i+1} du^i
    acc = np.tensordot(coeffs.d[n:0:-1], du, axes=1)
    acc = acc + 1.5 * alpha * du[n - 1] - 0.5 * alpha * du[n - 2] - coeffs.c[n] * du[0]
    return scale * acc


def l2_apply_direct(
    history: SolveHistory | np.ndarray,
    coeffs: L2Coefficients,
    dt: float,
    n: int | None = None,
) -> np.ndarray:
    """Evaluate the L2 derivative from the original three-point form.

    Independent of :func:`l2_apply`; used to cross-check the reformulation.
    """
    fields = _fields_of(history)
    if n is None:
        n = fields.shape[0] - 1
    alpha = coeffs.alpha
    if n == 1:
        return (fields[1] - fields[0]) / (gamma(2.0 - alpha) * dt**alpha)

    a, b, c = coeffs.a, coeffs.b, coeffs.c
    acc = 0.5 * alpha * fields[n - 2] - 2.0 * fields[n - 1] + 0.5 * (4.0 - alpha) * fields[n]
    for j in range(1, n):
        acc = acc + a[j] * fields[n - j - 1] + b[j] * fields[n - j] + c[j] * fields[n - j + 1]
    return _l2_scale(alpha, dt) * acc

# }}}


def caputo_exact_monomial(alpha: float | FractionalOrder, m: int, t: float) -> float:
    """Exact Caputo derivative of ``t**m``: ``m! / Gamma(m + 1 - alpha) * t**(m - alpha)``."""
    alpha = _as_alpha(alpha)
    if m < 1:
        raise ValueError(f"monomial degree must be >= 1, got {m}")
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return float(gamma(m + 1.0) / gamma(m + 1.0 - alpha) * t ** (m - alpha))


# {{{ history

def _sq_norm_default(diff: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, diff.ndim))
    return np.sum(diff * diff, axis=axes) if axes else diff * diff


@dataclass
class SolveHistory:
    """All computed time levels ``u^0, ..., u^n`` on a uniform mesh.

    Fields are kept in one contiguous buffer that grows geometrically.
    ``sq_norms`` maps a stack of differences to their squared norms; it
    defaults to a plain sum of squares and is replaced by a quadrature-weighted
    version for fields on a grid.
    """

    u0: np.ndarray
    dt: float
    sq_norms: Callable[[np.ndarray], np.ndarray] = _sq_norm_default
    capacity: int = 16

    _buffer: np.ndarray = field(init=False, repr=False)
    _size: int = field(init=False, repr=False)
    _pair_cache: tuple[int, np.ndarray] | None = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt!r}")
        u0 = np.asarray(self.u0, dtype=np.float64)
        self._buffer = np.empty((max(self.capacity, 1), *u0.shape))
        self._buffer[0] = u0
        self._size = 1
        self.u0 = self._buffer[0]

    @classmethod
    def from_sequence(cls, fields, dt: float = 1.0, **kwargs) -> SolveHistory:
        fields = [np.asarray(f, dtype=np.float64) for f in fields]
        hist = cls(fields[0], dt, capacity=len(fields), **kwargs)
        for f in fields[1:]:
            hist.append(f)
        return hist

    def __len__(self) -> int:
        return self._size

    def __getitem__(self, k: int) -> np.ndarray:
        if k < 0:
            k += self._size
        if not 0 <= k < self._size:
            raise IndexError(k)
        return self._buffer[k]

    @property
    def n(self) -> int:
        """Index of the latest stored level."""
        return self._size - 1

    @property
    def shape(self) -> tuple[int, ...]:
        return self._buffer.shape[1:]

    @property
    def fields(self) -> np.ndarray:
        """Read-only view of shape ``(n + 1, *field_shape)``."""
        view = self._buffer[: self._size]
        view.flags.writeable = False
        return view

    def append(self, u: np.ndarray) -> None:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.shape:
            raise ValueError(f"field shape {u.shape} does not match history shape {self.shape}")
        if self._size == self._buffer.shape[0]:
            grown = np.empty((2 * self._buffer.shape[0], *self.shape))
            grown[: self._size] = self._buffer[: self._size]
            self._buffer = grown
            self.u0 = self._buffer[0]
        self._buffer[self._size] = u
        self._size += 1

    def pair_sq_norms(self, n: int | None = None) -> np.ndarray:
        """Squared norms ``||u^n - u^k||^2`` for ``k = 0, ..., n - 1``.

        The result for the most recent request is cached.
        """
        if n is None:
            n = self.n
        if self._pair_cache is not None and self._pair_cache[0] == n:
            return self._pair_cache[1]
        fields = self._buffer[: n + 1]
        result = np.asarray(self.sq_norms(fields[n] - fields[:n]), dtype=np.float64)
        self._pair_cache = (n, result)
        return result


def _fields_of(history: SolveHistory | np.ndarray) -> np.ndarray:
    if isinstance(history, SolveHistory):
        return history.fields
    return np.asarray(history, dtype=np.float64)

# }}}
