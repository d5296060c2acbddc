"""Double-well potential and its quadratic truncation outside ``[-M, M]``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DoubleWell", "TruncatedDoubleWell", "truncated_F", "truncated_f"]


@dataclass(frozen=True)
class DoubleWell:
    """``F(u) = (u^2 - 1)^2 / 4`` with ``f = F' = u^3 - u``."""

    def F(self, u):
        u2m1 = np.square(u) - 1.0
        return 0.25 * u2m1 * u2m1

    def f(self, u):
        return u * u * u - u

    @property
    def lipschitz(self) -> float:
        """Bound on ``|F''|`` over ``[-1, 1]``."""
        return 2.0


@dataclass(frozen=True)
class TruncatedDoubleWell:
    """Double well continued by quadratics beyond ``|u| = M``, so that
    ``|F''| <= 3 M^2 - 1`` on the whole real line."""

    M: float = 1.0

    def __post_init__(self) -> None:
        if not self.M >= 1.0:
            raise ValueError(f"truncation level M must be >= 1, got {self.M}")

    @property
    def lipschitz(self) -> float:
        return 3.0 * self.M**2 - 1.0

    def F(self, u):
        M = self.M
        L = self.lipschitz
        c1 = M**3 - M
        c0 = 0.25 * (M * M - 1.0) ** 2
        u = np.asarray(u, dtype=np.float64)
        inner = 0.25 * (u * u - 1.0) ** 2
        up = 0.5 * L * (u - M) ** 2 + c1 * (u - M) + c0
        lo = 0.5 * L * (u + M) ** 2 - c1 * (u + M) + c0
        out = np.where(u > M, up, np.where(u < -M, lo, inner))
        return out if out.ndim else float(out)

    def f(self, u):
        M = self.M
        L = self.lipschitz
        c1 = M**3 - M
        u = np.asarray(u, dtype=np.float64)
        inner = u * u * u - u
        up = L * (u - M) + c1
        lo = L * (u + M) - c1
        out = np.where(u > M, up, np.where(u < -M, lo, inner))
        return out if out.ndim else float(out)


def truncated_F(u, M: float = 1.0):
    return TruncatedDoubleWell(M).F(u)


def truncated_f(u, M: float = 1.0):
    return TruncatedDoubleWell(M).f(u)
