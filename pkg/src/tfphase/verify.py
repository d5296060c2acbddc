"""Randomised and refinement checks of the energy inequalities.

These back the ``tfphase verify`` command and the acceptance tests.  Each
check returns a small result object instead of asserting, so callers decide
how to report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma

from tfphase.energy import QuadratureSpec, l1_discrete_D, l2_discrete_D, lemma31_residual
from tfphase.fracops import SolveHistory, l1_apply, l1_weights, l2_apply, l2_coefficients

__all__ = [
    "FuzzResult",
    "RefinementResult",
    "fuzz_lemma41",
    "fuzz_lemma43",
    "lemma31_study",
    "random_history",
]

REL_SLACK = 1e-12


@dataclass
class FuzzResult:
    name: str
    alpha: float
    cases: int
    violations: int = 0
    worst: float = float("inf")  # smallest (lhs - rhs) / scale seen
    examples: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def __str__(self) -> str:
        return (f"{self.name} alpha={self.alpha:g}: {self.cases} cases, {self.violations} violations, "
                f"worst relative slack {self.worst:.3e}")


def random_history(rng: np.random.Generator, n: int) -> np.ndarray:
    """Scalar history ``u^0..u^n`` drawn from a mix of shapes: white noise,
    random walks, smooth ramps with jitter and piecewise-constant plateaus."""
    kind = rng.integers(4)
    scale = 10.0 ** rng.uniform(-3, 2)
    if kind == 0:
        u = rng.standard_normal(n + 1)
    elif kind == 1:
        u = np.cumsum(rng.standard_normal(n + 1))
    elif kind == 2:
        t = np.linspace(0, 1, n + 1)
        u = rng.standard_normal() * t ** rng.uniform(0.2, 3) + 1e-2 * rng.standard_normal(n + 1)
    else:
        u = np.repeat(rng.standard_normal(n + 1)[: max(1, n // 3 + 1)], 3)[: n + 1]
        if u.size < n + 1:
            u = np.concatenate([u, np.full(n + 1 - u.size, u[-1])])
    return scale * u


def _note(result: FuzzResult, lhs: float, rhs: float, scale: float, desc: str) -> None:
    gap = (lhs - rhs) / scale
    result.worst = min(result.worst, gap)
    if gap < -REL_SLACK:
        result.violations += 1
        if len(result.examples) < 5:
            result.examples.append(desc)


def fuzz_lemma41(alpha: float, cases: int = 10_000, n_max: int = 20, seed: int = 0) -> FuzzResult:
    r"""Check ``<dbar^alpha u^n, u^n - u^{n-1}> >= D^n - D^{n-1}`` on random
    scalar histories with ``1 <= n <= n_max``."""
    rng = np.random.default_rng(seed)
    result = FuzzResult("L1 history inequality", alpha, cases)
    for _ in range(cases):
        n = int(rng.integers(1, n_max + 1))
        dt = 10.0 ** rng.uniform(-3, 0)
        hist = SolveHistory.from_sequence(random_history(rng, n), dt)
        w = l1_weights(alpha, dt, n)
        lhs = float(l1_apply(hist, w, n) * (hist[n] - hist[n - 1]))
        rhs = l1_discrete_D(hist, w, n) - l1_discrete_D(hist, w, n - 1)
        scale = w.b[0] * max(float(np.max(hist.fields**2)), 1e-300)
        _note(result, lhs, rhs, scale, f"n={n}, dt={dt:.3g}, u={hist.fields.tolist()}")
    return result


def fuzz_lemma43(alpha: float, cases: int = 10_000, n_max: int = 20, seed: int = 0) -> FuzzResult:
    r"""Check ``<L_n^alpha u, du^n> >= D~^n - D~^{n-1} + alpha/(Gamma(3-alpha) dt^alpha) |du^n|^2``
    on random scalar histories with ``2 <= n <= n_max``."""
    rng = np.random.default_rng(seed)
    result = FuzzResult("L2 history inequality", alpha, cases)
    coeffs = l2_coefficients(alpha, n_max)
    for _ in range(cases):
        n = int(rng.integers(2, n_max + 1))
        dt = 10.0 ** rng.uniform(-3, 0)
        hist = SolveHistory.from_sequence(random_history(rng, n), dt)
        scale0 = 1.0 / (gamma(3.0 - alpha) * dt**alpha)
        du = hist[n] - hist[n - 1]
        lhs = float(l2_apply(hist, coeffs, dt, n) * du)
        rhs = (l2_discrete_D(hist, coeffs, dt, n) - l2_discrete_D(hist, coeffs, dt, n - 1)
               + alpha * scale0 * du * du)
        scale = scale0 * max(float(np.max(hist.fields**2)), 1e-300)
        _note(result, lhs, rhs, scale, f"n={n}, dt={dt:.3g}, u={hist.fields.tolist()}")
    return result


@dataclass
class RefinementResult:
    label: str
    nodes: list[int]
    residuals: list[float]

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.residuals, self.residuals[1:]))

    @property
    def final(self) -> float:
        return self.residuals[-1]

    @property
    def observed_orders(self) -> list[float]:
        r = np.asarray(self.residuals)
        return list(np.log2(r[:-1] / r[1:]))

    def __str__(self) -> str:
        pairs = ", ".join(f"{n}:{r:.2e}" for n, r in zip(self.nodes, self.residuals))
        return f"{self.label}: {pairs}"


def lemma31_study(
    u_fn: Callable[[float], np.ndarray],
    alpha: float,
    t: float,
    nodes: Sequence[int] = (16, 32, 64, 128),
    label: str = "",
) -> RefinementResult:
    """Residual of the continuous history identity for a sequence of quadrature sizes."""
    residuals = [lemma31_residual(u_fn, alpha, t, QuadratureSpec(nodes=n)) for n in nodes]
    return RefinementResult(label or f"alpha={alpha:g}, t={t:g}", list(nodes), residuals)
