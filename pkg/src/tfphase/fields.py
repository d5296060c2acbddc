"""Uniform periodic grids and Fourier pseudo-spectral operators.

Fields are plain ``numpy`` arrays of shape ``(ny, nx)``: rows run along ``y``
and columns along ``x``, so the row-major layout has ``x`` varying fastest.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from os import PathLike

import numpy as np

__all__ = [
    "Grid",
    "MeanTooLarge",
    "SNAPSHOT_MAGIC",
    "hminus1_seminorm",
    "inv_neg_laplacian_zero_mean",
    "l2_inner",
    "l2_norm",
    "laplacian",
    "read_snapshot",
    "write_snapshot",
]

SNAPSHOT_MAGIC = b"TFP1"
STENCILS = ("spectral", "fd2")
_HEADER = struct.Struct("<4sIII")


class MeanTooLarge(ValueError):
    """Raised when an inverse Laplacian is requested for a field whose mean
    is not negligible, which usually means mass conservation was lost."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on the periodic box ``[x0, x0 + Lx) x [y0, y0 + Ly)``.

    ``stencil`` selects the Laplacian symbol used by every operator on the
    grid: ``"spectral"`` multiplies Fourier coefficients by ``-|k|^2``;
    ``"fd2"`` uses the symbol of the five-point central difference, which is
    still diagonal in Fourier space but yields M-matrix implicit operators.
    """

    nx: int
    ny: int
    Lx: float = 2.0 * np.pi
    Ly: float = 2.0 * np.pi
    x0: float = 0.0
    y0: float = 0.0
    stencil: str = "spectral"

    def __post_init__(self) -> None:
        if self.stencil not in STENCILS:
            raise ValueError(f"stencil must be one of {STENCILS}, got {self.stencil!r}")
        for name in ("nx", "ny"):
            value = getattr(self, name)
            if value < 4 or value % 2:
                raise ValueError(f"{name} must be even and >= 4, got {value}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError(f"domain lengths must be positive, got {self.Lx}, {self.Ly}")

    @classmethod
    def square(cls, n: int, length: float = 2.0 * np.pi, origin: float = 0.0,
               stencil: str = "spectral") -> Grid:
        return cls(n, n, length, length, origin, origin, stencil)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays ``(x, y)`` with shape :attr:`shape`."""
        x = self.x0 + self.dx * np.arange(self.nx)
        y = self.y0 + self.dy * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="xy")

    @cached_property
    def k_squared(self) -> np.ndarray:
        """Symbol of ``-Laplace`` on the half spectrum used by :func:`numpy.fft.rfft2`.

        ``|k|^2`` for the spectral stencil, ``4 sin^2(k h / 2) / h^2`` summed
        over both directions for ``fd2``.
        """
        kx = 2.0 * np.pi * np.fft.rfftfreq(self.nx, d=self.dx)
        ky = 2.0 * np.pi * np.fft.fftfreq(self.ny, d=self.dy)
        if self.stencil == "fd2":
            kx = 2.0 / self.dx * np.sin(0.5 * kx * self.dx)
            ky = 2.0 / self.dy * np.sin(0.5 * ky * self.dy)
        return ky[:, None] ** 2 + kx[None, :] ** 2

    @cached_property
    def rfft_multiplicity(self) -> np.ndarray:
        """How often each half-spectrum coefficient appears in the full spectrum."""
        m = np.full((self.ny, self.nx // 2 + 1), 2.0)
        m[:, 0] = 1.0
        m[:, -1] = 1.0
        return m

    @cached_property
    def inv_k_squared(self) -> np.ndarray:
        """``1 / |k|^2`` with the zero mode set to zero."""
        k2 = self.k_squared.copy()
        k2[0, 0] = 1.0
        out = 1.0 / k2
        out[0, 0] = 0.0
        return out

    @property
    def k_min(self) -> float:
        """Square root of the smallest nonzero symbol value."""
        k2 = self.k_squared.ravel()
        return float(np.sqrt(np.min(k2[1:])))

    def fft(self, u: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(u)

    def ifft(self, u_hat: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(u_hat, s=self.shape)

    def spectral_sq_sum(self, u_hat: np.ndarray, weight: np.ndarray | None = None) -> np.ndarray:
        """Quadrature of ``|u|^2`` from half-spectrum coefficients (Parseval).

        Works on stacks: the last two axes are the spectral axes.
        """
        w = self.rfft_multiplicity if weight is None else self.rfft_multiplicity * weight
        power = u_hat.real**2 + u_hat.imag**2
        return np.sum(power * w, axis=(-2, -1)) * self.cell_area / (self.nx * self.ny)

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.shape:
            raise ValueError(f"field shape {u.shape} does not match grid shape {self.shape}")
        return u


def laplacian(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Laplacian in Fourier space: multiply coefficients by ``-grid.k_squared``."""
    u = grid.check(u)
    return grid.ifft(-grid.k_squared * grid.fft(u))


def l2_inner(u: np.ndarray, v: np.ndarray, grid: Grid) -> float:
    """Uniform-grid quadrature of ``u * v`` over the periodic box."""
    u = grid.check(u)
    v = grid.check(v)
    return float(np.sum(u * v) * grid.cell_area)


def l2_norm(u: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(l2_inner(u, u, grid)))


def _check_mean(v: np.ndarray, grid: Grid, tol: float) -> float:
    mean = float(np.mean(v))
    peak = float(np.max(np.abs(v)))
    if peak == 0.0:
        return mean
    # compare on the scale of the peak so tiny fields do not underflow
    norm = l2_norm(v / peak, grid) * peak
    if abs(mean / peak) > tol * (norm / peak):
        raise MeanTooLarge(f"|mean| = {abs(mean):.3e} exceeds {tol:.1e} * ||v|| = {tol * norm:.3e}")
    return mean


def inv_neg_laplacian_zero_mean(v: np.ndarray, grid: Grid, tol: float = 1e-10) -> np.ndarray:
    """Solve ``-Laplace(psi) = v - mean(v)`` for the zero-mean ``psi``.

    Raises :class:`MeanTooLarge` if ``|mean(v)| > tol * ||v||``; a smaller
    mean is treated as roundoff and removed.
    """
    v = grid.check(v)
    _check_mean(v, grid, tol)
    return grid.ifft(grid.inv_k_squared * grid.fft(v))


def hminus1_seminorm(v: np.ndarray, grid: Grid, tol: float = 1e-10) -> float:
    """``||grad psi||`` where ``-Laplace(psi) = v`` (zero-mean ``v``)."""
    v = grid.check(v)
    _check_mean(v, grid, tol)
    return float(np.sqrt(grid.spectral_sq_sum(grid.fft(v), grid.inv_k_squared)))


# {{{ snapshot format

def write_snapshot(u: np.ndarray, path: str | PathLike) -> None:
    """Write ``u`` as a TFP1 snapshot: 16-byte little-endian header
    (magic, nx, ny, reserved) followed by ``nx * ny`` float64 values, row-major."""
    u = np.ascontiguousarray(u, dtype="<f8")
    if u.ndim != 2:
        raise ValueError(f"snapshots hold 2-D fields, got shape {u.shape}")
    ny, nx = u.shape
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(SNAPSHOT_MAGIC, nx, ny, 0))
            fh.write(u.tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path: str | PathLike) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read snapshot {path}: {exc}") from exc

    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, nx, ny, _ = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * nx * ny
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(ny, nx).astype(np.float64)

# }}}
