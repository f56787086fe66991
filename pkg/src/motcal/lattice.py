"""Uniform space-time lattice on [0, 1] x [x_lo, x_hi] and its difference operators.

Fields are plain ``numpy`` arrays of shape ``(nt, nx)``; row ``j`` holds time
``t_j`` and column ``i`` holds space ``x_i``.  Every operator here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import trapezoid

from .exceptions import InvalidDimensionsError, ValidationError

__all__ = [
    "Lattice",
    "make_lattice",
    "d_t",
    "d_xx",
    "grad_txx",
    "integrate",
    "integrate_x",
]


@dataclass(frozen=True)
class Lattice:
    """Node-centred grid with ``nt`` time nodes and ``nx`` space nodes (endpoints included)."""

    nt: int
    nx: int
    x_lo: float = 0.0
    x_hi: float = 1.0

    def __post_init__(self):
        if int(self.nt) != self.nt or int(self.nx) != self.nx:
            raise InvalidDimensionsError("nt and nx must be integers")
        if self.nt < 3:
            raise InvalidDimensionsError(f"nt must be >= 3, got {self.nt}")
        if self.nx < 5:
            raise InvalidDimensionsError(f"nx must be >= 5, got {self.nx}")
        if not (np.isfinite(self.x_lo) and np.isfinite(self.x_hi)) or not self.x_lo < self.x_hi:
            raise InvalidDimensionsError(
                f"need finite x_lo < x_hi, got [{self.x_lo}, {self.x_hi}]"
            )
        object.__setattr__(self, "nt", int(self.nt))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "x_lo", float(self.x_lo))
        object.__setattr__(self, "x_hi", float(self.x_hi))

    @property
    def dt(self) -> float:
        return 1.0 / (self.nt - 1)

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / (self.nx - 1)

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nt, self.nx)

    @cached_property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nt)

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(T, X)`` coordinate arrays of shape ``(nt, nx)``."""
        return np.meshgrid(self.t, self.x, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check_field(self, values, name: str = "field") -> np.ndarray:
        """Return ``values`` as a float array after checking shape and finiteness."""
        arr = np.asarray(values, dtype=float)
        if arr.shape != self.shape:
            raise ValidationError(f"{name} has shape {arr.shape}, lattice expects {self.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} contains non-finite values")
        return arr

    def check_row(self, values, name: str = "row") -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.nx,):
            raise ValidationError(f"{name} has shape {arr.shape}, lattice expects ({self.nx},)")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{name} contains non-finite values")
        return arr


def make_lattice(nt: int, nx: int, x_lo: float = 0.0, x_hi: float = 1.0) -> Lattice:
    return Lattice(nt, nx, x_lo, x_hi)


def d_t(lattice: Lattice, f: np.ndarray) -> np.ndarray:
    """Time derivative: central in the interior, second-order one-sided at t=0 and t=1."""
    f = np.asarray(f, dtype=float)
    h = lattice.dt
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def d_xx(lattice: Lattice, f: np.ndarray) -> np.ndarray:
    """Three-point second difference in x; both boundary columns are set to zero."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / lattice.dx**2
    return out


def grad_txx(lattice: Lattice, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return d_t(lattice, phi), d_xx(lattice, phi)


def integrate(lattice: Lattice, f: np.ndarray) -> float:
    """Trapezoidal integral of a field over [0, 1] x [x_lo, x_hi]."""
    inner = trapezoid(np.asarray(f, dtype=float), dx=lattice.dx, axis=1)
    return float(trapezoid(inner, dx=lattice.dt))


def integrate_x(lattice: Lattice, row: np.ndarray) -> float:
    """Trapezoidal integral of one spatial row."""
    row = np.asarray(row, dtype=float)
    if row.shape[-1] != lattice.nx:
        raise ValidationError(f"row length {row.shape[-1]} != nx={lattice.nx}")
    return float(trapezoid(row, dx=lattice.dx))
