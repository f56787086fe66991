"""Marginal densities: Gaussian samples, Breeden-Litzenberger recovery, convex order."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .exceptions import (
    ConvexOrderError,
    DegenerateDensityError,
    InsufficientStrikesError,
    ValidationError,
    ZeroMassError,
)
from .lattice import Lattice, integrate_x

logger = logging.getLogger(__name__)

__all__ = [
    "DensityPair",
    "ConvexOrderVerdict",
    "gaussian_density",
    "density_from_calls",
    "call_prices",
    "check_convex_order",
    "normalize",
    "mean",
]

MASS_TOL = 1e-10
MEAN_TOL = 1e-6
CALL_TOL = 1e-9


def normalize(row, lattice: Lattice) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    mass = integrate_x(lattice, row)
    if not np.isfinite(mass) or mass <= 0.0:
        raise ZeroMassError(f"density has non-positive mass {mass!r}")
    return row / mass


def mean(row, lattice: Lattice) -> float:
    return integrate_x(lattice, np.asarray(row, dtype=float) * lattice.x)


def gaussian_density(lattice: Lattice, mean: float, sd: float) -> np.ndarray:
    """Normal pdf sampled on the lattice nodes, renormalized to unit trapezoidal mass."""
    if not sd > 0:
        raise ValidationError(f"sd must be > 0, got {sd}")
    if mean - 5 * sd < lattice.x_lo or mean + 5 * sd > lattice.x_hi:
        logger.warning(
            "N(%g, %g^2) puts noticeable mass outside [%g, %g]; truncating",
            mean, sd, lattice.x_lo, lattice.x_hi,
        )
    z = (lattice.x - mean) / sd
    pdf = np.exp(-0.5 * z * z) / (sd * np.sqrt(2.0 * np.pi))
    if np.all(pdf < 1e-300):
        raise DegenerateDensityError("Gaussian has no resolvable mass on the lattice")
    return normalize(pdf, lattice)


def density_from_calls(strikes, prices, lattice: Lattice) -> np.ndarray:
    """Risk-neutral density as the second strike-derivative of call prices.

    Second differences are taken on the (possibly non-uniform) strike grid,
    negative values are clipped, and the result is linearly interpolated onto
    the lattice nodes (zero outside the strike range) and renormalized.
    """
    k = np.asarray(strikes, dtype=float)
    c = np.asarray(prices, dtype=float)
    if k.ndim != 1 or c.shape != k.shape:
        raise ValidationError("strikes and prices must be 1-D arrays of equal length")
    if k.size < 5:
        raise InsufficientStrikesError(f"insufficient strikes: need >= 5, got {k.size}")
    if not (np.all(np.isfinite(k)) and np.all(np.isfinite(c))):
        raise ValidationError("strikes and prices must be finite")
    if np.any(np.diff(k) <= 0):
        raise ValidationError("strikes must be strictly increasing")

    h_left = k[1:-1] - k[:-2]
    h_right = k[2:] - k[1:-1]
    second = 2.0 * (
        c[2:] / (h_right * (h_left + h_right))
        - c[1:-1] / (h_left * h_right)
        + c[:-2] / (h_left * (h_left + h_right))
    )
    # Second differences of an affine chain are pure round-off.
    scale = np.max(np.abs(c)) / np.min(h_left * h_right) if np.any(c) else 0.0
    second[np.abs(second) <= 64 * np.finfo(float).eps * scale] = 0.0
    second = np.clip(second, 0.0, None)
    row = np.interp(lattice.x, k[1:-1], second, left=0.0, right=0.0)
    if not np.any(row > 0):
        raise ZeroMassError("all-zero density recovered from the call prices")
    return normalize(row, lattice)


def call_prices(row, lattice: Lattice, strikes=None) -> np.ndarray:
    """Undiscounted call prices ``int (x - K)^+ rho(x) dx`` at each strike (default: lattice nodes)."""
    row = np.asarray(row, dtype=float)
    ks = lattice.x if strikes is None else np.asarray(strikes, dtype=float)
    payoff = np.maximum(lattice.x[None, :] - ks[:, None], 0.0)
    return trapezoid(payoff * row[None, :], dx=lattice.dx, axis=1)


@dataclass(frozen=True)
class ConvexOrderVerdict:
    """Outcome of the convex-order test.

    ``strike`` is the node where the call-price violation is largest and
    ``first_strike`` the leftmost violating node.
    """

    holds: bool
    strike: float | None = None
    reason: str = ""
    first_strike: float | None = None

    def __bool__(self):
        return self.holds


def check_convex_order(rho0, rho1, lattice: Lattice) -> ConvexOrderVerdict:
    """Test ``rho0 <=_cx rho1`` through equal means and call-price dominance at every node."""
    m0, m1 = mean(rho0, lattice), mean(rho1, lattice)
    if abs(m0 - m1) > MEAN_TOL:
        return ConvexOrderVerdict(False, None, f"means differ: {m0:.10g} vs {m1:.10g}")
    c0 = call_prices(rho0, lattice)
    c1 = call_prices(rho1, lattice)
    excess = c0 - c1
    bad = np.flatnonzero(excess > CALL_TOL)
    if bad.size:
        k = float(lattice.x[np.argmax(excess)])
        return ConvexOrderVerdict(
            False, k, f"call price of rho0 exceeds rho1 by {excess.max():.3g} at strike {k:.10g}",
            float(lattice.x[bad[0]]),
        )
    return ConvexOrderVerdict(True)


@dataclass(frozen=True)
class DensityPair:
    """Validated initial and final marginals on a shared lattice.

    Construction fails with a ``ValidationError`` subclass if either row is
    negative, not unit mass, or if the pair is not in convex order.
    """

    rho0: np.ndarray
    rho1: np.ndarray
    lattice: Lattice

    def __post_init__(self):
        lat = self.lattice
        r0 = lat.check_row(self.rho0, "rho0").copy()
        r1 = lat.check_row(self.rho1, "rho1").copy()
        for name, row in (("rho0", r0), ("rho1", r1)):
            if np.any(row < 0):
                raise ValidationError(f"{name} has negative values")
            mass = integrate_x(lat, row)
            if abs(mass - 1.0) > MASS_TOL:
                raise ValidationError(f"{name} has mass {mass:.12g}, expected 1")
            row.flags.writeable = False
        verdict = check_convex_order(r0, r1, lat)
        if not verdict.holds:
            raise ConvexOrderError(f"marginals violate convex order: {verdict.reason}", verdict.strike)
        object.__setattr__(self, "rho0", r0)
        object.__setattr__(self, "rho1", r1)

    @classmethod
    def from_rows(cls, rho0, rho1, lattice: Lattice) -> "DensityPair":
        """Normalize both rows first, then validate."""
        return cls(normalize(rho0, lattice), normalize(rho1, lattice), lattice)

    @classmethod
    def gaussian(cls, lattice: Lattice, mean0, sd0, mean1, sd1) -> "DensityPair":
        return cls(gaussian_density(lattice, mean0, sd0), gaussian_density(lattice, mean1, sd1), lattice)
