"""Convex cost on the diffusion coefficient, its conjugate, and projection onto K.

The cost family is ``F(g) = (g - gamma_bar)**2`` for ``g >= 0`` and ``+inf``
otherwise.  Taking the sup over ``g >= 0`` gives the piecewise conjugate

    F*(b) = gamma_bar * b + b**2 / 4     for b >= -2 * gamma_bar
    F*(b) = -gamma_bar**2                for b <  -2 * gamma_bar

which is C^1 with a jump in its second derivative at ``b = -2 * gamma_bar``.
The dual constraint set is ``K = {(a, b) : a + F*(b) <= 0}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ProjectionError, ValidationError

__all__ = [
    "QuadraticCost",
    "KPoint",
    "f_eval",
    "f_conj",
    "f_conj_deriv",
    "project_to_k",
    "project_to_k_array",
    "MEMBERSHIP_TOL",
]

MEMBERSHIP_TOL = 1e-12
_DERIV_TOL = 1e-12
_BRACKET_TOL = 1e-14
_KINK_TOL = 1e-12
_MAX_ITER = 200


@dataclass(frozen=True)
class QuadraticCost:
    """Quadratic penalty around ``gamma_bar`` with a hard positivity constraint."""

    gamma_bar: float
    kind: str = "quadratic"

    def __post_init__(self):
        if not np.isfinite(self.gamma_bar) or self.gamma_bar <= 0:
            raise ValidationError(f"gamma_bar must be > 0, got {self.gamma_bar}")
        if self.kind != "quadratic":
            raise ValidationError(f"unsupported cost kind {self.kind!r}")

    @property
    def kink(self) -> float:
        """Point where the conjugate switches to its flat branch."""
        return -2.0 * self.gamma_bar

    def __call__(self, gamma):
        return f_eval(self, gamma)

    def derivative(self, gamma):
        return 2.0 * (np.asarray(gamma, dtype=float) - self.gamma_bar)

    def conj(self, b):
        return f_conj(self, b)

    def conj_deriv(self, b):
        return f_conj_deriv(self, b)


class KPoint(NamedTuple):
    a: float
    b: float


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def f_eval(cost: QuadraticCost, gamma):
    g = np.asarray(gamma, dtype=float)
    out = np.where(g >= 0.0, (g - cost.gamma_bar) ** 2, np.inf)
    return _scalarize(out)


def f_conj(cost: QuadraticCost, b):
    b = np.asarray(b, dtype=float)
    gb = cost.gamma_bar
    out = np.where(b >= cost.kink, gb * b + 0.25 * b * b, -gb * gb)
    return _scalarize(out)


def f_conj_deriv(cost: QuadraticCost, b):
    """Derivative of the conjugate (right-hand derivative at the kink).

    Equals the maximizing diffusion coefficient ``max(gamma_bar + b/2, 0)``.
    """
    b = np.asarray(b, dtype=float)
    out = np.where(b >= cost.kink, cost.gamma_bar + 0.5 * b, 0.0)
    return _scalarize(out)


def _conj_second(cost, b):
    return np.where(b >= cost.kink, 0.5, 0.0)


def project_to_k_array(cost: QuadraticCost, alpha, beta):
    """Pointwise Euclidean projection of ``(alpha, beta)`` onto K.

    Points already in K (up to ``MEMBERSHIP_TOL``) are returned unchanged.
    For the rest, ``b`` minimizes ``(F*(b) + alpha)**2 + (b - beta)**2`` and
    ``a = -F*(b)``.  The stationarity condition is solved with Newton steps
    kept inside a sign-change bracket, falling back to bisection.

    Parameters
    ----------
    cost : QuadraticCost
    alpha, beta : array_like
        Broadcast-compatible arrays of the same shape.

    Returns
    -------
    a, b : ndarray
        Projected components with the shape of the inputs.

    Raises
    ------
    ProjectionError
        If some node has not converged after 200 iterations; the flat indices
        of those nodes are attached as ``err.nodes``.
    """
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float))
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
        raise ValidationError("projection inputs must be finite")
    a_out = alpha.astype(float, copy=True)
    b_out = beta.astype(float, copy=True)

    outside = alpha + f_conj(cost, beta) > MEMBERSHIP_TOL
    if not np.any(outside):
        return a_out, b_out
    idx = np.flatnonzero(outside)
    al = alpha.ravel()[idx]
    be = beta.ravel()[idx]

    def half_grad(b):
        return (f_conj(cost, b) + al) * f_conj_deriv(cost, b) + (b - be)

    # At b = beta the half-gradient is >= 0; grow the lower end until it is < 0.
    lo = be - 1.0
    hi = be + 1.0
    width = np.ones_like(be)
    for _ in range(_MAX_ITER):
        neg = half_grad(lo) < 0.0
        if np.all(neg):
            break
        width = np.where(neg, width, 2.0 * width)
        lo = np.where(neg, lo, be - width)
    else:
        raise ProjectionError("could not bracket the projection root", nodes=idx)

    b = be.copy()
    active = np.ones(be.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        g = half_grad(b)
        done = (np.abs(g) <= _DERIV_TOL) | (hi - lo <= _BRACKET_TOL)
        active &= ~done
        if not np.any(active):
            break
        lo = np.where(active & (g < 0.0), b, lo)
        hi = np.where(active & (g > 0.0), b, hi)
        fs = f_conj(cost, b)
        curv = f_conj_deriv(cost, b) ** 2 + (fs + al) * _conj_second(cost, b) + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = b - g / curv
        use_bisect = (
            ~np.isfinite(newton)
            | (curv <= 0.0)
            | (newton <= lo)
            | (newton >= hi)
            | (np.abs(newton - cost.kink) <= _KINK_TOL)
        )
        step = np.where(use_bisect, 0.5 * (lo + hi), newton)
        b = np.where(active, step, b)
    else:
        g = half_grad(b)
        bad = (np.abs(g) > _DERIV_TOL) & (hi - lo > _BRACKET_TOL)
        if np.any(bad):
            raise ProjectionError(
                f"projection did not converge at {int(bad.sum())} node(s)", nodes=idx[bad]
            )

    a_flat = a_out.reshape(-1)
    b_flat = b_out.reshape(-1)
    a_flat[idx] = -f_conj(cost, b)
    b_flat[idx] = b
    return a_flat.reshape(alpha.shape), b_flat.reshape(alpha.shape)


def project_to_k(cost: QuadraticCost, alpha: float, beta: float) -> KPoint:
    """Scalar projection of a single point onto K."""
    a, b = project_to_k_array(cost, np.array([alpha], dtype=float), np.array([beta], dtype=float))
    return KPoint(float(a[0]), float(b[0]))
