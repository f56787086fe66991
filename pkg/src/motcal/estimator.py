"""scikit-learn style front end for the calibration."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .admm import SolverConfig, run
from .calib import extract_sigma2, summarize
from .cost import QuadraticCost
from .density import DensityPair
from .lattice import Lattice

__all__ = ["LocalVolCalibrator"]


class LocalVolCalibrator(BaseEstimator):
    """Calibrate a local-variance surface between two marginal densities.

    Parameters
    ----------
    nt, nx : int
        Time and space node counts of the lattice (endpoints included).
    x_lo, x_hi : float
        Spatial domain.
    gamma_bar : float
        Preferred diffusion coefficient, the minimizer of the cost.
    r : float
        Augmentation parameter of the Lagrangian.
    max_iter : int
    res_tol : float
        Stop once the HJB residual is at or below this value.
    lin_tol : float
        Relative residual accepted from the Step-A linear solve.
    init_scheme : {"linear-marginal", "heat-kernel", "zero"}
    mask_fraction : float
        Nodes with ``rho < mask_fraction * max(rho)`` are masked in the surface.
    callback : callable, optional
        Receives an ``IterationRecord`` after each iteration.

    Attributes
    ----------
    lattice_ : Lattice
    densities_ : DensityPair
    state_ : AdmmState
    report_ : RunReport
    surface_ : VolSurface
    n_iter_ : int
    """

    def __init__(self, nt=128, nx=128, x_lo=0.0, x_hi=1.0, gamma_bar=0.00375, r=64.0,
                 max_iter=3000, res_tol=1e-6, lin_tol=1e-10, init_scheme="linear-marginal",
                 mask_fraction=0.01, callback=None):
        self.nt = nt
        self.nx = nx
        self.x_lo = x_lo
        self.x_hi = x_hi
        self.gamma_bar = gamma_bar
        self.r = r
        self.max_iter = max_iter
        self.res_tol = res_tol
        self.lin_tol = lin_tol
        self.init_scheme = init_scheme
        self.mask_fraction = mask_fraction
        self.callback = callback

    def _make_lattice(self):
        return Lattice(self.nt, self.nx, self.x_lo, self.x_hi)

    def fit(self, X, y=None):
        """Fit to marginals ``X`` of shape ``(2, nx)``: rows are rho0 and rho1 on the lattice nodes.

        Rows are renormalized to unit mass before validation.
        """
        lattice = self._make_lattice()
        X = check_array(X, dtype=np.float64)
        if X.shape != (2, lattice.nx):
            raise ValueError(f"X must have shape (2, {lattice.nx}), got {X.shape}")
        config = SolverConfig(
            r=self.r, max_iter=self.max_iter, res_tol=self.res_tol, lin_tol=self.lin_tol,
            init_scheme=self.init_scheme, rho_mask_fraction=self.mask_fraction,
        )
        cost = QuadraticCost(self.gamma_bar)
        densities = DensityPair.from_rows(X[0], X[1], lattice)
        state, report = run(config, densities, cost, lattice, callback=self.callback)
        self.lattice_ = lattice
        self.densities_ = densities
        self.state_ = state
        self.report_ = report
        self.surface_ = extract_sigma2(state, self.mask_fraction)
        self.n_iter_ = report.iterations_used
        return self

    def _interp(self, values, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns (t, x)")
        lat = self.lattice_
        interp = RegularGridInterpolator((lat.t, lat.x), values, bounds_error=False, fill_value=np.nan)
        return interp(X)

    def predict(self, X):
        """Local variance at query points ``X[:, 0] = t``, ``X[:, 1] = x``.

        Bilinear interpolation; NaN where a neighbouring node is masked or the
        point lies outside the lattice.
        """
        check_is_fitted(self, "surface_")
        return self._interp(self.surface_.sigma2, X)

    def predict_density(self, X):
        check_is_fitted(self, "state_")
        return self._interp(self.state_.rho, X)

    def summary(self) -> dict:
        check_is_fitted(self, "state_")
        out = summarize(self.surface_)
        out.update(
            iterations_used=self.report_.iterations_used,
            final_residual=self.report_.final_residual,
            converged=self.report_.converged,
        )
        return out
