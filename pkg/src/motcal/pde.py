"""Step A: the fourth-order space-time elliptic problem for the multiplier phi.

The assembled operator is ``r * (-d_tt + d_xxxx)`` on the unknowns
``phi[:, 1:-1]`` (the boundary columns are pinned to zero).  In time the
three-point Laplacian uses Neumann ghost nodes at t=0 and t=1; in space the
five-point biharmonic uses simply-supported ghosts ``phi[-1] = -phi[1]``,
which makes it the square of the Dirichlet three-point Laplacian.  Rows at
t=0 and t=1 are scaled by 1/2 (trapezoid weights) so the matrix is symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import AssemblyError, LinearSolverError, ValidationError
from .lattice import Lattice, d_t, d_xx

__all__ = [
    "StepAOperator",
    "StepARhs",
    "assemble_operator",
    "build_rhs",
    "solve_phi",
    "backward_error",
    "relative_residual",
]


def _time_laplacian(nt: int, dt: float) -> sp.csr_matrix:
    """Negative second difference with Neumann ghosts eliminated (unsymmetric end rows)."""
    main = np.full(nt, 2.0)
    upper = np.full(nt - 1, -1.0)
    lower = np.full(nt - 1, -1.0)
    upper[0] = -2.0
    lower[-1] = -2.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / dt**2


def _space_bilaplacian(nx: int, dx: float) -> sp.csr_matrix:
    n = nx - 2
    lap = sp.diags(
        [np.ones(n - 1), np.full(n, -2.0), np.ones(n - 1)], [-1, 0, 1], format="csr"
    ) / dx**2
    return (lap @ lap).tocsr()


def _time_weights(nt: int) -> np.ndarray:
    w = np.ones(nt)
    w[0] = w[-1] = 0.5
    return w


@dataclass
class StepAOperator:
    """Factorized Step-A system, assembled once per run and shared read-only."""

    lattice: Lattice
    r: float
    matrix: sp.csc_matrix
    solver: object = field(repr=False)
    norm_inf: float = field(default=float("nan"), repr=False)

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """Apply the weighted operator to the interior columns of a full field."""
        lat = self.lattice
        vec = self.matrix @ np.ascontiguousarray(phi[:, 1:-1]).ravel()
        return vec.reshape(lat.nt, lat.nx - 2)


@dataclass
class StepARhs:
    """Right-hand side on the full lattice, Neumann data already folded into t=0, t=1 rows."""

    lattice: Lattice
    values: np.ndarray

    def weighted_vector(self) -> np.ndarray:
        w = _time_weights(self.lattice.nt)
        return (w[:, None] * self.values[:, 1:-1]).ravel()


def _probe(matrix, rng, n_pairs=10):
    n = matrix.shape[0]
    for _ in range(n_pairs):
        u = rng.standard_normal(n)
        v = rng.standard_normal(n)
        au, av = matrix @ u, matrix @ v
        scale = np.linalg.norm(u) * np.linalg.norm(v)
        # Relative to the operator norm so the check is independent of r, dt, dx.
        norm = abs(matrix).sum(axis=1).max()
        if abs(au @ v - u @ av) > 1e-10 * scale * norm:
            raise AssemblyError("Step-A operator is not symmetric")
        if not u @ au > 0:
            raise AssemblyError("Step-A operator is not positive definite")


def assemble_operator(lattice: Lattice, r: float, check: bool = True) -> StepAOperator:
    """Assemble and factorize ``r * (-d_tt + d_xxxx)`` with the boundary conditions eliminated."""
    if not np.isfinite(r) or r <= 0:
        raise ValidationError(f"r must be > 0, got {r}")
    nt, nx = lattice.nt, lattice.nx
    w = sp.diags(_time_weights(nt))
    tlap = w @ _time_laplacian(nt, lattice.dt)
    bilap = _space_bilaplacian(nx, lattice.dx)
    eye_x = sp.identity(nx - 2, format="csr")
    matrix = (r * (sp.kron(tlap, eye_x) + sp.kron(w, bilap))).tocsc()
    matrix.sort_indices()
    if check:
        _probe(matrix, np.random.default_rng(0))
    try:
        solver = spla.splu(matrix, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise AssemblyError(f"factorization failed: {exc}") from exc
    norm_inf = float(abs(matrix).sum(axis=1).max())
    return StepAOperator(lattice, float(r), matrix, solver, norm_inf)


def build_rhs(state, densities, r: float) -> StepARhs:
    """Source term ``d_t(rho - r a) - d_xx(m - r b)`` plus Neumann data at t=0 and t=1.

    ``m - r b`` is taken to vanish on the spatial boundary columns.  The
    Neumann conditions ``r d_t phi = rho_end - rho + r a`` enter through ghost
    elimination as ``-/+ 2 (rho_end - rho + r a) / dt`` on the end rows.
    """
    lat = densities.lattice
    w = state.rho - r * state.a
    flux = state.m - r * state.b
    flux = flux.copy()
    flux[:, 0] = 0.0
    flux[:, -1] = 0.0
    values = d_t(lat, w) - d_xx(lat, flux)
    g0 = densities.rho0 - state.rho[0] + r * state.a[0]
    g1 = densities.rho1 - state.rho[-1] + r * state.a[-1]
    values[0] -= 2.0 * g0 / lat.dt
    values[-1] += 2.0 * g1 / lat.dt
    return StepARhs(lat, values)


def backward_error(op: StepAOperator, x: np.ndarray, b: np.ndarray) -> float:
    """Normwise backward error ``|b - A x| / (|A| |x| + |b|)`` in the max-norm."""
    res = np.abs(b - op.matrix @ x).max()
    denom = op.norm_inf * np.abs(x).max() + np.abs(b).max()
    return float(res / denom) if denom > 0 else 0.0


def relative_residual(op: StepAOperator, phi: np.ndarray, rhs: StepARhs) -> float:
    """Plain ``|A phi - rhs| / |rhs|`` (2-norm) on the weighted system."""
    b = rhs.weighted_vector()
    x = np.ascontiguousarray(phi[:, 1:-1]).ravel()
    return float(np.linalg.norm(op.matrix @ x - b) / np.linalg.norm(b))


def solve_phi(op: StepAOperator, rhs: StepARhs, lin_tol: float = 1e-10) -> np.ndarray:
    """Solve the Step-A system; boundary columns of the returned field are exactly zero.

    Accuracy is judged by the normwise backward error, which a stable direct
    solve keeps near machine precision.  One round of iterative refinement is
    tried before raising ``LinearSolverError``.
    """
    lat = op.lattice
    if rhs.lattice != lat:
        raise ValidationError("operator and right-hand side live on different lattices")
    b = rhs.weighted_vector()
    phi = lat.zeros()
    if not np.any(b):
        return phi
    x = op.solver.solve(b)
    err = backward_error(op, x, b)
    if err > lin_tol:
        x = x + op.solver.solve(b - op.matrix @ x)
        err = backward_error(op, x, b)
    if not np.isfinite(err) or err > lin_tol:
        raise LinearSolverError(f"Step-A backward error {err:.3e} exceeds {lin_tol:.1e}")
    phi[:, 1:-1] = x.reshape(lat.nt, lat.nx - 2)
    return phi
