"""Augmented-Lagrangian ADMM for the martingale transport problem.

One iteration performs, in order,

* Step A: global solve for the multiplier ``phi``;
* Step B: pointwise projection of ``grad_txx(phi) + mu / r`` onto K;
* Step C: dual ascent ``mu += r * (grad_txx(phi) - q)`` on ``mu = (rho, m)``.

Optimality is monitored through the density-weighted HJB residual
``max rho * |d_t phi + F*(d_xx phi)|``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .cost import QuadraticCost, f_conj, project_to_k_array
from .density import DensityPair, normalize
from .exceptions import MOTError, ProjectionError, ValidationError
from .lattice import Lattice, d_t, d_xx, grad_txx, integrate_x
from .pde import StepAOperator, assemble_operator, build_rhs, solve_phi

logger = logging.getLogger(__name__)

__all__ = [
    "AdmmState",
    "SolverConfig",
    "RunReport",
    "IterationRecord",
    "INIT_SCHEMES",
    "init_state",
    "step_a",
    "step_b",
    "step_c",
    "residual",
    "primal_gap",
    "dual_objective",
    "run",
]

INIT_SCHEMES = ("linear-marginal", "heat-kernel", "zero")


@dataclass
class AdmmState:
    """Iterate ``(phi, q, mu)`` with ``q = (a, b)`` and ``mu = (rho, m)``."""

    phi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    rho: np.ndarray
    m: np.ndarray

    def copy(self) -> "AdmmState":
        return AdmmState(*(np.array(v, copy=True) for v in (self.phi, self.a, self.b, self.rho, self.m)))

    def check(self, lattice: Lattice) -> None:
        for name in ("phi", "a", "b", "rho", "m"):
            lattice.check_field(getattr(self, name), name)


@dataclass(frozen=True)
class SolverConfig:
    r: float = 64.0
    max_iter: int = 3000
    res_tol: float = 1e-6
    lin_tol: float = 1e-10
    init_scheme: str = "linear-marginal"
    rho_mask_fraction: float = 0.01

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r <= 0:
            raise ValidationError("solver.r must be > 0")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValidationError("solver.max_iter must be an integer >= 1")
        if not self.res_tol >= 0:
            raise ValidationError("solver.res_tol must be >= 0")
        if not self.lin_tol > 0:
            raise ValidationError("solver.lin_tol must be > 0")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValidationError(f"solver.init_scheme must be one of {INIT_SCHEMES}")
        if not 0 < self.rho_mask_fraction < 1:
            raise ValidationError("rho_mask_fraction must lie in (0, 1)")


class IterationRecord(NamedTuple):
    iteration: int
    residual: float
    primal_gap: float


@dataclass
class RunReport:
    residual_history: list[tuple[int, float]] = field(default_factory=list)
    primal_gap_history: list[float] = field(default_factory=list)
    iterations_used: int = 0
    converged: bool = False
    primal_gap: float = float("nan")

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1][1] if self.residual_history else float("nan")

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r for _, r in self.residual_history])

    def records(self):
        for (it, res), gap in zip(self.residual_history, self.primal_gap_history):
            yield IterationRecord(it, res, gap)


def _heat_kernel_flow(lattice: Lattice, rho0, rho1, gamma_bar: float) -> np.ndarray:
    """Constant-diffusion evolution of rho0, corrected linearly in t to end on rho1."""
    x = lattice.x
    diff = x[:, None] - x[None, :]
    w = np.full(lattice.nx, lattice.dx)
    w[0] = w[-1] = 0.5 * lattice.dx
    rows = np.empty(lattice.shape)
    rows[0] = rho0
    for j in range(1, lattice.nt):
        var = 2.0 * gamma_bar * lattice.t[j]
        kern = np.exp(-0.5 * diff**2 / var) / np.sqrt(2.0 * np.pi * var)
        rows[j] = normalize(kern @ (w * rho0), lattice)
    t = lattice.t[:, None]
    return rows + t * (rho1 - rows[-1])[None, :]


def init_state(lattice: Lattice, densities: DensityPair, scheme: str = "linear-marginal",
               gamma_bar: float | None = None) -> AdmmState:
    """Starting iterate: ``phi = a = b = 0`` and ``m = rho * gamma_bar`` (zero on the x-boundary).

    ``scheme`` selects ``rho``: ``"linear-marginal"`` interpolates the marginals
    linearly in time, ``"heat-kernel"`` diffuses ``rho0`` at rate ``gamma_bar``
    (with a linear correction so that ``rho(1) = rho1``), and ``"zero"`` is a
    cold start with ``rho = 0``.
    """
    if scheme not in INIT_SCHEMES:
        raise ValidationError(f"unknown init scheme {scheme!r}")
    gb = 0.0 if gamma_bar is None else float(gamma_bar)
    t = lattice.t[:, None]
    if scheme == "linear-marginal":
        rho = (1.0 - t) * densities.rho0[None, :] + t * densities.rho1[None, :]
    elif scheme == "heat-kernel":
        if gamma_bar is None:
            raise ValidationError("heat-kernel initialization needs gamma_bar")
        rho = _heat_kernel_flow(lattice, densities.rho0, densities.rho1, gb)
    else:
        rho = lattice.zeros()
    m = rho * gb
    m[:, 0] = 0.0
    m[:, -1] = 0.0
    z = lattice.zeros
    return AdmmState(phi=z(), a=z(), b=z(), rho=rho, m=m)


def step_a(state: AdmmState, op: StepAOperator, densities: DensityPair, r: float,
           lin_tol: float = 1e-10) -> np.ndarray:
    if op.r != r or op.lattice != densities.lattice:
        raise ValidationError("Step-A operator was assembled for a different r or lattice")
    return solve_phi(op, build_rhs(state, densities, r), lin_tol)


def step_b(state: AdmmState, cost: QuadraticCost, r: float, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Project ``grad_txx(phi) + mu / r`` onto K node by node."""
    phi_t, phi_xx = grad_txx(lattice, state.phi)
    alpha = phi_t + state.rho / r
    beta = phi_xx + state.m / r
    try:
        return project_to_k_array(cost, alpha, beta)
    except ProjectionError as exc:
        nodes = None
        if exc.nodes is not None:
            nodes = [np.unravel_index(int(k), lattice.shape) for k in exc.nodes]
        raise ProjectionError(f"{exc} (nodes (t_index, x_index): {nodes[:5] if nodes else nodes})",
                              nodes=nodes) from exc


def step_c(state: AdmmState, r: float, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    phi_t, phi_xx = grad_txx(lattice, state.phi)
    return state.rho + r * (phi_t - state.a), state.m + r * (phi_xx - state.b)


def residual(state: AdmmState, cost: QuadraticCost, lattice: Lattice) -> float:
    """Density-weighted HJB residual ``max rho * |d_t phi + F*(d_xx phi)|``."""
    hjb = d_t(lattice, state.phi) + f_conj(cost, d_xx(lattice, state.phi))
    return float(np.max(state.rho * np.abs(hjb)))


def primal_gap(state: AdmmState, lattice: Lattice) -> float:
    """Max-norm of ``grad_txx(phi) - q``."""
    phi_t, phi_xx = grad_txx(lattice, state.phi)
    return float(max(np.max(np.abs(phi_t - state.a)), np.max(np.abs(phi_xx - state.b))))


def dual_objective(state: AdmmState, densities: DensityPair) -> float:
    """``int phi(0, x) rho0 - phi(1, x) rho1 dx``; a diagnostic only."""
    lat = densities.lattice
    return integrate_x(lat, state.phi[0] * densities.rho0 - state.phi[-1] * densities.rho1)


def run(config: SolverConfig, densities: DensityPair, cost: QuadraticCost,
        lattice: Lattice | None = None,
        callback: Callable[[IterationRecord], None] | None = None,
        state: AdmmState | None = None,
        operator: StepAOperator | None = None) -> tuple[AdmmState, RunReport]:
    """Iterate Steps A, B, C until the residual drops to ``res_tol`` or ``max_iter`` is reached.

    A ``state`` may be passed to warm-start; otherwise ``init_state`` is used
    with ``config.init_scheme``.  ``callback`` receives one
    :class:`IterationRecord` per iteration.  Errors raised inside a step are
    re-raised with the iteration index prepended.
    """
    lattice = densities.lattice if lattice is None else lattice
    if lattice != densities.lattice:
        raise ValidationError("densities were built on a different lattice")
    # Revalidates convex order even if the pair was built by hand.
    DensityPair(densities.rho0, densities.rho1, lattice)
    r = config.r
    op = operator if operator is not None else assemble_operator(lattice, r)
    if state is None:
        state = init_state(lattice, densities, config.init_scheme, cost.gamma_bar)
    else:
        state.check(lattice)
        state = state.copy()

    report = RunReport()
    for it in range(1, config.max_iter + 1):
        try:
            phi = step_a(state, op, densities, r, config.lin_tol)
            state = replace(state, phi=phi)
            a, b = step_b(state, cost, r, lattice)
            state = replace(state, a=a, b=b)
            gap = primal_gap(state, lattice)
            rho, m = step_c(state, r, lattice)
            state = replace(state, rho=rho, m=m)
        except MOTError as exc:
            exc.args = (f"iteration {it}: {exc}",) + exc.args[1:]
            exc.iteration = it
            raise
        res = residual(state, cost, lattice)
        report.residual_history.append((it, res))
        report.primal_gap_history.append(gap)
        report.iterations_used = it
        report.primal_gap = gap
        if callback is not None:
            callback(IterationRecord(it, res, gap))
        if not np.isfinite(res):
            logger.warning("residual became non-finite at iteration %d", it)
            break
        if res <= config.res_tol:
            report.converged = True
            break
    return state, report
