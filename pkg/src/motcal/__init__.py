"""Local-volatility calibration by martingale optimal transport, solved with ADMM."""

from .admm import AdmmState, RunReport, SolverConfig, init_state, residual, run
from .calib import VolSurface, extract_sigma2, summarize
from .cost import KPoint, QuadraticCost, f_conj, f_conj_deriv, f_eval, project_to_k
from .density import DensityPair, check_convex_order, density_from_calls, gaussian_density, normalize
from .estimator import LocalVolCalibrator
from .exceptions import *  # noqa: F401,F403
from .lattice import Lattice, d_t, d_xx, grad_txx, integrate, integrate_x, make_lattice
from .pde import assemble_operator, build_rhs, solve_phi

__version__ = "0.1.0"
