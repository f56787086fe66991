"""JSON run configuration for the ``mot calibrate`` command.

Layout::

    {
      "problem": {"gaussian": {"mean0": .., "sd0": .., "mean1": .., "sd1": ..}}
                 | {"files": {"rho0": "a.csv", "rho1": "b.csv"}}
                 | {"chain": {"chain0": "c0.csv", "chain1": "c1.csv"}},
      "lattice": {"nt": 128, "nx": 128, "x_lo": 0.0, "x_hi": 1.0},
      "cost":    {"gamma_bar": 0.00375},
      "solver":  {"r": 64, "max_iter": 3000, "res_tol": 1e-6, "lin_tol": 1e-10,
                  "init_scheme": "linear-marginal"},
      "output":  {"directory": "out", "mask_fraction": 0.01}
    }

Relative file paths are resolved against the directory holding the config.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .admm import SolverConfig
from .cost import QuadraticCost
from .density import DensityPair, density_from_calls
from .exceptions import ConfigError, ValidationError
from .io import read_chain, read_density
from .lattice import Lattice

__all__ = ["RunConfig", "parse_config", "config_from_dict", "config_to_dict", "build_densities"]

PROBLEM_KEYS = {
    "gaussian": ("mean0", "sd0", "mean1", "sd1"),
    "files": ("rho0", "rho1"),
    "chain": ("chain0", "chain1"),
}
SOLVER_DEFAULTS = {
    "res_tol": 1e-6,
    "lin_tol": 1e-10,
    "init_scheme": "linear-marginal",
}


@dataclass(frozen=True)
class RunConfig:
    problem_kind: str
    problem: dict
    lattice: Lattice
    cost: QuadraticCost
    solver: SolverConfig
    output_dir: str | None = None
    mask_fraction: float = 0.01
    base_dir: Path = field(default=Path("."), compare=False)

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _section(doc, name, required=True):
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing section {name!r}")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be an object")
    return sec


def _check_keys(sec, allowed, where):
    extra = set(sec) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


def _number(sec, key, where, kind=float):
    if key not in sec:
        raise ConfigError(f"missing key {where}.{key}")
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{where}.{key} must be an integer")
        return int(v)
    return float(v)


def config_from_dict(doc: dict, base_dir=".") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(doc, ("problem", "lattice", "cost", "solver", "output"), "config")

    prob = _section(doc, "problem")
    if len(prob) != 1 or next(iter(prob)) not in PROBLEM_KEYS:
        raise ConfigError(f"problem must have exactly one of {sorted(PROBLEM_KEYS)}")
    kind, params = next(iter(prob.items()))
    if not isinstance(params, dict):
        raise ConfigError(f"problem.{kind} must be an object")
    _check_keys(params, PROBLEM_KEYS[kind], f"problem.{kind}")
    if kind == "gaussian":
        params = {k: _number(params, k, "problem.gaussian") for k in PROBLEM_KEYS[kind]}
        for k in ("sd0", "sd1"):
            if params[k] <= 0:
                raise ConfigError(f"problem.gaussian.{k} must be > 0")
    else:
        for k in PROBLEM_KEYS[kind]:
            if not isinstance(params.get(k), str):
                raise ConfigError(f"problem.{kind}.{k} must be a file path string")
        params = dict(params)

    lat = _section(doc, "lattice")
    _check_keys(lat, ("nt", "nx", "x_lo", "x_hi"), "lattice")
    try:
        lattice = Lattice(
            _number(lat, "nt", "lattice", int), _number(lat, "nx", "lattice", int),
            _number(lat, "x_lo", "lattice"), _number(lat, "x_hi", "lattice"),
        )
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"lattice: {exc}") from exc

    cost_sec = _section(doc, "cost")
    _check_keys(cost_sec, ("gamma_bar",), "cost")
    gb = _number(cost_sec, "gamma_bar", "cost")
    if gb <= 0:
        raise ConfigError("cost.gamma_bar must be > 0")
    cost = QuadraticCost(gb)

    sol = {**SOLVER_DEFAULTS, **_section(doc, "solver", required=False)}
    _check_keys(sol, ("r", "max_iter", "res_tol", "lin_tol", "init_scheme"), "solver")
    out = _section(doc, "output", required=False)
    _check_keys(out, ("directory", "mask_fraction"), "output")
    mask_fraction = _number(out, "mask_fraction", "output") if "mask_fraction" in out else 0.01
    if "directory" in out and not isinstance(out["directory"], str):
        raise ConfigError("output.directory must be a string")
    if not isinstance(sol["init_scheme"], str):
        raise ConfigError("solver.init_scheme must be a string")
    try:
        solver = SolverConfig(
            r=_number(sol, "r", "solver") if "r" in sol else 64.0,
            max_iter=_number(sol, "max_iter", "solver", int) if "max_iter" in sol else 3000,
            res_tol=_number(sol, "res_tol", "solver"),
            lin_tol=_number(sol, "lin_tol", "solver"),
            init_scheme=sol["init_scheme"],
            rho_mask_fraction=mask_fraction,
        )
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(str(exc).replace("rho_mask_fraction", "output.mask_fraction")) from exc

    return RunConfig(kind, params, lattice, cost, solver, out.get("directory"), mask_fraction,
                     Path(base_dir))


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    return config_from_dict(doc, path.parent)


def config_to_dict(cfg: RunConfig) -> dict:
    lat = cfg.lattice
    solver = asdict(cfg.solver)
    solver.pop("rho_mask_fraction")
    output = {"mask_fraction": cfg.mask_fraction}
    if cfg.output_dir is not None:
        output["directory"] = cfg.output_dir
    return {
        "problem": {cfg.problem_kind: dict(cfg.problem)},
        "lattice": {"nt": lat.nt, "nx": lat.nx, "x_lo": lat.x_lo, "x_hi": lat.x_hi},
        "cost": {"gamma_bar": cfg.cost.gamma_bar},
        "solver": solver,
        "output": output,
    }


def _density_on_lattice(path, lattice):
    x, rho = read_density(path)
    if x.shape == lattice.x.shape and np.allclose(x, lattice.x, rtol=0, atol=1e-12 * lattice.length):
        return rho
    if np.any(np.diff(x) <= 0):
        raise ValidationError(f"{path}: x column must be strictly increasing")
    return np.interp(lattice.x, x, rho, left=0.0, right=0.0)


def build_densities(cfg: RunConfig) -> DensityPair:
    lat = cfg.lattice
    p = cfg.problem
    if cfg.problem_kind == "gaussian":
        return DensityPair.gaussian(lat, p["mean0"], p["sd0"], p["mean1"], p["sd1"])
    if cfg.problem_kind == "files":
        rows = [_density_on_lattice(cfg.resolve(p[k]), lat) for k in ("rho0", "rho1")]
    else:
        rows = [density_from_calls(*read_chain(cfg.resolve(p[k])), lat) for k in ("chain0", "chain1")]
    return DensityPair.from_rows(rows[0], rows[1], lat)
