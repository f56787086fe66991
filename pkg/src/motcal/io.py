"""CSV readers and writers for chains, densities, surfaces and residual logs.

Floats are written with 17 significant digits so that re-parsing reproduces
the in-memory values exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .exceptions import ValidationError

CHAIN_HEADER = ("strike", "price")
DENSITY_HEADER = ("x", "rho")
SURFACE_HEADER = ("t", "x", "rho", "m", "sigma2", "masked")
RHO_HEADER = ("t", "x", "rho")
RESIDUAL_HEADER = ("iter", "residual", "primal_gap")


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _read_columns(path, header):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                got = next(reader)
            except StopIteration:
                raise ValidationError(f"{path}: empty file") from None
            if tuple(h.strip() for h in got) != header:
                raise ValidationError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise ValidationError(f"{path}:{lineno}: expected {len(header)} columns")
                try:
                    rows.append([float(c) for c in row])
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: non-numeric value") from None
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return np.array(rows).T


def read_chain(path):
    strikes, prices = _read_columns(path, CHAIN_HEADER)
    return strikes, prices


def read_density(path):
    x, rho = _read_columns(path, DENSITY_HEADER)
    return x, rho


def _write(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_chain(path, strikes, prices):
    _write(path, CHAIN_HEADER, ((fmt(k), fmt(c)) for k, c in zip(strikes, prices)))


def write_density(path, x, rho):
    _write(path, DENSITY_HEADER, ((fmt(a), fmt(b)) for a, b in zip(x, rho)))


def write_surface(path, lattice, rho, m, surface):
    def rows():
        for j, t in enumerate(lattice.t):
            for i, x in enumerate(lattice.x):
                ok = surface.mask[j, i]
                yield (fmt(t), fmt(x), fmt(rho[j, i]), fmt(m[j, i]),
                       fmt(surface.sigma2[j, i]) if ok else "", "0" if ok else "1")

    _write(path, SURFACE_HEADER, rows())


def write_rho(path, lattice, rho):
    _write(path, RHO_HEADER, (
        (fmt(t), fmt(x), fmt(rho[j, i]))
        for j, t in enumerate(lattice.t) for i, x in enumerate(lattice.x)
    ))


def write_residuals(path, report):
    _write(path, RESIDUAL_HEADER, (
        (str(rec.iteration), fmt(rec.residual), fmt(rec.primal_gap)) for rec in report.records()
    ))
