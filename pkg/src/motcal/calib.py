"""Turn a converged iterate into a masked local-variance surface."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyMaskError, ValidationError

__all__ = ["VolSurface", "extract_sigma2", "sigma2_from_fields", "summarize"]


@dataclass(frozen=True)
class VolSurface:
    """Local variance ``sigma2 = 2 m / rho`` on nodes where the density is reliable.

    ``mask`` is True on reliable nodes (``rho >= threshold_used``); ``sigma2``
    holds NaN elsewhere.
    """

    sigma2: np.ndarray
    mask: np.ndarray
    rho: np.ndarray
    threshold_used: float
    clip_count: int = 0

    @property
    def unmasked_values(self) -> np.ndarray:
        return self.sigma2[self.mask]


def sigma2_from_fields(rho, m, mask_fraction: float = 0.01) -> VolSurface:
    """Invert ``m = rho * sigma2 / 2`` where ``rho >= mask_fraction * max(rho)``.

    Negative values of ``sigma2`` on reliable nodes are clipped to zero and
    counted in ``clip_count``.
    """
    if not 0 < mask_fraction < 1:
        raise ValidationError(f"mask_fraction must lie in (0, 1), got {mask_fraction}")
    rho = np.asarray(rho, dtype=float)
    m = np.asarray(m, dtype=float)
    if rho.shape != m.shape:
        raise ValidationError("rho and m must have the same shape")
    peak = float(np.max(rho))
    if not peak > 0:
        raise EmptyMaskError("density has no positive node; nothing to unmask")
    threshold = mask_fraction * peak
    mask = rho >= threshold
    sigma2 = np.full(rho.shape, np.nan)
    raw = 2.0 * m[mask] / rho[mask]
    clipped = raw < 0
    sigma2[mask] = np.where(clipped, 0.0, raw)
    return VolSurface(sigma2, mask, rho, threshold, int(clipped.sum()))


def extract_sigma2(state, mask_fraction: float = 0.01) -> VolSurface:
    return sigma2_from_fields(state.rho, state.m, mask_fraction)


def summarize(surface: VolSurface) -> dict:
    vals = surface.unmasked_values
    return {
        "unmasked_fraction": float(surface.mask.mean()),
        "sigma2_mean_unmasked": float(vals.mean()),
        "sigma2_min_unmasked": float(vals.min()),
        "sigma2_max_unmasked": float(vals.max()),
        "clip_count": surface.clip_count,
        "threshold_used": surface.threshold_used,
    }
