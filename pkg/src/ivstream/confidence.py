"""Confidence ellipsoids for the second-stage coefficients.

Both radii are returned squared; callers take the square root when they need a
width.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .linalg import PosDefState


@dataclass(frozen=True)
class ConfidenceParams:
    """Scalars entering the radii.

    d_z : instrument dimension (or covariate dimension for single-stage OFUL)
    sigma_eta : sub-Gaussian scale of the outcome noise
    lam : first-stage ridge
    L_z : bound on ``||z||_2``
    delta : failure probability, in (0, 1)
    """

    d_z: int
    sigma_eta: float
    lam: float
    L_z: float = 1.0
    delta: float = 0.05

    def __post_init__(self):
        problems = []
        if not isinstance(self.d_z, (int, np.integer)) or self.d_z < 1:
            problems.append(f"d_z must be a positive integer, got {self.d_z!r}")
        for name in ("sigma_eta", "lam", "L_z"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                problems.append(f"{name} must be positive, got {value!r}")
        if not 0.0 < self.delta < 1.0:
            problems.append(f"delta must lie in (0, 1), got {self.delta!r}")
        if problems:
            raise InvalidArgumentError("; ".join(problems))


def radius_b(params: ConfidenceParams, t: int, main_text: bool = False) -> float:
    """Squared radius from the trace bound on ``det(G_z)``.

    ``2 d_z sigma^2 log((1 + t L_z^2 / (d_z lam)) / delta)``. With
    ``main_text=True`` the leading constant ``2`` is replaced by ``1/4``.
    """
    if t < 0:
        raise InvalidArgumentError(f"t must be non-negative, got {t!r}")
    p = params
    const = 0.25 if main_text else 2.0
    growth = 1.0 + t * p.L_z ** 2 / (p.d_z * p.lam)
    return const * p.d_z * p.sigma_eta ** 2 * (math.log(growth) - math.log(p.delta))


def radius_b_prime(params: ConfidenceParams, logdet_Gz: float) -> float:
    """Squared radius from the realized log-determinant of ``G_z``.

    ``2 sigma^2 (logdet/2 - (d_z/2) log lam + log(1/delta))``.
    """
    p = params
    floor = p.d_z * math.log(p.lam)
    if logdet_Gz < floor - 1e-9 * max(1.0, abs(floor)):
        raise InvalidArgumentError(
            f"log det(G_z) = {logdet_Gz!r} is below its initial value {floor!r}; "
            "the design state is corrupted")
    half_ratio = max(0.5 * (logdet_Gz - floor), 0.0)
    return 2.0 * p.sigma_eta ** 2 * (half_ratio - math.log(p.delta))


def ellipsoid_contains(beta_hat, H: PosDefState, radius_sq: float, beta) -> bool:
    """Whether ``||beta_hat - beta||_H^2 <= radius_sq``."""
    diff = np.asarray(beta_hat, dtype=float) - np.asarray(beta, dtype=float)
    if diff.shape != (H.dim,):
        raise InvalidArgumentError(
            f"beta vectors must have length {H.dim}, got {np.shape(beta_hat)} and {np.shape(beta)}")
    return float(diff @ H.M @ diff) <= radius_sq
