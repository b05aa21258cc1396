"""Identification, oracle and population regret; MSE and R^2."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVarianceError, InsufficientDataError, InvalidArgumentError


def _same_shape(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise InvalidArgumentError(f"dimension mismatch: {sorted(shapes)}")


def identification_increment(beta_prev, beta_true, x) -> float:
    """``(x^T (beta_prev - beta_true))^2``."""
    beta_prev, beta_true, x = (np.asarray(a, dtype=float) for a in (beta_prev, beta_true, x))
    _same_shape(beta_prev, beta_true, x)
    return float(x @ (beta_prev - beta_true)) ** 2


def oracle_increment(y: float, x, beta_prev, beta_true) -> float:
    """``(y - x^T beta_prev)^2 - (y - x^T beta_true)^2``; may be negative."""
    beta_prev, beta_true, x = (np.asarray(a, dtype=float) for a in (beta_prev, beta_true, x))
    _same_shape(beta_prev, beta_true, x)
    return (y - float(x @ beta_prev)) ** 2 - (y - float(x @ beta_true)) ** 2


@dataclass
class RegretAccumulator:
    """Running identification and oracle regret with a per-step log."""

    ident_cum: float = 0.0
    oracle_cum: float = 0.0
    step: int = 0
    per_step_log: list = field(default_factory=list)

    def add(self, ident_inc: float, oracle_inc: float) -> None:
        if ident_inc < 0:
            raise InvalidArgumentError(f"identification increment must be >= 0, got {ident_inc}")
        self.ident_cum += ident_inc
        self.oracle_cum += oracle_inc
        self.step += 1
        self.per_step_log.append((ident_inc, oracle_inc))

    def observe(self, y: float, x, beta_prev, beta_true) -> tuple[float, float]:
        inc = (identification_increment(beta_prev, beta_true, x),
               oracle_increment(y, x, beta_prev, beta_true))
        self.add(*inc)
        return inc


def population_regret(X, y, predictions, ridge_mu: float = 1e-10) -> float:
    """Excess loss of ``predictions`` over the best fixed linear predictor in hindsight."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    if not (X.shape[0] == y.shape[0] == predictions.shape[0]):
        raise InvalidArgumentError("stream and predictions must have equal length")
    T, d = X.shape
    if T < d:
        raise InsufficientDataError(f"need at least {d} observations, got {T}")
    beta_T = np.linalg.solve(X.T @ X + ridge_mu * np.eye(d), X.T @ y)
    return float(np.sum((y - predictions) ** 2) - np.sum((y - X @ beta_T) ** 2))


def mse(beta_hat, beta_true) -> float:
    """Squared Euclidean error ``||beta_hat - beta_true||^2``."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    _same_shape(beta_hat, beta_true)
    return float(np.sum((beta_hat - beta_true) ** 2))


def r_squared(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    _same_shape(y, y_hat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 0.0:
        raise DegenerateVarianceError("outcome is constant; R^2 undefined")
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / ss_tot


def mean_std(values, axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Mean and sample standard deviation (ddof=1; zero for a single run)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    mean = values.mean(axis=axis)
    std = values.std(axis=axis, ddof=1) if n > 1 else np.zeros_like(mean)
    return mean, std
