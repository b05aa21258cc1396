"""Streaming estimators: online 2SLS (O2SLS), online ridge and the
Vovk-Azoury-Warmuth forecaster.

All estimators follow the same protocol: ``predict(x)`` uses only data ingested
so far (proper online learning), ``ingest(...)`` absorbs one observation and
``beta`` is the current coefficient vector (zeros before any data).
"""
from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .errors import InvalidArgumentError, NumericalError
from .linalg import PosDefState

EXACT = "exact"
FROZEN = "frozen"
MODES = (EXACT, FROZEN)


def _vec(v, dim, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0 and dim == 1:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise InvalidArgumentError(
            f"{name} must have length {dim}, got shape {arr.shape}")
    return arr


def second_stage_ridge(trace_H: float, d_x: int, mu: float) -> float:
    """Numerical ridge added before the second-stage solve.

    Scales with the average diagonal of ``H`` so it stays negligible relative to
    the data once the design has full rank.
    """
    return mu * max(1.0, float(trace_H) / d_x)


class FirstStage:
    """Multi-output ridge regression of ``x`` on ``z``.

    ``theta`` is the (d_z, d_x) estimate ``G_z^{-1} S_zx``. With
    ``recursive=True`` it is advanced by the O(d_z^2 + d_z d_x) update
    ``theta += G_z^{-1} z (x - theta^T z)^T`` and re-synchronized whenever the
    Gram inverse is refreshed; otherwise it is re-solved from the sufficient
    statistics each step with a Cholesky factorization of ``G_z``.
    """

    def __init__(self, d_z: int, d_x: int, lam: float = 1e-3, recursive: bool = False):
        self.d_z = int(d_z)
        self.d_x = int(d_x)
        self.lam = float(lam)
        self.recursive = recursive
        self.Gz = PosDefState(self.d_z, self.lam)
        self.S_zx = np.zeros((self.d_z, self.d_x))
        self.theta = np.zeros((self.d_z, self.d_x))
        self.chol = np.sqrt(self.lam) * np.eye(self.d_z)
        self.t = 0

    def ingest(self, z: np.ndarray, x: np.ndarray) -> None:
        self.Gz.update(z)
        self.S_zx += np.outer(z, x)
        if not self.recursive:
            # Solve from the additive Gram so theta carries no inverse drift.
            self.chol = np.linalg.cholesky(self.Gz.M)
            self.theta = sla.cho_solve((self.chol, True), self.S_zx)
        elif self.Gz.updates_since_refresh:
            gz = self.Gz.M_inv @ z
            self.theta += np.outer(gz, x - self.theta.T @ z)
        else:
            self.theta = self.Gz.M_inv @ self.S_zx
        self.t += 1

    def predict(self, z) -> np.ndarray:
        """First-stage fitted covariate ``theta^T z``."""
        return self.theta.T @ _vec(z, self.d_z, "z")


class O2SLS:
    """Online two-stage least squares.

    Parameters
    ----------
    d_z, d_x : int
        Instrument and covariate dimensions.
    lam : float
        First-stage ridge; ``G_z`` starts at ``lam * I``.
    mu : float
        Relative second-stage ridge. In exact mode the solve uses
        ``H + mu * max(1, tr(H)/d_x) * I``.
    mode : {"exact", "frozen"}
        ``exact`` re-solves the batch 2SLS system from sufficient statistics
        after every observation, i.e. every past row is re-projected with the
        latest first stage. ``frozen`` runs the O(d^2) recursion in which row
        ``t`` is projected once with the first stage available at time ``t-1``.
    frozen_ridge : float, optional
        Initial diagonal of the frozen-mode second-stage Gram. Defaults to
        ``lam``.
    """

    def __init__(self, d_z: int, d_x: int, lam: float = 1e-3, mu: float = 1e-10,
                 mode: str = EXACT, frozen_ridge: float | None = None):
        if mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {mode!r}")
        if mu < 0:
            raise InvalidArgumentError(f"mu must be non-negative, got {mu!r}")
        self.d_z = int(d_z)
        self.d_x = int(d_x)
        self.lam = float(lam)
        self.mu = float(mu)
        self.mode = mode
        self.first = FirstStage(d_z, d_x, lam, recursive=(mode == FROZEN))
        self.s_zy = np.zeros(self.d_z)
        self.beta = np.zeros(self.d_x)
        if mode == FROZEN:
            self.H_hat = PosDefState(self.d_x, frozen_ridge if frozen_ridge else self.lam)
            self.s_xhat_y = np.zeros(self.d_x)
        else:
            # Before any data H is zero, so only the numerical ridge remains.
            self.H_hat = PosDefState(self.d_x, self.mu if self.mu > 0 else 1e-10)
        self.mu_eff = self.H_hat.ridge

    @property
    def t(self) -> int:
        return self.first.t

    @property
    def theta(self) -> np.ndarray:
        return self.first.theta

    @property
    def Gz(self) -> PosDefState:
        return self.first.Gz

    def predict(self, x) -> float:
        return float(self.beta @ _vec(x, self.d_x, "x"))

    def ingest(self, z, x, y: float) -> "O2SLS":
        z = _vec(z, self.d_z, "z")
        x = _vec(x, self.d_x, "x")
        y = float(y)
        if self.mode == FROZEN:
            self._ingest_frozen(z, x, y)
        else:
            self.first.ingest(z, x)
            self.s_zy += z * y
            self._solve_exact()
        return self

    def _solve_exact(self) -> None:
        # With G_z = L L^T, A = L^{-1} S_zx and b = L^{-1} s_zy give
        # H = A^T A and theta^T s_zy = A^T b, so beta is the ridge least-squares
        # solution of A beta ~ b. Solving that by QR avoids squaring cond(A).
        L = self.first.chol
        A = sla.solve_triangular(L, self.first.S_zx, lower=True)
        b = sla.solve_triangular(L, self.s_zy, lower=True)
        self.mu_eff = second_stage_ridge(np.sum(A * A), self.d_x, self.mu)
        stacked = np.vstack([A, np.sqrt(self.mu_eff) * np.eye(self.d_x)])
        Q, R = np.linalg.qr(stacked)
        diag = np.abs(np.diag(R))
        if not np.all(np.isfinite(R)) or diag.min() <= diag.max() * 1e-15:
            eig = diag ** 2
            raise NumericalError(
                "second-stage system is singular",
                {"t": self.t, "eig_min": float(eig.min()), "eig_max": float(eig.max()),
                 "cond": float(eig.max() / eig.min()) if eig.min() > 0 else float("inf")})
        self.beta = sla.solve_triangular(R, Q[: self.d_z].T @ b, lower=False)
        Hr = R.T @ R
        self.H_hat = PosDefState.from_factor(0.5 * (Hr + Hr.T), (R, False), self.mu_eff)

    def _ingest_frozen(self, z, x, y) -> None:
        xhat = self.first.theta.T @ z          # projected with theta_{t-1}
        self.first.ingest(z, x)
        self.s_zy += z * y
        G = self.H_hat
        G.update(xhat)
        self.s_xhat_y += xhat * y
        if G.updates_since_refresh == 0:
            self.beta = G.M_inv @ self.s_xhat_y
        else:
            self.beta = self.beta + G.M_inv @ xhat * (y - xhat @ self.beta)

    def design_inv_norms(self, X) -> np.ndarray:
        """``||x_a||_{H^{-1}}`` for each row of ``X`` under the current design."""
        return self.H_hat.inv_norms(X)


class OnlineRidge:
    """``beta = (X^T X + lam I)^{-1} X^T y`` maintained incrementally."""

    def __init__(self, d_x: int, lam: float = 1e-3):
        self.d_x = int(d_x)
        self.lam = float(lam)
        self.Gx = PosDefState(self.d_x, self.lam)
        self.s_xy = np.zeros(self.d_x)
        self.beta = np.zeros(self.d_x)
        self.t = 0

    def predict(self, x) -> float:
        return float(self.beta @ _vec(x, self.d_x, "x"))

    def ingest(self, x, y: float, z=None) -> "OnlineRidge":
        # z is accepted and ignored so every estimator shares one call shape.
        x = _vec(x, self.d_x, "x")
        self.Gx.update(x)
        self.s_xy += x * float(y)
        self.beta = self.Gx.M_inv @ self.s_xy
        self.t += 1
        return self

    def design_inv_norms(self, X) -> np.ndarray:
        return self.Gx.inv_norms(X)


class VAWR(OnlineRidge):
    """Vovk-Azoury-Warmuth forecaster.

    Shares ridge's accumulators but folds the current covariate into the design
    before predicting: ``x^T (X^T X + x x^T + lam I)^{-1} X^T y``. By
    Sherman-Morrison this equals ``x^T beta_ridge / (1 + x^T G^{-1} x)``.
    """

    def predict(self, x) -> float:
        x = _vec(x, self.d_x, "x")
        q = float(x @ self.Gx.M_inv @ x)
        return float(x @ self.beta) / (1.0 + q)

    def estimate_for(self, x) -> np.ndarray:
        """Coefficient vector used for the prediction at ``x``."""
        x = _vec(x, self.d_x, "x")
        u = self.Gx.M_inv @ x
        q = float(x @ u)
        return self.beta - u * (u @ self.s_xy) / (1.0 + q)


def batch_2sls(Z, X, y, lam: float = 0.0, mu: float = 0.0) -> np.ndarray:
    """Offline 2SLS with the same regularization as :class:`O2SLS` exact mode.

    ``theta = (Z^T Z + lam I)^{-1} Z^T X``,
    ``beta = (theta^T (Z^T Z + lam I) theta + mu' I)^{-1} theta^T Z^T y``.

    Computed by projection: with ``Z`` augmented by ``sqrt(lam) I`` rows, the
    first stage is a least-squares fit and the second stage a least-squares
    regression of ``y`` on the fitted covariates, both solved with ``lstsq``.
    """
    Z = np.asarray(Z, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d_z, d_x = Z.shape[1], X.shape[1]
    Za = np.vstack([Z, np.sqrt(lam) * np.eye(d_z)])
    Xa = np.vstack([X, np.zeros((d_z, d_x))])
    ya = np.concatenate([y, np.zeros(d_z)])
    theta = np.linalg.lstsq(Za, Xa, rcond=None)[0]
    Xhat = Za @ theta
    mu_eff = second_stage_ridge(np.sum(Xhat * Xhat), d_x, mu)
    A = np.vstack([Xhat, np.sqrt(mu_eff) * np.eye(d_x)])
    return np.linalg.lstsq(A, np.concatenate([ya, np.zeros(d_x)]), rcond=None)[0]


def batch_ridge(X, y, lam: float) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.linalg.solve(X.T @ X + lam * np.eye(X.shape[1]), X.T @ np.asarray(y, dtype=float))
