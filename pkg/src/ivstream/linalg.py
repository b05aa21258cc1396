"""Positive-definite accumulators with a maintained inverse and log-determinant.

A :class:`PosDefState` holds ``M = ridge * I + sum_s v_s v_s^T``. ``M`` is always
stored additively; the inverse is kept current with Sherman-Morrison and the
log-determinant with the matrix determinant lemma. Every ``REFRESH_EVERY``
updates both are recomputed from a Cholesky factorization of ``M`` to bound
floating-point drift.
"""
from __future__ import annotations

import numpy as np
from scipy import linalg as sla

from .errors import InvalidArgumentError, NumericalError

REFRESH_EVERY = 512
_JITTER = 1e-12


def _as_vector(v, dim: int, name: str = "v") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise InvalidArgumentError(
            f"{name} must be a vector of length {dim}, got shape {arr.shape}")
    return arr


def cholesky_inverse(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Return ``(M^{-1}, log det M)`` via Cholesky.

    If the factorization fails, ``1e-12 * trace(M) / dim`` is added to the
    diagonal once and retried; a second failure raises :class:`NumericalError`.
    """
    dim = M.shape[0]
    try:
        c, lower = sla.cho_factor(M, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError):
        jitter = _JITTER * max(np.trace(M), 0.0) / dim
        try:
            c, lower = sla.cho_factor(M + jitter * np.eye(dim), lower=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            eig = np.linalg.eigvalsh(0.5 * (M + M.T)) if np.all(np.isfinite(M)) else None
            diag = {"dim": dim}
            if eig is not None:
                diag.update(eig_min=float(eig[0]), eig_max=float(eig[-1]))
            raise NumericalError("matrix is not positive definite", diag) from exc
    inv = sla.cho_solve((c, lower), np.eye(dim))
    inv = 0.5 * (inv + inv.T)
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    return inv, logdet


class PosDefState:
    """Symmetric positive-definite Gram accumulator.

    Attributes
    ----------
    dim : int
    ridge : float
        Initial diagonal; lower bound on the smallest eigenvalue of ``M``.
    M, M_inv : ndarray of shape (dim, dim)
    logdet : float
    updates_since_refresh : int
    n_updates : int
        Total number of rank-one updates applied.
    """

    def __init__(self, dim: int, ridge: float):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise InvalidArgumentError(f"dim must be a positive integer, got {dim!r}")
        if not np.isfinite(ridge) or ridge <= 0:
            raise InvalidArgumentError(f"ridge must be positive, got {ridge!r}")
        self.dim = int(dim)
        self.ridge = float(ridge)
        self.M = self.ridge * np.eye(self.dim)
        self.M_inv = np.eye(self.dim) / self.ridge
        self.logdet = self.dim * np.log(self.ridge)
        self.updates_since_refresh = 0
        self.n_updates = 0

    @classmethod
    def from_matrix(cls, M, ridge: float) -> "PosDefState":
        """Wrap a full symmetric matrix, factorizing it immediately.

        ``ridge`` records the diagonal that was added to make ``M`` definite.
        """
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidArgumentError(f"M must be square, got shape {M.shape}")
        state = cls(M.shape[0], ridge)
        state.M = 0.5 * (M + M.T)
        state.refresh()
        return state

    @classmethod
    def from_factor(cls, M: np.ndarray, factor, ridge: float) -> "PosDefState":
        """Wrap ``M`` given a triangular factor ``(C, lower)``.

        ``C`` may come from ``scipy.linalg.cho_factor`` or be the ``R`` of a QR
        decomposition with ``M = R^T R`` (pass ``lower=False``).
        """
        state = cls(M.shape[0], ridge)
        state.M = M
        inv = sla.cho_solve(factor, np.eye(state.dim))
        state.M_inv = 0.5 * (inv + inv.T)
        state.logdet = 2.0 * float(np.sum(np.log(np.abs(np.diag(factor[0])))))
        return state

    def copy(self) -> "PosDefState":
        other = PosDefState.__new__(PosDefState)
        other.dim = self.dim
        other.ridge = self.ridge
        other.M = self.M.copy()
        other.M_inv = self.M_inv.copy()
        other.logdet = self.logdet
        other.updates_since_refresh = self.updates_since_refresh
        other.n_updates = self.n_updates
        return other

    def update(self, v) -> "PosDefState":
        """Apply ``M <- M + v v^T`` in place and return ``self``."""
        v = _as_vector(v, self.dim)
        u = self.M_inv @ v
        q = float(v @ u)
        self.M += np.outer(v, v)
        self.M_inv -= np.outer(u, u) / (1.0 + q)
        self.logdet += np.log1p(q)
        self.updates_since_refresh += 1
        self.n_updates += 1
        if self.updates_since_refresh >= REFRESH_EVERY:
            self.refresh()
        return self

    def refresh(self) -> "PosDefState":
        """Recompute ``M_inv`` and ``logdet`` directly from ``M``."""
        self.M_inv, self.logdet = cholesky_inverse(self.M)
        self.updates_since_refresh = 0
        return self

    def quad_norm(self, x, use_inverse: bool = False) -> float:
        """``sqrt(x^T M x)``, or ``sqrt(x^T M^{-1} x)`` when ``use_inverse``."""
        x = _as_vector(x, self.dim, "x")
        A = self.M_inv if use_inverse else self.M
        return float(np.sqrt(max(float(x @ A @ x), 0.0)))

    def inv_norms(self, X) -> np.ndarray:
        """Row-wise ``||x_a||_{M^{-1}}`` for a (K, dim) matrix of vectors."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise InvalidArgumentError(f"expected shape (K, {self.dim}), got {X.shape}")
        q = np.einsum("ij,jk,ik->i", X, self.M_inv, X)
        return np.sqrt(np.maximum(q, 0.0))

    def __repr__(self):
        return (f"PosDefState(dim={self.dim}, ridge={self.ridge:g}, "
                f"logdet={self.logdet:.6g}, n_updates={self.n_updates})")


def posdef_init(dim: int, ridge: float) -> PosDefState:
    return PosDefState(dim, ridge)


def rank_one_update(state: PosDefState, v) -> PosDefState:
    return state.update(v)


def quad_norm(state: PosDefState, x, use_inverse: bool = False) -> float:
    return state.quad_norm(x, use_inverse)
