"""Linear bandits with endogenous rewards: OFUL-IV and single-stage OFUL.

Each round the agent sees every arm's covariate ``x_{t,a}``, picks an arm by the
optimistic index ``<x_a, beta> + sqrt(b') ||x_a||_{H^{-1}}``, then observes the
chosen arm's instrument and reward and updates its estimator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .confidence import ConfidenceParams, radius_b_prime
from .dgp import ArmContexts, BanditEnv
from .errors import InvalidArgumentError
from .estimators import O2SLS, OnlineRidge
from .regret import identification_increment, mse, oracle_increment

__all__ = ["ArmContexts", "PolicyState", "RoundRecord", "make_oful_iv", "make_oful",
           "optimistic_indices", "oful_iv_select", "oful_select", "bandit_round"]


@dataclass
class PolicyState:
    estimator: Union[O2SLS, OnlineRidge]
    conf: ConfidenceParams
    round: int = 0


@dataclass
class RoundRecord:
    t: int
    chosen_arm: int
    prediction: float
    y: float
    ident_inc: float
    oracle_inc: float
    pseudo_regret: float
    mse: float = float("nan")
    beta: Optional[np.ndarray] = field(default=None, repr=False)


def make_oful_iv(d_z: int, d_x: int, sigma_eta: float, lam: float = 0.1,
                 delta: float = 0.05, mu: float = 1e-10, mode: str = "exact") -> PolicyState:
    conf = ConfidenceParams(d_z=d_z, sigma_eta=sigma_eta, lam=lam, delta=delta)
    return PolicyState(O2SLS(d_z, d_x, lam=lam, mu=mu, mode=mode), conf)


def make_oful(d_x: int, sigma_eta: float, lam: float = 0.1, delta: float = 0.05) -> PolicyState:
    conf = ConfidenceParams(d_z=d_x, sigma_eta=sigma_eta, lam=lam, delta=delta)
    return PolicyState(OnlineRidge(d_x, lam=lam), conf)


def optimistic_indices(xs, beta, inv_norms, radius_sq: float) -> np.ndarray:
    return xs @ beta + np.sqrt(radius_sq) * inv_norms


def _check_arms(arms: ArmContexts, d_x: int):
    if arms.K < 1:
        raise InvalidArgumentError("empty arm set")
    if arms.xs.shape[1] != d_x:
        raise InvalidArgumentError(f"arm covariates must have dimension {d_x}")


def policy_indices(state: PolicyState, arms: ArmContexts) -> np.ndarray:
    est = state.estimator
    _check_arms(arms, est.d_x)
    if isinstance(est, O2SLS):
        radius_sq = radius_b_prime(state.conf, est.Gz.logdet)
    else:
        radius_sq = radius_b_prime(state.conf, est.Gx.logdet)
    return optimistic_indices(arms.xs, est.beta, est.design_inv_norms(arms.xs), radius_sq)


def oful_iv_select(state: PolicyState, arms: ArmContexts) -> int:
    """Arm maximizing the O2SLS-centred optimistic index; ties go to the lowest index."""
    if not isinstance(state.estimator, O2SLS):
        raise InvalidArgumentError("OFUL-IV requires an O2SLS estimator")
    return int(np.argmax(policy_indices(state, arms)))


def oful_select(state: PolicyState, arms: ArmContexts) -> int:
    """Arm maximizing the ridge-centred optimistic index (``z`` is ignored)."""
    if not isinstance(state.estimator, OnlineRidge):
        raise InvalidArgumentError("OFUL requires a ridge estimator")
    return int(np.argmax(policy_indices(state, arms)))


def select(state: PolicyState, arms: ArmContexts) -> int:
    if isinstance(state.estimator, O2SLS):
        return oful_iv_select(state, arms)
    return oful_select(state, arms)


def bandit_round(env: BanditEnv, state: PolicyState, rng,
                 chooser: Optional[Callable[[PolicyState, ArmContexts], int]] = None,
                 log_beta: bool = False) -> tuple[PolicyState, RoundRecord]:
    """Play one round of the protocol and update ``state`` in place.

    ``chooser`` overrides the policy's own selection rule (used for oracle and
    uniform baselines); the estimator is updated either way.
    """
    arms = env.contexts(rng)
    a = (chooser or select)(state, arms)
    if not 0 <= a < arms.K:
        raise InvalidArgumentError(f"chosen arm {a} outside [0, {arms.K})")
    est = state.estimator
    beta_true = env.model.beta
    x = arms.xs[a]
    y = env.reward(arms, a)
    beta_prev = est.beta.copy()
    best = env.best_arm(arms)
    record = RoundRecord(
        t=state.round + 1,
        chosen_arm=a,
        prediction=float(x @ beta_prev),
        y=y,
        ident_inc=identification_increment(beta_prev, beta_true, x),
        oracle_inc=oracle_increment(y, x, beta_prev, beta_true),
        pseudo_regret=float(beta_true @ (arms.xs[best] - x)),
    )
    if isinstance(est, O2SLS):
        est.ingest(arms.zs[a], x, y)
    else:
        est.ingest(x, y)
    state.round += 1
    record.mse = mse(est.beta, beta_true)
    if log_beta:
        record.beta = est.beta.copy()
    return state, record


def oracle_chooser(env: BanditEnv) -> Callable[[PolicyState, ArmContexts], int]:
    return lambda state, arms: env.best_arm(arms)


def uniform_chooser(rng) -> Callable[[PolicyState, ArmContexts], int]:
    """Uniform random arms from a generator separate from the environment's."""
    return lambda state, arms: int(rng.integers(arms.K))
