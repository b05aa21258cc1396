"""Seeded generators for the synthetic instrumental-variable benchmarks.

Every generator returns the latent first- and second-stage noises alongside the
observed triple so that diagnostics can measure endogeneity directly. Samples
are built *from* the latents: ``x = Theta^T z + eps`` and ``y = beta^T x + eta``
hold bit-for-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError

REGRESSION = "regression"
BANDIT = "bandit"

# Stream identifiers mixed into the master seed; runs use (RUN_STREAM, index).
MODEL_STREAM = 0
RUN_STREAM = 1


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """Independent PCG64 substream for one replication."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(RUN_STREAM, int(run_index)))
    return np.random.Generator(np.random.PCG64(ss))


def model_rng(master_seed: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(MODEL_STREAM,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class GaussianIvConfig:
    """Gaussian two-stage model with ``k`` shared noise components.

    ``eta = c * (eta_tilde + sum_{i<k} eps_i)`` with ``eta_tilde ~ N(0, 1)``.
    """

    d_z: int = 50
    d_x: int = 50
    beta_mean: float = 10.0
    corr_count: int = 12
    noise_scale: float = 1.0 / math.sqrt(13.0)
    variant: str = REGRESSION

    def __post_init__(self):
        problems = []
        if self.d_z < 1 or self.d_x < 1:
            problems.append("d_z and d_x must be positive")
        if not 0 <= self.corr_count <= self.d_x:
            problems.append(f"corr_count must lie in [0, d_x={self.d_x}], got {self.corr_count}")
        if not self.noise_scale > 0:
            problems.append(f"noise_scale must be positive, got {self.noise_scale}")
        if self.variant not in (REGRESSION, BANDIT):
            problems.append(f"variant must be 'regression' or 'bandit', got {self.variant!r}")
        if problems:
            raise InvalidArgumentError("; ".join(problems))

    @classmethod
    def regression(cls, d: int = 50, **kw) -> "GaussianIvConfig":
        """Defaults of the correlated-noise regression benchmark (12 shared components, scale 1/sqrt(13))."""
        kw.setdefault("corr_count", min(12, d))
        kw.setdefault("noise_scale", 1.0 / math.sqrt(13.0))
        return cls(d_z=d, d_x=d, variant=REGRESSION, **kw)

    @classmethod
    def bandit(cls, d: int = 50, **kw) -> "GaussianIvConfig":
        """Defaults of the endogenous bandit benchmark (10 shared components, scale sqrt(0.1))."""
        kw.setdefault("corr_count", min(10, d))
        kw.setdefault("noise_scale", math.sqrt(0.1))
        return cls(d_z=d, d_x=d, variant=BANDIT, **kw)

    @property
    def eta_std(self) -> float:
        return self.noise_scale * math.sqrt(1 + self.corr_count)


@dataclass(frozen=True)
class PriceSalesConfig:
    """Price/sales model confounded by a rare ``Event``.

    ``Price = theta * MaterialCost + rho_F * Event + eps_F`` and
    ``Sales = beta * Price + rho_S * Event + eta_S``.

    The noises have non-zero means. With ``intercept=True`` (the default) a
    constant column is prepended to both stages and the means are absorbed into
    the coefficients, so the latent noises are centred. With
    ``intercept=False`` the model is used exactly as written, without constants.
    """

    theta: float = 1.0
    beta: float = -1.0
    rho_F: float = 0.0
    rho_S: float = 0.0
    event_prob: float = 0.01
    eps_F_mean: float = 5.0
    eps_F_sd: float = 1.0
    eta_S_mean: float = 100.0
    eta_S_sd: float = 1.0
    intercept: bool = True

    def __post_init__(self):
        problems = []
        if not 0.0 <= self.event_prob <= 1.0:
            problems.append(f"event_prob must lie in [0, 1], got {self.event_prob}")
        if self.eps_F_sd <= 0 or self.eta_S_sd <= 0:
            problems.append("noise standard deviations must be positive")
        if self.rho_F < 0 or self.rho_S < 0:
            problems.append("rho_F and rho_S must be non-negative")
        if problems:
            raise InvalidArgumentError("; ".join(problems))

    @property
    def dim(self) -> int:
        return 2 if self.intercept else 1


@dataclass(frozen=True)
class IvModel:
    """True parameters: ``beta`` (d_x,) and ``theta`` (d_z, d_x)."""

    beta: np.ndarray
    theta: np.ndarray

    @property
    def d_z(self) -> int:
        return self.theta.shape[0]

    @property
    def d_x(self) -> int:
        return self.theta.shape[1]


@dataclass
class Sample:
    z: np.ndarray
    x: np.ndarray
    y: float
    latent_eps: np.ndarray
    latent_eta: float


@dataclass
class Stream:
    """A block of ``T`` samples stored column-wise."""

    Z: np.ndarray
    X: np.ndarray
    y: np.ndarray
    eps: np.ndarray
    eta: np.ndarray

    def __len__(self):
        return self.y.shape[0]

    def __getitem__(self, t) -> Sample:
        return Sample(self.Z[t], self.X[t], float(self.y[t]), self.eps[t], float(self.eta[t]))

    def __iter__(self):
        return (self[t] for t in range(len(self)))


def draw_model(config: GaussianIvConfig, seed) -> IvModel:
    """``beta_i ~ N(beta_mean, 1)`` and ``Theta_ij ~ N(0, 1)``, deterministic in ``seed``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else model_rng(seed)
    beta = rng.normal(config.beta_mean, 1.0, size=config.d_x)
    theta = rng.normal(0.0, 1.0, size=(config.d_z, config.d_x))
    return IvModel(beta=beta, theta=theta)


def _gaussian_block(config: GaussianIvConfig, model: IvModel, rng, shape):
    """Draw z, eps, eta with leading ``shape`` and assemble x, y."""
    z = rng.standard_normal(shape + (config.d_z,))
    eps = rng.standard_normal(shape + (config.d_x,))
    eta_tilde = rng.standard_normal(shape)
    k = config.corr_count
    eta = config.noise_scale * (eta_tilde + eps[..., :k].sum(axis=-1))
    x = z @ model.theta + eps
    y = x @ model.beta + eta
    return z, x, y, eps, eta


def sample_regression(config: GaussianIvConfig, model: IvModel, rng) -> Sample:
    z, x, y, eps, eta = _gaussian_block(config, model, rng, ())
    return Sample(z, x, float(y), eps, float(eta))


def regression_stream(config: GaussianIvConfig, model: IvModel, rng, T: int) -> Stream:
    """``T`` i.i.d. samples drawn in one vectorized block."""
    z, x, y, eps, eta = _gaussian_block(config, model, rng, (T,))
    return Stream(z, x, y, eps, eta)


def price_sales_model(config: PriceSalesConfig) -> IvModel:
    """True coefficients in the (optionally intercept-augmented) layout."""
    c = config
    if not c.intercept:
        return IvModel(beta=np.array([c.beta]), theta=np.array([[c.theta]]))
    eps_mean = c.eps_F_mean + c.rho_F * c.event_prob
    eta_mean = c.eta_S_mean + c.rho_S * c.event_prob
    theta = np.array([[1.0, eps_mean], [0.0, c.theta]])
    return IvModel(beta=np.array([eta_mean, c.beta]), theta=theta)


def price_sales_stream(config: PriceSalesConfig, rng, T: int) -> Stream:
    c = config
    event = (rng.random(T) < c.event_prob).astype(float)
    cost = rng.standard_normal(T)
    eps_F = rng.normal(c.eps_F_mean, c.eps_F_sd, size=T)
    eta_S = rng.normal(c.eta_S_mean, c.eta_S_sd, size=T)
    model = price_sales_model(c)
    eps1 = c.rho_F * event + eps_F
    eta = c.rho_S * event + eta_S
    if c.intercept:
        eps1 = eps1 - (c.eps_F_mean + c.rho_F * c.event_prob)
        eta = eta - (c.eta_S_mean + c.rho_S * c.event_prob)
        Z = np.column_stack([np.ones(T), cost])
        eps = np.column_stack([np.zeros(T), eps1])
    else:
        Z = cost[:, None]
        eps = eps1[:, None]
    X = Z @ model.theta + eps
    y = X @ model.beta + eta
    return Stream(Z, X, y, eps, eta)


def sample_price_sales(config: PriceSalesConfig, rng) -> Sample:
    """One draw of the model exactly as written: scalar ``z = MaterialCost``,
    ``x = Price``, ``y = Sales``, uncentred latents, no constant column."""
    return price_sales_stream(replace(config, intercept=False), rng, 1)[0]


def theoretical_gamma(config: GaussianIvConfig) -> np.ndarray:
    """``E[eta * eps]``: equal to ``noise_scale`` on the shared components, zero elsewhere."""
    gamma = np.zeros(config.d_x)
    gamma[: config.corr_count] = config.noise_scale
    return gamma


@dataclass
class ArmContexts:
    """Contexts for one bandit round.

    ``xs`` is revealed before the choice; ``zs`` and ``etas`` are revealed only
    for the chosen arm.
    """

    xs: np.ndarray
    zs: np.ndarray
    eps: np.ndarray = field(repr=False, default=None)
    etas: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.xs.ndim != 2 or self.xs.shape[0] < 1:
            raise InvalidArgumentError("arm set must be a non-empty (K, d_x) array")
        if self.zs.shape[0] != self.xs.shape[0]:
            raise InvalidArgumentError("xs and zs must describe the same arms")

    @property
    def K(self) -> int:
        return self.xs.shape[0]


class BanditEnv:
    """Endogenous linear bandit: ``K`` i.i.d. arms drawn from the Gaussian model each round."""

    def __init__(self, config: GaussianIvConfig, model: IvModel, K: int = 20):
        if K < 1:
            raise InvalidArgumentError(f"K must be positive, got {K}")
        self.config = config
        self.model = model
        self.K = int(K)

    def contexts(self, rng) -> ArmContexts:
        z, x, _, eps, eta = _gaussian_block(self.config, self.model, rng, (self.K,))
        return ArmContexts(xs=x, zs=z, eps=eps, etas=eta)

    def reward(self, arms: ArmContexts, a: int) -> float:
        return float(arms.xs[a] @ self.model.beta + arms.etas[a])

    def best_arm(self, arms: ArmContexts) -> int:
        return int(np.argmax(arms.xs @ self.model.beta))
