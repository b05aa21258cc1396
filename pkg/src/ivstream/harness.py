"""Seeded multi-run experiments, aggregation, diagnostics and rate checks.

Each replication is a pure function of ``(config, run_index)``: its random
stream is ``SeedSequence(seed, spawn_key=(1, run_index))`` and the true model
is drawn once per experiment from ``spawn_key=(0,)``. Runs can therefore be
executed in any order and on any number of worker processes without changing
a single bit of the output.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence, Union

import numpy as np

from . import dgp as dgp_mod
from .bandit import bandit_round, make_oful, make_oful_iv
from .dgp import BanditEnv, GaussianIvConfig, PriceSalesConfig, Stream
from .errors import ConfigError, InsufficientDataError, InvalidArgumentError, NumericalError
from .estimators import VAWR, O2SLS, OnlineRidge, batch_2sls, batch_ridge
from .regret import identification_increment, mean_std, mse, oracle_increment, r_squared

logger = logging.getLogger(__name__)

REGRESSION = "regression"
PRICE_SALES = "price_sales"
BANDIT = "bandit"
REALDATA = "realdata"
KINDS = (REGRESSION, PRICE_SALES, BANDIT, REALDATA)

ALGORITHMS = {
    REGRESSION: ("o2sls", "ridge", "vawr"),
    PRICE_SALES: ("o2sls", "ridge", "vawr"),
    BANDIT: ("oful_iv", "oful"),
    REALDATA: ("o2sls", "ridge"),
}

DEFAULTS = {
    REGRESSION: dict(lam=1e-3, n_runs=30, algorithms=("o2sls", "ridge", "vawr")),
    PRICE_SALES: dict(lam=1e-3, n_runs=30, algorithms=("o2sls", "ridge")),
    BANDIT: dict(lam=1e-1, n_runs=100, algorithms=("oful_iv", "oful")),
    REALDATA: dict(lam=1e-3, n_runs=1, algorithms=("o2sls", "ridge")),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    dgp: Union[GaussianIvConfig, PriceSalesConfig, None] = None
    T: int = 1000
    n_runs: int = 30
    seed: int = 0
    algorithms: tuple = ("o2sls", "ridge", "vawr")
    lam: float = 1e-3
    mu: float = 1e-10
    delta: float = 0.05
    mode: str = "exact"
    arms: int = 20
    sigma_eta: Optional[float] = None
    data_path: Optional[str] = None
    log_beta: bool = False
    output: Optional[str] = None

    @classmethod
    def for_kind(cls, kind: str, **overrides) -> "ExperimentConfig":
        """Config with the per-kind defaults filled in."""
        if kind not in KINDS:
            raise ConfigError([f"kind must be one of {KINDS}, got {kind!r}"])
        base = dict(DEFAULTS[kind])
        if "dgp" not in overrides:
            if kind == REGRESSION:
                base["dgp"] = GaussianIvConfig.regression()
            elif kind == BANDIT:
                base["dgp"] = GaussianIvConfig.bandit()
            elif kind == PRICE_SALES:
                base["dgp"] = PriceSalesConfig()
        base.update(overrides)
        config = cls(kind=kind, **base)
        config.validate()
        return config

    def problems(self) -> list[str]:
        errs = []
        if self.kind not in KINDS:
            return [f"kind must be one of {KINDS}, got {self.kind!r}"]
        if self.T < 1:
            errs.append(f"T must be >= 1, got {self.T}")
        if self.n_runs < 1:
            errs.append(f"n_runs must be >= 1, got {self.n_runs}")
        if not self.algorithms:
            errs.append("algorithms must not be empty")
        allowed = ALGORITHMS[self.kind]
        for a in self.algorithms:
            if a not in allowed:
                errs.append(f"algorithm {a!r} is incompatible with kind={self.kind!r} "
                            f"(allowed: {', '.join(allowed)})")
        if len(set(self.algorithms)) != len(self.algorithms):
            errs.append("algorithms must not repeat")
        if not self.lam > 0:
            errs.append(f"lambda must be positive, got {self.lam}")
        if self.mu < 0:
            errs.append(f"mu must be non-negative, got {self.mu}")
        if not 0 < self.delta < 1:
            errs.append(f"delta must lie in (0, 1), got {self.delta}")
        if self.mode not in ("exact", "frozen"):
            errs.append(f"mode must be 'exact' or 'frozen', got {self.mode!r}")
        if self.arms < 1:
            errs.append(f"arms must be >= 1, got {self.arms}")
        if self.sigma_eta is not None and not self.sigma_eta > 0:
            errs.append(f"sigma_eta must be positive, got {self.sigma_eta}")
        want = {REGRESSION: GaussianIvConfig, BANDIT: GaussianIvConfig,
                PRICE_SALES: PriceSalesConfig}.get(self.kind)
        if want is not None and not isinstance(self.dgp, want):
            errs.append(f"kind={self.kind!r} needs a {want.__name__} dgp")
        return errs

    def validate(self) -> "ExperimentConfig":
        errs = self.problems()
        if errs:
            raise ConfigError(errs)
        return self


@dataclass
class RunLog:
    """Per-step log of one algorithm in one replication."""

    algorithm: str
    run_id: int
    prediction: np.ndarray
    ident_inc: np.ndarray
    oracle_inc: np.ndarray
    mse: np.ndarray
    chosen_arm: Optional[np.ndarray] = None
    pseudo_regret: Optional[np.ndarray] = None
    betas: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return self.prediction.shape[0]

    @property
    def ident_cum(self) -> np.ndarray:
        return np.cumsum(self.ident_inc)

    @property
    def oracle_cum(self) -> np.ndarray:
        return np.cumsum(self.oracle_inc)

    @property
    def regret_cum(self) -> Optional[np.ndarray]:
        return None if self.pseudo_regret is None else np.cumsum(self.pseudo_regret)

    def metrics(self) -> dict:
        out = {"ident_inc": self.ident_inc, "ident_cum": self.ident_cum,
               "oracle_inc": self.oracle_inc, "oracle_cum": self.oracle_cum, "mse": self.mse}
        if self.pseudo_regret is not None:
            out["pseudo_regret"] = self.pseudo_regret
            out["regret_cum"] = self.regret_cum
        return out


@dataclass
class RunFailure:
    run_id: int
    algorithm: str
    message: str


@dataclass
class AggregateCurve:
    """Per-step mean and sample standard deviation of each metric, per algorithm.

    ``curves[algorithm][metric] == (mean, std)``, each of length ``T``.
    """

    curves: dict
    n_runs: dict

    def mean(self, algorithm: str, metric: str) -> np.ndarray:
        return self.curves[algorithm][metric][0]

    def std(self, algorithm: str, metric: str) -> np.ndarray:
        return self.curves[algorithm][metric][1]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list
    failures: list
    aggregate: AggregateCurve
    beta_true: Optional[np.ndarray] = None

    def runs_for(self, algorithm: str) -> list:
        return [r for r in self.runs if r.algorithm == algorithm]

    def final(self, algorithm: str, metric: str) -> np.ndarray:
        """Final-step value of ``metric`` for each successful run."""
        return np.array([r.metrics()[metric][-1] for r in self.runs_for(algorithm)])


# --- single replications -------------------------------------------------------

def experiment_model(config: ExperimentConfig) -> dgp_mod.IvModel:
    if config.kind == PRICE_SALES:
        return dgp_mod.price_sales_model(config.dgp)
    return dgp_mod.draw_model(config.dgp, config.seed)


def _make_regressor(name: str, d_z: int, d_x: int, config: ExperimentConfig):
    if name == "o2sls":
        return O2SLS(d_z, d_x, lam=config.lam, mu=config.mu, mode=config.mode)
    if name == "ridge":
        return OnlineRidge(d_x, lam=config.lam)
    if name == "vawr":
        return VAWR(d_x, lam=config.lam)
    raise InvalidArgumentError(f"unknown regression algorithm {name!r}")


def make_stream(config: ExperimentConfig, model, run_index: int) -> Stream:
    rng = dgp_mod.run_rng(config.seed, run_index)
    if config.kind == PRICE_SALES:
        return dgp_mod.price_sales_stream(config.dgp, rng, config.T)
    return dgp_mod.regression_stream(config.dgp, model, rng, config.T)


def run_regression_stream(stream: Stream, beta_true: np.ndarray, algorithms: Sequence[str],
                          config: ExperimentConfig, run_id: int = 0) -> list[RunLog]:
    """Feed one stream to every algorithm, logging regrets before each ingest."""
    T = len(stream)
    d_z, d_x = stream.Z.shape[1], stream.X.shape[1]
    logs = []
    for name in algorithms:
        est = _make_regressor(name, d_z, d_x, config)
        pred = np.empty(T)
        ident = np.empty(T)
        oracle = np.empty(T)
        err = np.empty(T)
        betas = np.empty((T, d_x)) if config.log_beta else None
        for t in range(T):
            z, x, y = stream.Z[t], stream.X[t], stream.y[t]
            beta_prev = est.estimate_for(x) if isinstance(est, VAWR) else est.beta
            pred[t] = x @ beta_prev
            ident[t] = identification_increment(beta_prev, beta_true, x)
            oracle[t] = oracle_increment(y, x, beta_prev, beta_true)
            try:
                if isinstance(est, O2SLS):
                    est.ingest(z, x, y)
                else:
                    est.ingest(x, y)
            except NumericalError as exc:
                exc.diagnostics.setdefault("algorithm", name)
                raise
            err[t] = mse(est.beta, beta_true)
            if betas is not None:
                betas[t] = est.beta
        logs.append(RunLog(name, run_id, pred, ident, oracle, err, betas=betas))
    return logs


def _bandit_sigma(config: ExperimentConfig) -> float:
    return config.sigma_eta if config.sigma_eta is not None else config.dgp.eta_std


def run_bandit(config: ExperimentConfig, model, run_index: int) -> list[RunLog]:
    """Play every policy against the same realized context sequence."""
    cfg = config.dgp
    env = BanditEnv(cfg, model, config.arms)
    sigma = _bandit_sigma(config)
    logs = []
    for name in config.algorithms:
        if name == "oful_iv":
            state = make_oful_iv(cfg.d_z, cfg.d_x, sigma, lam=config.lam, delta=config.delta,
                                 mu=config.mu, mode=config.mode)
        else:
            state = make_oful(cfg.d_x, sigma, lam=config.lam, delta=config.delta)
        rng = dgp_mod.run_rng(config.seed, run_index)
        T = config.T
        cols = {k: np.empty(T) for k in ("prediction", "ident", "oracle", "mse", "regret")}
        arms = np.empty(T, dtype=int)
        betas = np.empty((T, cfg.d_x)) if config.log_beta else None
        for t in range(T):
            try:
                state, rec = bandit_round(env, state, rng, log_beta=config.log_beta)
            except NumericalError as exc:
                exc.diagnostics.setdefault("algorithm", name)
                raise
            cols["prediction"][t] = rec.prediction
            cols["ident"][t] = rec.ident_inc
            cols["oracle"][t] = rec.oracle_inc
            cols["mse"][t] = rec.mse
            cols["regret"][t] = rec.pseudo_regret
            arms[t] = rec.chosen_arm
            if betas is not None:
                betas[t] = rec.beta
        logs.append(RunLog(name, run_index, cols["prediction"], cols["ident"], cols["oracle"],
                           cols["mse"], chosen_arm=arms, pseudo_regret=cols["regret"], betas=betas))
    return logs


def run_single(config: ExperimentConfig, run_index: int) -> list[RunLog]:
    """One replication: a pure function of ``(config, run_index)``."""
    model = experiment_model(config)
    if config.kind == BANDIT:
        return run_bandit(config, model, run_index)
    if config.kind in (REGRESSION, PRICE_SALES):
        stream = make_stream(config, model, run_index)
        return run_regression_stream(stream, model.beta, config.algorithms, config, run_index)
    raise InvalidArgumentError(f"kind {config.kind!r} has no replications; use run_realdata")


def _run_safe(config: ExperimentConfig, run_index: int):
    try:
        return run_single(config, run_index)
    except NumericalError as exc:
        return RunFailure(run_index, str(exc.diagnostics.get("algorithm", "?")), str(exc))


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("IVSTREAM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer IVSTREAM_THREADS=%r", env)
    return 1


def aggregate(runs: Sequence[RunLog], algorithms: Sequence[str]) -> AggregateCurve:
    curves, counts = {}, {}
    for name in algorithms:
        mine = sorted((r for r in runs if r.algorithm == name), key=lambda r: r.run_id)
        counts[name] = len(mine)
        if not mine:
            continue
        per_metric = {}
        for metric in mine[0].metrics():
            stacked = np.stack([r.metrics()[metric] for r in mine])
            per_metric[metric] = mean_std(stacked, axis=0)
        curves[name] = per_metric
    return AggregateCurve(curves, counts)


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None,
                   run_indices: Optional[Sequence[int]] = None) -> ExperimentResult:
    """Execute all replications and aggregate them.

    Failed runs (numerical aborts) are listed in ``failures`` and excluded from
    the aggregate; a failure drops every algorithm of that run so comparisons
    stay paired.
    """
    config.validate()
    if config.kind == REALDATA:
        raise InvalidArgumentError("use run_realdata for kind='realdata'")
    indices = list(range(config.n_runs)) if run_indices is None else list(run_indices)
    n_workers = min(worker_count(workers), len(indices))
    job = partial(_run_safe, config)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            outcomes = list(pool.map(job, indices))
    else:
        outcomes = [job(i) for i in indices]
    runs, failures = [], []
    for outcome in outcomes:
        if isinstance(outcome, RunFailure):
            logger.warning("run %d aborted: %s", outcome.run_id, outcome.message)
            failures.append(outcome)
        else:
            runs.extend(outcome)
    model = experiment_model(config)
    return ExperimentResult(config, runs, failures, aggregate(runs, config.algorithms),
                            beta_true=model.beta)


# --- real data -----------------------------------------------------------------

@dataclass
class RealDataResult:
    """Per-step estimates and in-sample R^2 on a single observed stream."""

    years: np.ndarray
    betas: dict
    predictions: dict
    r2: dict
    offline: dict
    runs: list = field(default_factory=list)

    def final_r2(self, algorithm: str) -> float:
        return float(self.r2[algorithm][-1])


def run_realdata(Z, X, y, years=None, lam: float = 1e-3, mu: float = 1e-10,
                 algorithms: Sequence[str] = ("o2sls", "ridge")) -> RealDataResult:
    """Run the estimators over a real stream.

    ``r2[alg][t]`` is the in-sample R^2 of the estimate after step ``t`` on the
    observations seen so far (NaN while those outcomes are constant).
    """
    Z, X, y = (np.asarray(a, dtype=float) for a in (Z, X, y))
    T = y.shape[0]
    years = np.arange(T) if years is None else np.asarray(years)
    config = ExperimentConfig(kind=REALDATA, T=T, n_runs=1, algorithms=tuple(algorithms),
                              lam=lam, mu=mu, log_beta=True)
    stream = Stream(Z, X, y, np.zeros_like(X), np.zeros(T))
    # No ground truth: regrets are logged against the zero vector and carry no meaning.
    logs = run_regression_stream(stream, np.zeros(X.shape[1]), algorithms, config)
    betas, preds, r2s, offline = {}, {}, {}, {}
    for log in logs:
        r2 = np.full(T, np.nan)
        for t in range(T):
            ys = y[: t + 1]
            if np.ptp(ys) > 0:
                r2[t] = r_squared(ys, X[: t + 1] @ log.betas[t])
        betas[log.algorithm] = log.betas
        preds[log.algorithm] = log.prediction
        r2s[log.algorithm] = r2
        if log.algorithm == "o2sls":
            offline[log.algorithm] = batch_2sls(Z, X, y, lam, mu)
        else:
            offline[log.algorithm] = batch_ridge(X, y, lam)
    return RealDataResult(years, betas, preds, r2s, offline, logs)


# --- diagnostics ---------------------------------------------------------------

@dataclass
class Diagnostics:
    """Empirical checks of the IV assumptions on an observed stream.

    relevance : smallest singular value of ``(1/t) sum z x^T``
    exo_iv : ``||(1/t) sum z eta||`` (small when instruments are exogenous)
    exo_x : ``||(1/t) sum x eta||`` (large under endogeneity)
    lambda_min_Gz : smallest eigenvalue of ``G_z / t``
    """

    t: int
    relevance: float
    exo_iv: float
    exo_x: float
    lambda_min_Gz: float
    tol: float = 1e-8

    @property
    def relevance_ok(self) -> bool:
        return self.relevance > self.tol

    def as_dict(self) -> dict:
        return {"t": self.t, "relevance": self.relevance, "exo_iv": self.exo_iv,
                "exo_x": self.exo_x, "lambda_min_Gz": self.lambda_min_Gz,
                "relevance_ok": self.relevance_ok}


def assumption_diagnostics(stream, lam: float = 0.0, tol: float = 1e-8) -> Diagnostics:
    """``stream`` is a :class:`Stream` or a sequence of :class:`Sample`.

    Without latent noise (real data) pass a Stream whose ``eta`` is NaN; the
    exogeneity fields are then NaN.
    """
    if not isinstance(stream, Stream):
        samples = list(stream)
        if not samples:
            raise InsufficientDataError("empty stream")
        stream = Stream(np.array([s.z for s in samples]), np.array([s.x for s in samples]),
                        np.array([s.y for s in samples]),
                        np.array([s.latent_eps for s in samples]),
                        np.array([s.latent_eta for s in samples]))
    Z, X, eta = stream.Z, stream.X, stream.eta
    t, d_z = Z.shape
    d_x = X.shape[1]
    if t < max(d_x, d_z):
        raise InsufficientDataError(f"need at least {max(d_x, d_z)} samples, got {t}")
    cross = Z.T @ X / t
    relevance = float(np.linalg.svd(cross, compute_uv=False).min())
    exo_iv = float(np.linalg.norm(Z.T @ eta / t))
    exo_x = float(np.linalg.norm(X.T @ eta / t))
    Gz = (Z.T @ Z + lam * np.eye(d_z)) / t
    lam_min = float(np.linalg.eigvalsh(Gz)[0])
    return Diagnostics(t, relevance, exo_iv, exo_x, lam_min, tol)


# --- rate check ----------------------------------------------------------------

@dataclass
class ScalingCheck:
    horizons: np.ndarray
    ratios: np.ndarray
    max_ratio: float
    passed: bool

    @property
    def spread(self) -> float:
        return float(self.ratios.max() / self.ratios.min())


def log2_scaling_check(horizons: Sequence[int], cumulative: Sequence[float],
                       max_ratio: float = 4.0) -> ScalingCheck:
    """Boundedness proxy for ``R_T = O(log^2 T)``.

    Computes ``R_T / log(T)^2`` at each horizon; passes when the largest ratio
    is at most ``max_ratio`` times the smallest.
    """
    horizons = np.asarray(horizons, dtype=float)
    cumulative = np.asarray(cumulative, dtype=float)
    if horizons.shape != cumulative.shape:
        raise InvalidArgumentError("horizons and cumulative values must align")
    if horizons.size < 3:
        raise InsufficientDataError("need at least three horizons")
    if np.any(horizons < 16) or np.any(np.diff(horizons) <= 0):
        raise InvalidArgumentError("horizons must be increasing and >= 16")
    ratios = cumulative / np.log(horizons) ** 2
    if np.any(ratios <= 0):
        passed = False
    else:
        passed = bool(ratios.max() / ratios.min() <= max_ratio)
    return ScalingCheck(horizons, ratios, max_ratio, passed)
