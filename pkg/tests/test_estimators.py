import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from ivstream.dgp import GaussianIvConfig, draw_model, regression_stream
from ivstream.errors import InvalidArgumentError
from ivstream.estimators import (VAWR, O2SLS, OnlineRidge, batch_2sls, batch_ridge,
                                 second_stage_ridge)


def feed(est, stream, upto=None):
    for t in range(len(stream) if upto is None else upto):
        if isinstance(est, O2SLS):
            est.ingest(stream.Z[t], stream.X[t], stream.y[t])
        else:
            est.ingest(stream.X[t], stream.y[t])
    return est


def small_stream(seed, d=3, T=200, k=None):
    cfg = GaussianIvConfig.regression(d, corr_count=min(d, 2) if k is None else k)
    model = draw_model(cfg, seed)
    return model, regression_stream(cfg, model, np.random.default_rng(seed + 100), T)


class TestO2SLSPredict:
    def test_fresh_state_predicts_zero(self):
        assert O2SLS(3, 2).predict(np.array([1.0, -2.0])) == 0.0

    def test_dot_product(self):
        est = O2SLS(2, 2)
        est.beta = np.array([1.0, 2.0])
        assert est.predict(np.array([3.0, 4.0])) == 11.0

    def test_noiseless_scalar_stream(self):
        est = O2SLS(1, 1, lam=1e-8, mu=1e-8)
        for z in np.linspace(-1.0, 1.3, 10):
            est.ingest([z], [z], -z)
        assert est.predict([2.0]) == pytest.approx(-2.0, abs=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            O2SLS(2, 2).predict(np.ones(3))
        with pytest.raises(InvalidArgumentError):
            O2SLS(2, 2).ingest(np.ones(3), np.ones(2), 1.0)


class TestO2SLSIngest:
    def test_single_observation_by_hand(self):
        est = O2SLS(2, 2, lam=1.0, mu=1e-10).ingest([1.0, 0.0], [1.0, 0.0], 1.0)
        assert_allclose(est.theta, [[0.5, 0.0], [0.0, 0.0]], atol=1e-15)
        assert np.all(np.isfinite(est.beta))
        assert est.t == 1

    def test_matches_batch_at_horizon(self):
        _, s = small_stream(0)
        est = feed(O2SLS(3, 3, lam=1e-3), s)
        assert_allclose(est.beta, batch_2sls(s.Z, s.X, s.y, 1e-3, 1e-10), rtol=1e-8)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_batch_at_every_step(self, seed):
        _, s = small_stream(seed, d=4, T=120)
        est = O2SLS(4, 4, lam=1e-3)
        for t in range(len(s)):
            est.ingest(s.Z[t], s.X[t], s.y[t])
            assert_allclose(est.theta, np.linalg.solve(
                s.Z[:t + 1].T @ s.Z[:t + 1] + 1e-3 * np.eye(4), s.Z[:t + 1].T @ s.X[:t + 1]),
                rtol=1e-8, atol=1e-12)
            if t + 1 >= 4:
                ref = batch_2sls(s.Z[:t + 1], s.X[:t + 1], s.y[:t + 1], 1e-3, 1e-10)
                assert np.linalg.norm(est.beta - ref) <= 1e-8 * np.linalg.norm(ref)

    def test_exact_mode_normal_equations(self):
        _, s = small_stream(1)
        est = feed(O2SLS(3, 3, lam=1e-3), s, 50)
        th = est.theta
        H = th.T @ est.Gz.M @ th
        resid = (H + est.mu_eff * np.eye(3)) @ est.beta - th.T @ est.s_zy
        assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(th.T @ est.s_zy))

    @pytest.mark.parametrize("mode", ["exact", "frozen"])
    def test_noiseless_identification(self, mode):
        rng = np.random.default_rng(7)
        theta = np.array([[1.0, 0.3], [-0.2, 0.8]])
        beta = np.array([1.5, -0.5])
        est = O2SLS(2, 2, lam=1e-3, mode=mode)
        for _ in range(100):
            z = rng.standard_normal(2)
            x = theta.T @ z
            est.ingest(z, x, x @ beta)
        err = np.sum((est.beta - beta) ** 2)
        # Frozen mode keeps the rows projected before the first stage was
        # identified, so its noiseless error decays like 1/t^2 rather than vanishing.
        assert err < 1e-6, f"{mode} mode MSE at t=100 is {err:.3g}"

    def test_replay_is_bit_identical(self):
        _, s = small_stream(2)
        a = feed(O2SLS(3, 3), s)
        b = feed(O2SLS(3, 3), s)
        assert_array_equal(a.beta, b.beta)

    @pytest.mark.parametrize("c", [-3.0, 0.5, 7.0])
    def test_scale_equivariance(self, c):
        _, s = small_stream(3)
        a = feed(O2SLS(3, 3), s)
        b = O2SLS(3, 3)
        for t in range(len(s)):
            b.ingest(s.Z[t], s.X[t], c * s.y[t])
        assert_allclose(b.beta, c * a.beta, rtol=1e-9)

    def test_frozen_mode_replays_its_recursion(self):
        _, s = small_stream(4, T=300)
        est = feed(O2SLS(3, 3, lam=1e-2, mode="frozen"), s)
        G = 1e-2 * np.eye(3)
        S = np.zeros(3)
        Gz = 1e-2 * np.eye(3)
        Szx = np.zeros((3, 3))
        theta = np.zeros((3, 3))
        for z, x, y in zip(s.Z, s.X, s.y):
            xh = theta.T @ z
            G += np.outer(xh, xh)
            S += xh * y
            Gz += np.outer(z, z)
            Szx += np.outer(z, x)
            theta = np.linalg.solve(Gz, Szx)
        assert_allclose(est.beta, np.linalg.solve(G, S), rtol=1e-8)
        assert_allclose(est.theta, theta, rtol=1e-8, atol=1e-10)

    def test_frozen_and_exact_agree_up_to_noise(self):
        model, s = small_stream(5, T=1000)
        exact = feed(O2SLS(3, 3, mode="exact"), s)
        frozen = feed(O2SLS(3, 3, mode="frozen"), s)
        floor = np.linalg.norm(exact.beta - model.beta)
        gap = np.linalg.norm(frozen.beta - exact.beta)
        assert gap <= 10 * floor, f"frozen/exact gap {gap:.3g} is {gap / floor:.1f}x the error {floor:.3g}"

    def test_rejects_bad_mode_and_mu(self):
        with pytest.raises(InvalidArgumentError):
            O2SLS(2, 2, mode="batch")
        with pytest.raises(InvalidArgumentError):
            O2SLS(2, 2, mu=-1.0)


def test_second_stage_ridge_scales_with_trace():
    assert second_stage_ridge(0.0, 3, 1e-10) == 1e-10
    assert second_stage_ridge(90.0, 3, 1e-10) == pytest.approx(3e-9)


class TestRidge:
    def test_fresh_prediction_is_zero(self):
        assert OnlineRidge(3).predict(np.ones(3)) == 0.0

    def test_noiseless_exogenous(self, rng):
        beta = np.array([2.0, -1.0, 0.5])
        est = OnlineRidge(3, lam=1e-3)
        for _ in range(200):
            x = rng.standard_normal(3)
            est.ingest(x, x @ beta)
        assert_allclose(est.beta, beta, atol=1e-4)

    def test_matches_batch_and_invariant(self):
        _, s = small_stream(6)
        est = feed(OnlineRidge(3, lam=0.1), s)
        assert_allclose(est.beta, batch_ridge(s.X, s.y, 0.1), rtol=1e-9)
        assert_allclose(est.beta, est.Gx.M_inv @ est.s_xy, atol=1e-8)

    def test_endogenous_bias_matches_population_oracle(self):
        cfg = GaussianIvConfig.regression(3, corr_count=2, noise_scale=1.0)
        model = draw_model(cfg, 11)
        s = regression_stream(cfg, model, np.random.default_rng(3), 200_000)
        est = OnlineRidge(3, lam=1e-3)
        Sxx = s.X.T @ s.X
        bias = np.linalg.solve(model.theta.T @ model.theta + np.eye(3), cfg.noise_scale * np.r_[1, 1, 0])
        limit = model.beta + bias
        ridge_beta = np.linalg.solve(Sxx + 1e-3 * np.eye(3), s.X.T @ s.y)
        assert np.linalg.norm(bias) > 0.05
        assert_allclose(ridge_beta, limit, atol=0.02)
        # The online path agrees with the batch solve it stands in for.
        feed(est, s, 2000)
        assert_allclose(est.beta, batch_ridge(s.X[:2000], s.y[:2000], 1e-3), rtol=1e-9)


class TestVAWR:
    def test_fresh_prediction_is_zero(self):
        assert VAWR(2).predict(np.array([3.0, 1.0])) == 0.0

    def test_matches_batch_formula(self, rng):
        X = rng.standard_normal((30, 4))
        y = rng.standard_normal(30)
        est = VAWR(4, lam=0.5)
        for x, yy in zip(X, y):
            est.ingest(x, yy)
        x = rng.standard_normal(4)
        direct = x @ np.linalg.solve(X.T @ X + np.outer(x, x) + 0.5 * np.eye(4), X.T @ y)
        assert est.predict(x) == pytest.approx(direct, rel=1e-10)
        assert float(x @ est.estimate_for(x)) == pytest.approx(direct, rel=1e-10)

    def test_small_x_limit_matches_ridge(self, rng):
        est = VAWR(3, lam=1.0)
        for _ in range(20):
            x = rng.standard_normal(3)
            est.ingest(x, x.sum())
        x = 1e-6 * rng.standard_normal(3)
        assert est.predict(x) == pytest.approx(OnlineRidge.predict(est, x), rel=1e-9)


@settings(max_examples=100)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 4), T=st.integers(1, 40))
def test_exact_mode_always_tracks_batch(seed, d, T):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((T, d))
    X = Z @ rng.standard_normal((d, d)) + 0.3 * rng.standard_normal((T, d))
    y = X @ rng.standard_normal(d) + rng.standard_normal(T)
    est = O2SLS(d, d, lam=1e-2)
    for t in range(T):
        est.ingest(Z[t], X[t], y[t])
    ref = batch_2sls(Z, X, y, 1e-2, 1e-10)
    if T >= d:
        assert np.linalg.norm(est.beta - ref) <= 1e-7 * max(1.0, np.linalg.norm(ref))
    assert np.all(np.isfinite(est.beta))
