import dataclasses
import datetime as dt

import numpy as np
import pytest

from yieldcast import dynamic_gp, gp
from yieldcast.data import DEFAULT_GRID, TermGrid, YieldCurve, YieldSeries
from yieldcast.dynamic_gp import DgpConfig, DgpState
from yieldcast.errors import GridMismatch, InsufficientData
from yieldcast.gp import KernelParams

from conftest import make_series, random_walk_series

TAUS = DEFAULT_GRID.as_array()
DAY = dt.date(2010, 1, 4)
FAST = DgpConfig(multistart_every=0)


def curve(y, date=DAY):
    return YieldCurve(date, np.asarray(y, dtype=float))


def state_from(params, y, prior=None):
    prior = np.zeros(11) if prior is None else prior
    post = gp.posterior(params, TAUS, y, prior, TAUS, prior)
    return DgpState(0, DEFAULT_GRID, post.posterior_mean, post.posterior_cov, params)


def update_oracle(params, prior_mean, y):
    s = TAUS / 12
    k = (params.rbf_variance * np.exp(-(s[:, None] - s[None, :]) ** 2 / (2 * params.rbf_lengthscale**2))
         + params.linear_variance * np.outer(s, s))
    gain = k @ np.linalg.inv(k + params.noise_sigma**2 * np.eye(11))
    return prior_mean + gain @ (y - prior_mean), k - gain @ k


def test_init_constant_curve():
    c = 3.7
    state = dynamic_gp.init(curve(np.full(11, c)))
    post = gp.posterior(state.params, TAUS, np.full(11, c), np.zeros(11), TAUS, np.zeros(11))
    assert np.array_equal(state.mean, post.posterior_mean)
    assert np.all(np.abs(state.mean - c) <= 3 * state.params.noise_sigma)


def test_init_matches_static_posterior(fixture_series):
    state = dynamic_gp.init(fixture_series[0])
    post = gp.posterior(state.params, TAUS, fixture_series[0].yields, np.zeros(11), TAUS, np.zeros(11))
    assert np.array_equal(state.mean, post.posterior_mean)
    assert np.array_equal(state.cov, post.posterior_cov)
    assert state.t == 0
    assert np.min(np.linalg.eigvalsh(state.cov)) >= -1e-10


def test_init_uses_supplied_params_as_start(fixture_series):
    start = KernelParams(0.5, 1.0, 1e-3, 0.05)
    state = dynamic_gp.init(fixture_series[0], init_params=start)
    y, z = fixture_series[0].yields, np.zeros(11)
    assert gp.log_marginal_likelihood(state.params, TAUS, y, z) >= gp.log_marginal_likelihood(start, TAUS, y, z)


def test_predict_constant_curve_near_zero_noise():
    c = 4.25
    state = state_from(KernelParams(1.0, 2.0, 1e-3, 1e-4), np.full(11, c))
    fc = dynamic_gp.predict(state)
    np.testing.assert_allclose(fc.mean, c, atol=1e-2)
    assert fc.for_step == 1
    assert np.all(fc.interval_lo <= fc.mean) and np.all(fc.mean <= fc.interval_hi)


def test_predict_is_pure(fixture_series):
    state = dynamic_gp.init(fixture_series[0])
    before = state.mean.copy()
    a = dynamic_gp.predict(state)
    b = dynamic_gp.predict(state)
    assert np.array_equal(a.mean, b.mean) and np.array_equal(state.mean, before)


def test_predict_equals_posterior_mean(fixture_series):
    state = dynamic_gp.init(fixture_series[0], config=FAST)
    state, _ = dynamic_gp.step(state, fixture_series[1], True, FAST)
    fc = dynamic_gp.predict(state)
    prior = dynamic_gp.init(fixture_series[0], config=FAST).mean
    post = gp.posterior(state.params, TAUS, fixture_series[1].yields, prior, TAUS, prior)
    np.testing.assert_array_equal(fc.mean, post.posterior_mean)


def feed_repeatedly(first, target, steps=50, config=DgpConfig()):
    state = dynamic_gp.init(first, config=config)
    first_error = None
    for i in range(steps):
        state, fc = dynamic_gp.step(state, dataclasses.replace(target, date=DAY + dt.timedelta(i)),
                                    True, config)
        if first_error is None:
            first_error = np.max(np.abs(fc.mean - target.yields))
    return state, first_error


def test_constant_series_fixed_point():
    target = curve(np.full(11, 4.0))
    state, _ = feed_repeatedly(target, target)
    err = np.abs(dynamic_gp.predict(state).mean - target.yields)
    assert np.all(err <= state.params.noise_sigma)


def test_repeated_shaped_curve_converges(fixture_series):
    # the per-step refit reads a small leftover residual as noise, so a curved
    # target settles a few noise_sigma away rather than inside one
    target = fixture_series[100]
    state, first_error = feed_repeatedly(fixture_series[0], target)
    err = np.abs(dynamic_gp.predict(state).mean - target.yields)
    assert np.all(err <= 3 * state.params.noise_sigma)
    assert err.max() < first_error / 10


def test_refit_false_keeps_params(fixture_series):
    state = dynamic_gp.init(fixture_series[0])
    new, _ = dynamic_gp.step(state, fixture_series[1], refit=False)
    assert new.params == state.params
    assert new.t == 1


def test_step_replays_update_formula(fixture_series):
    state = dynamic_gp.init(fixture_series[0], config=FAST)
    y = fixture_series[1].yields
    new, fc = dynamic_gp.step(state, fixture_series[1], True, FAST)
    mean, cov = update_oracle(new.params, state.mean, y)
    np.testing.assert_allclose(new.mean, mean, atol=1e-8)
    np.testing.assert_allclose(new.cov, cov, atol=1e-8)
    # the forecast came from the old state, before y was seen
    np.testing.assert_array_equal(fc.mean, state.mean)


def test_refit_scores_against_predicted_mean(fixture_series):
    state = dynamic_gp.init(fixture_series[0], config=FAST)
    y = fixture_series[1].yields
    new, _ = dynamic_gp.step(state, fixture_series[1], True, FAST)
    start = gp.default_init(TAUS, y, state.mean)
    assert (gp.log_marginal_likelihood(new.params, TAUS, y, state.mean)
            >= gp.log_marginal_likelihood(start, TAUS, y, state.mean))
    assert (gp.log_marginal_likelihood(new.params, TAUS, y, state.mean)
            >= gp.log_marginal_likelihood(state.params, TAUS, y, state.mean))


def test_update_reduces_variance(fixture_series):
    state = dynamic_gp.init(fixture_series[0])
    new, _ = dynamic_gp.step(state, fixture_series[1], refit=False)
    s = TAUS / 12
    p = new.params
    prior_diag = p.rbf_variance + p.linear_variance * s * s
    assert np.all(np.diag(new.cov) <= prior_diag + 1e-10)


def test_noiseless_step_interpolates(fixture_series):
    state = state_from(KernelParams(1.0, 2.0, 1e-3, 1e-8), fixture_series[0].yields)
    new, _ = dynamic_gp.step(state, fixture_series[1], refit=False)
    np.testing.assert_allclose(new.mean, fixture_series[1].yields, atol=1e-4)


def test_step_rejects_other_grid():
    state = state_from(KernelParams(1.0, 2.0, 1e-3, 0.1), np.full(11, 2.0))
    other = YieldCurve(DAY, np.ones(3), TermGrid((1, 2, 3)))
    with pytest.raises(GridMismatch):
        dynamic_gp.step(state, other)


def test_length_two_gives_one_forecast(fixture_series):
    two = YieldSeries(fixture_series.dates[:2], fixture_series.yields[:2])
    fcs = dynamic_gp.run_filter(two)
    assert len(fcs) == 1 and fcs[0].date == two.dates[1] and fcs[0].for_step == 1


def test_length_one_rejected(fixture_series):
    with pytest.raises(InsufficientData):
        dynamic_gp.run_filter(YieldSeries(fixture_series.dates[:1], fixture_series.yields[:1]))


def test_no_lookahead():
    base = random_walk_series(12, seed=3)
    d = 6
    mutated = base.yields.copy()
    mutated[d:] += np.random.default_rng(9).normal(0, 0.5, mutated[d:].shape)
    a = dynamic_gp.run_filter(base)
    b = dynamic_gp.run_filter(make_series(mutated))
    for i in range(d):  # forecasts for days 1..d
        assert np.array_equal(a[i].mean, b[i].mean)
        assert np.array_equal(a[i].interval_lo, b[i].interval_lo)
    assert not np.array_equal(a[d].mean, b[d].mean)


def test_callback_sees_every_state():
    seen = []
    dynamic_gp.run_filter(random_walk_series(5, seed=1), FAST, callback=lambda s: seen.append(s.t))
    assert seen == [0, 1, 2, 3, 4]


def test_filter_is_deterministic():
    s = random_walk_series(8, seed=4)
    a = dynamic_gp.run_filter(s)
    b = dynamic_gp.run_filter(s)
    assert all(np.array_equal(x.mean, y.mean) for x, y in zip(a, b))


@pytest.mark.slow
def test_full_fixture_rmse_finite(fixture_series):
    fcs = dynamic_gp.run_filter(fixture_series)
    err = np.array([f.mean for f in fcs]) - fixture_series.yields[1:]
    rmse = np.sqrt(np.mean(err**2, axis=0))
    assert rmse.shape == (11,) and np.all(np.isfinite(rmse))
    assert np.all(rmse < 0.5)


@pytest.mark.slow
def test_random_walk_interval_coverage(random_walk_coverage):
    assert 0.85 <= random_walk_coverage <= 0.99
