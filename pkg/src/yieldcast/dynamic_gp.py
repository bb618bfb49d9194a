"""Sequential dynamic Gaussian-process filter for daily yield curves.

Each cycle: forecast day t+1 from the state after day t, observe day t+1,
refit the kernel on that curve against the forecast mean, then condition on
it. The posterior mean after day t is the prior mean for day t+1.

The power-law-prior Bayesian filter with unit power reduces to exactly this
recursion (the previous posterior is used unchanged as the next prior), so
that case is served by :func:`step`; fractional powers are not supported.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import gp
from .errors import GridMismatch, InsufficientData
from .numerics import OptimConfig


@dataclass(frozen=True)
class DgpConfig:
    coverage: float = 0.95
    refit: bool = True
    multistart_every: int = 50
    optim: OptimConfig = field(default_factory=OptimConfig)
    init_params: gp.KernelParams | None = None


@dataclass(frozen=True, eq=False)
class DgpState:
    t: int
    grid: object
    mean: np.ndarray
    cov: np.ndarray
    params: gp.KernelParams

    def __post_init__(self):
        n = len(self.grid)
        if self.mean.shape != (n,) or self.cov.shape != (n, n):
            raise GridMismatch("state mean/cov do not match the term grid")


@dataclass(frozen=True, eq=False)
class DgpForecast:
    for_step: int
    mean: np.ndarray
    interval_lo: np.ndarray
    interval_hi: np.ndarray
    date: object = None


def _optim_for_step(config, t, multistart):
    # distinct, reproducible perturbations per step
    seed = config.optim.seed * 1_000_003 + t
    n_starts = config.optim.n_starts if multistart else 1
    return replace(config.optim, seed=seed, n_starts=n_starts)


def _condition(params, taus, y, prior_mean):
    post = gp.posterior(params, taus, y, prior_mean, taus, prior_mean)
    return post.posterior_mean, post.posterior_cov


def refit_params(taus, y, prior_mean, warm, config, t, multistart=False):
    """Kernel refit for one step.

    Runs a single start from the previous step's parameters and one from the
    data-driven defaults (the full multi-start set when ``multistart``), and
    keeps the higher likelihood. The default start matters: from a warm start
    alone a collapsed kernel variance sits on a flat ridge and never recovers.
    """
    warm_fit = gp.fit_hyperparams(taus, y, prior_mean, warm, _optim_for_step(config, t, False))
    fresh_fit = gp.fit_hyperparams(taus, y, prior_mean, None, _optim_for_step(config, t, multistart))
    scores = [gp.log_marginal_likelihood(p, taus, y, prior_mean) for p in (warm_fit, fresh_fit)]
    return fresh_fit if scores[1] > scores[0] else warm_fit


def init(first_curve, init_params=None, config=DgpConfig()):
    """State after the first curve: kernel fit against a zero mean, then conditioning."""
    taus = first_curve.grid.as_array()
    y = np.asarray(first_curve.yields, dtype=float)
    zero = np.zeros_like(y)
    init_params = init_params if init_params is not None else config.init_params
    params = gp.fit_hyperparams(taus, y, zero, init_params, _optim_for_step(config, 0, True))
    mean, cov = _condition(params, taus, y, zero)
    return DgpState(0, first_curve.grid, mean, cov, params)


def predictive_variance(state):
    """Per-term variance of tomorrow's observation: kernel diagonal plus noise.

    This is the marginal N(mean, K + noise^2 I) that the next refit scores the
    new curve against. The conditioned covariance ``state.cov`` alone ignores
    the day-ahead innovation and gives intervals far too narrow.
    """
    s = gp.to_kernel_units(state.grid.as_array())
    k_diag = state.params.rbf_variance + state.params.linear_variance * s * s
    return k_diag + state.params.noise_sigma**2


def predict(state, coverage=0.95):
    lo, hi = gp.interval(state.mean, predictive_variance(state), coverage)
    return DgpForecast(state.t + 1, state.mean, lo, hi)


def step(state, observed_next, refit=True, config=DgpConfig()):
    """Advance one day. Returns ``(new_state, forecast)``.

    The forecast is the one issued before ``observed_next`` was seen.
    """
    if observed_next.grid != state.grid:
        raise GridMismatch("observed curve is on a different term grid")
    forecast = replace(predict(state, config.coverage), date=observed_next.date)
    taus = state.grid.as_array()
    y = np.asarray(observed_next.yields, dtype=float)
    t = state.t + 1
    params = state.params
    if refit:
        multistart = config.multistart_every > 0 and t % config.multistart_every == 0
        params = refit_params(taus, y, state.mean, params, config, t, multistart)
    mean, cov = _condition(params, taus, y, state.mean)
    return DgpState(t, state.grid, mean, cov, params), forecast


def run_filter(series, config=DgpConfig(), callback=None):
    """One forecast per day from the second curve on, each using only earlier days.

    ``callback(state)`` is invoked after every update, if given.
    """
    if len(series) < 2:
        raise InsufficientData("dynamic GP filter needs at least two curves")
    state = init(series[0], config=config)
    if callback:
        callback(state)
    forecasts = []
    for i in range(1, len(series)):
        state, fc = step(state, series[i], config.refit, config)
        forecasts.append(fc)
        if callback:
            callback(state)
    return forecasts
