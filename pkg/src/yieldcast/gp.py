"""Gaussian-process regression on a single yield curve.

Kernel: rbf_variance * exp(-(s - s')^2 / (2 lengthscale^2)) + linear_variance * s * s'
where s = maturity / 12 is the maturity in years. Callers pass maturities in
months; the rescaling happens here, so ``rbf_lengthscale`` is in years and
``linear_variance`` is in percent^2 per year^2.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import norm

from .errors import NumericalError
from .numerics import OptimConfig, cho_solve_lower, minimize, robust_cholesky

MONTHS_PER_KERNEL_UNIT = 12.0
PARAM_LOWER = 1e-6
PARAM_UPPER = 1e4
NEG_VARIANCE_TOL = 1e-10
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class KernelParams:
    rbf_variance: float
    rbf_lengthscale: float
    linear_variance: float
    noise_sigma: float

    def __post_init__(self):
        for name, v in zip(self._fields(), self.as_array()):
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @staticmethod
    def _fields():
        return ("rbf_variance", "rbf_lengthscale", "linear_variance", "noise_sigma")

    def as_array(self):
        return np.array([self.rbf_variance, self.rbf_lengthscale, self.linear_variance, self.noise_sigma])

    @classmethod
    def from_array(cls, x):
        return cls(*(float(v) for v in x))

    def as_dict(self):
        return dict(zip(self._fields(), (float(v) for v in self.as_array())))


def to_kernel_units(taus):
    return np.asarray(taus, dtype=float) / MONTHS_PER_KERNEL_UNIT


def kernel_matrix(params, taus_a, taus_b):
    """Covariance between two sets of inputs, taken as given (no rescaling)."""
    a = np.asarray(taus_a, dtype=float)[:, None]
    b = np.asarray(taus_b, dtype=float)[None, :]
    rbf = params.rbf_variance * np.exp(-0.5 * (a - b) ** 2 / params.rbf_lengthscale**2)
    return rbf + params.linear_variance * a * b


def _train_factor(params, s):
    k = kernel_matrix(params, s, s)
    k[np.diag_indices_from(k)] += params.noise_sigma**2
    chol, _ = robust_cholesky(0.5 * (k + k.T))
    return chol


def log_marginal_likelihood(params, taus, y, mean_at_taus):
    """log N(y | mean, K + noise^2 I)."""
    s = to_kernel_units(taus)
    r = np.asarray(y, dtype=float) - np.asarray(mean_at_taus, dtype=float)
    if r.shape != s.shape:
        raise ValueError("taus, y and mean must have the same length")
    chol = _train_factor(params, s)
    alpha = cho_solve_lower(chol, r)
    return float(-0.5 * r @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * len(r) * LOG_2PI)


def default_init(taus, y, mean_at_taus):
    r = np.asarray(y, dtype=float) - np.asarray(mean_at_taus, dtype=float)
    var = float(np.var(r))
    smax = float(np.max(to_kernel_units(taus)))
    init = np.array([var, 2.0, 0.1 * var / smax**2, 0.1 * np.sqrt(var)])
    return KernelParams.from_array(np.clip(init, PARAM_LOWER, PARAM_UPPER))


def fit_hyperparams(taus, y, mean_at_taus, init=None, config=OptimConfig()):
    """Maximize the log marginal likelihood over the kernel parameters.

    Optimizes in log space inside [1e-6, 1e4] per parameter. The result never
    scores below ``init``.
    """
    if init is None:
        init = default_init(taus, y, mean_at_taus)
    x0 = np.clip(init.as_array(), PARAM_LOWER, PARAM_UPPER)
    neg_lml = _objective(taus, y, mean_at_taus)
    x, _ = minimize(neg_lml, x0, bounds=[(PARAM_LOWER, PARAM_UPPER)] * 4,
                    config=config, log_space=True)
    return KernelParams.from_array(np.clip(x, PARAM_LOWER, PARAM_UPPER))


def _objective(taus, y, mean_at_taus):
    """Negative log marginal likelihood over a raw parameter vector.

    Same value as :func:`log_marginal_likelihood`, with the distance matrices
    hoisted out of the optimizer loop.
    """
    s = to_kernel_units(taus)
    r = np.asarray(y, dtype=float) - np.asarray(mean_at_taus, dtype=float)
    sq = (s[:, None] - s[None, :]) ** 2
    outer = s[:, None] * s[None, :]
    eye = np.eye(len(s))
    const = 0.5 * len(s) * LOG_2PI

    def neg_lml(x):
        var, ell, lin, noise = x
        k = var * np.exp(-0.5 / (ell * ell) * sq) + lin * outer + (noise * noise) * eye
        try:
            chol = np.linalg.cholesky(k)
        except np.linalg.LinAlgError:
            try:
                return -log_marginal_likelihood(KernelParams.from_array(x), taus, y, mean_at_taus)
            except (NumericalError, ValueError):
                return np.inf
        z = np.linalg.solve(chol, r)
        return 0.5 * (z @ z) + np.log(np.diag(chol)).sum() + const

    return neg_lml


@dataclass(frozen=True, eq=False)
class GpPosterior:
    train_taus: np.ndarray
    mean_fn_at_train: np.ndarray
    test_taus: np.ndarray
    posterior_mean: np.ndarray
    posterior_cov: np.ndarray
    params: KernelParams

    @property
    def variance(self):
        return np.diag(self.posterior_cov).copy()


def clamp_covariance(cov):
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov)
    if np.any(d < -NEG_VARIANCE_TOL):
        raise NumericalError(f"posterior variance {d.min():.3e} is negative")
    cov[np.diag_indices_from(cov)] = np.maximum(d, 0.0)
    return cov


def posterior(params, taus, y, mean_at_taus, test_taus, mean_at_test):
    """Condition the GP on (taus, y) and return mean/covariance at test_taus."""
    s = to_kernel_units(taus)
    st = to_kernel_units(test_taus)
    mu = np.asarray(mean_at_taus, dtype=float)
    mu_t = np.asarray(mean_at_test, dtype=float)
    r = np.asarray(y, dtype=float) - mu
    if r.shape != s.shape or mu_t.shape != st.shape:
        raise ValueError("dimension mismatch in posterior inputs")
    chol = _train_factor(params, s)
    k_star = kernel_matrix(params, st, s)
    mean = mu_t + k_star @ cho_solve_lower(chol, r)
    v = solve_triangular(chol, k_star.T, lower=True, check_finite=False)
    cov = clamp_covariance(kernel_matrix(params, st, st) - v.T @ v)
    for a in (mean, cov):
        a.setflags(write=False)
    return GpPosterior(np.asarray(taus, dtype=float), mu, np.asarray(test_taus, dtype=float),
                       mean, cov, params)


def interval(mean, variance, coverage, noise_sigma=0.0):
    if not 0.0 <= coverage < 1.0:
        raise ValueError("coverage must lie in [0, 1)")
    z = norm.ppf(0.5 + 0.5 * coverage)
    sd = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0) + noise_sigma**2)
    mean = np.asarray(mean, dtype=float)
    return mean - z * sd, mean + z * sd


def predictive_interval(post, coverage=0.95, include_noise=True):
    """Gaussian (lo, hi) bounds per test point.

    With ``include_noise`` the bounds cover a new observation, not just the
    latent curve.
    """
    noise = post.params.noise_sigma if include_noise else 0.0
    return interval(post.posterior_mean, post.variance, coverage, noise)
