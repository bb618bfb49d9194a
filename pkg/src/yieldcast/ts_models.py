"""Comparator forecasters: a VAR on the raw term yields and dynamic Nelson-Siegel.

Both fit vector autoregressions by equation-wise OLS and choose the lag order
with BIC.
"""

from dataclasses import dataclass

import numpy as np

from .basis import NelsonSiegelBasis
from .errors import DimensionMismatch, InsufficientData, RankDeficient
from .numerics import ols_solve

DEFAULT_LAMBDA_GRID = tuple(round(0.030 + 0.005 * i, 3) for i in range(19))
DEFAULT_MAX_ORDER = 5
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class VarModel:
    intercept: np.ndarray
    coefficient_matrices: tuple  # lag 1 first, each dim x dim
    residual_cov: np.ndarray

    @property
    def dim(self):
        return self.intercept.shape[0]

    @property
    def order(self):
        return len(self.coefficient_matrices)

    @property
    def n_params(self):
        return self.dim * (self.dim * self.order + 1)


def lagged_regressors(data, order):
    """Rows [1, y_{i-1}, ..., y_{i-k}] for i = k..T-1, and the targets y_i."""
    data = np.asarray(data, dtype=float)
    t = data.shape[0]
    cols = [np.ones((t - order, 1))]
    for lag in range(1, order + 1):
        cols.append(data[order - lag:t - lag])
    return np.hstack(cols), data[order:]


def _residuals(model, data):
    x, y = lagged_regressors(data, model.order)
    b = np.vstack([model.intercept[None, :]] + [a.T for a in model.coefficient_matrices])
    return y - x @ b


def fit_var(data, order, allow_rank_deficient=False):
    """Equation-wise OLS VAR(order).

    With ``allow_rank_deficient`` a singular regressor matrix (for example a
    constant history) gets the minimum-norm least-squares solution instead of
    raising :class:`RankDeficient`.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if order < 1:
        raise ValueError("VAR order must be at least 1")
    t, dim = data.shape
    if t - order <= dim * order + 1:
        raise InsufficientData(f"{t} rows cannot support a {dim}-dim VAR({order})")
    x, y = lagged_regressors(data, order)
    try:
        b = ols_solve(x, y)  # (1 + dim*order) x dim
    except RankDeficient:
        if not allow_rank_deficient:
            raise
        b = np.linalg.lstsq(x, y, rcond=None)[0]
    intercept = b[0].copy()
    mats = tuple(b[1 + dim * j:1 + dim * (j + 1)].T.copy() for j in range(order))
    resid = y - x @ b
    cov = resid.T @ resid / (t - order)
    return VarModel(intercept, mats, 0.5 * (cov + cov.T))


def bic_penalty(n_params, t_eff):
    return np.log(t_eff) / t_eff * n_params


def bic(model, data):
    """log det(residual covariance) + log(T_eff) / T_eff * number of coefficients."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    resid = _residuals(model, data)
    t_eff = resid.shape[0]
    cov = resid.T @ resid / t_eff
    sign, logdet = np.linalg.slogdet(0.5 * (cov + cov.T))
    if sign <= 0:
        return -np.inf
    return float(logdet + bic_penalty(model.n_params, t_eff))


def select_order(data, max_order=DEFAULT_MAX_ORDER):
    """BIC-minimizing lag order in 1..max_order and the model refit at that order.

    Singular regressors fall back to minimum-norm least squares, so a flat
    history forecasts itself rather than failing.

    Candidates are scored on a common sample (the first ``max_order`` rows are
    held back as presample for every order); ties go to the smaller order.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    best_order, best_bic = None, np.inf
    for k in range(1, max_order + 1):
        sample = data[max_order - k:]
        try:
            value = bic(fit_var(sample, k, allow_rank_deficient=True), sample)
        except InsufficientData:
            if best_order is None and k == 1:
                raise
            break
        if best_order is None or value < best_bic - TIE_TOL:
            best_order, best_bic = k, value
    return best_order, fit_var(data, best_order, allow_rank_deficient=True)


def forecast_var(model, recent):
    recent = np.asarray(recent, dtype=float)
    if recent.ndim == 1:
        recent = recent[:, None]
    if recent.shape != (model.order, model.dim):
        raise DimensionMismatch(
            f"need the last {model.order} rows of dimension {model.dim}, got {recent.shape}"
        )
    out = model.intercept.copy()
    for j, a in enumerate(model.coefficient_matrices, start=1):
        out += a @ recent[-j]
    return out


@dataclass(frozen=True, eq=False)
class NsFactorSeries:
    dates: tuple
    factors: np.ndarray  # n_days x 3: level, slope, curvature
    lam: float

    def __post_init__(self):
        if self.factors.shape != (len(self.dates), 3):
            raise ValueError("one factor triple per date required")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


def ns_factors_for(yields, taus, lam):
    """Per-day OLS Nelson-Siegel factors at a fixed decay; returns (factors, sse)."""
    phi = NelsonSiegelBasis(lam).design(taus)
    y = np.asarray(yields, dtype=float)
    beta = ols_solve(phi, y.T).T
    resid = y - beta @ phi.T
    return beta, float(np.sum(resid**2))


def extract_ns_factors(series, lambda_grid=DEFAULT_LAMBDA_GRID):
    """Daily factors at the shared grid decay minimizing total squared error."""
    if not lambda_grid:
        raise ValueError("lambda grid is empty")
    taus = series.grid.as_array()
    best = None
    for lam in lambda_grid:
        beta, sse = ns_factors_for(series.yields, taus, lam)
        if best is None or sse < best[2] - TIE_TOL * max(1.0, abs(best[2])):
            best = (lam, beta, sse)
    lam, beta, _ = best
    return NsFactorSeries(tuple(series.dates), beta, float(lam))


def forecast_dns(factors, grid, max_order=DEFAULT_MAX_ORDER):
    """Forecast tomorrow's factors with a BIC-selected VAR and map them to yields."""
    order, model = select_order(factors.factors, max_order)
    beta_next = forecast_var(model, factors.factors[-order:])
    return NelsonSiegelBasis(factors.lam).design(grid.as_array()) @ beta_next
