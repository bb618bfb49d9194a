"""Functional bases for yield curves and least-squares curve fitting.

Every basis starts with a constant column. Maturities are in months and all
rates/decays are per month.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite, RankDeficient
from .numerics import ols_solve, simpson_quadrature, spd_solve

SMALL_DECAY = 1e-8
R2_PANELS = 200


@dataclass(frozen=True)
class FourierBasis:
    period: float
    n_pairs: int = 1

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("Fourier period must be positive")
        if self.n_pairs < 1:
            raise ValueError("Fourier basis needs at least one sine/cosine pair")

    @property
    def size(self):
        return 1 + 2 * self.n_pairs

    @property
    def omega(self):
        return 2.0 * np.pi / self.period

    def design(self, taus):
        t = np.asarray(taus, dtype=float)
        cols = [np.ones_like(t)]
        for k in range(1, self.n_pairs + 1):
            cols += [np.sin(k * self.omega * t), np.cos(k * self.omega * t)]
        return np.column_stack(cols)

    def second_derivative(self, taus):
        t = np.asarray(taus, dtype=float)
        cols = [np.zeros_like(t)]
        for k in range(1, self.n_pairs + 1):
            w = k * self.omega
            cols += [-w * w * np.sin(w * t), -w * w * np.cos(w * t)]
        return np.column_stack(cols)


def _ns_slope(x):
    """(1 - e^{-x}) / x with the limit 1 at x -> 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x < SMALL_DECAY, 1.0, x)
    return np.where(x < SMALL_DECAY, 1.0, -np.expm1(-safe) / safe)


def _ns_slope_dd(x):
    """Second derivative of (1 - e^{-x}) / x in x."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    safe = np.where(small, 1.0, x)
    e = np.exp(-safe)
    exact = -e / safe - 2.0 * e / safe**2 - 2.0 * np.expm1(-safe) / safe**3
    series = 1.0 / 3.0 - x / 4.0 + x * x / 10.0
    return np.where(small, series, exact)


@dataclass(frozen=True)
class NelsonSiegelBasis:
    """Columns (1, f1, f2): level, slope and curvature loadings."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("Nelson-Siegel decay must be positive")

    size = 3

    def loadings(self, taus):
        x = self.lam * np.asarray(taus, dtype=float)
        f1 = _ns_slope(x)
        f2 = f1 - np.exp(-x)
        return f1, f2

    def design(self, taus):
        f1, f2 = self.loadings(taus)
        return np.column_stack([np.ones_like(f1), f1, f2])

    def second_derivative(self, taus):
        x = self.lam * np.asarray(taus, dtype=float)
        lam2 = self.lam**2
        g = lam2 * _ns_slope_dd(x)
        return np.column_stack([np.zeros_like(x), g, g - lam2 * np.exp(-x)])


@dataclass(frozen=True)
class ExponentialBasis:
    """Columns (1, e^{r_1 t}, e^{r_2 t}, ...)."""

    rates: tuple = field(default=(-0.01,))

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.rates:
            raise ValueError("exponential basis needs at least one rate")

    @property
    def size(self):
        return 1 + len(self.rates)

    def design(self, taus):
        t = np.asarray(taus, dtype=float)
        return np.column_stack([np.ones_like(t)] + [np.exp(r * t) for r in self.rates])

    def second_derivative(self, taus):
        t = np.asarray(taus, dtype=float)
        return np.column_stack([np.zeros_like(t)] + [r * r * np.exp(r * t) for r in self.rates])


@dataclass(frozen=True)
class GaussianRbfBasis:
    """Columns (1, e^{-w (t - c_1)^2}, e^{-w (t - c_2)^2}, ...)."""

    centers: tuple
    width: float

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if not self.centers:
            raise ValueError("Gaussian basis needs at least one center")
        if not self.width > 0:
            raise ValueError("Gaussian basis width must be positive")

    @property
    def size(self):
        return 1 + len(self.centers)

    def design(self, taus):
        t = np.asarray(taus, dtype=float)
        return np.column_stack(
            [np.ones_like(t)] + [np.exp(-self.width * (t - c) ** 2) for c in self.centers]
        )

    def second_derivative(self, taus):
        t = np.asarray(taus, dtype=float)
        w = self.width
        cols = [np.zeros_like(t)]
        for c in self.centers:
            d = t - c
            cols.append((4.0 * w * w * d * d - 2.0 * w) * np.exp(-w * d * d))
        return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class BasisFit:
    spec: object
    coefficients: np.ndarray
    penalty_lambda: float = 0.0

    def __post_init__(self):
        beta = np.array(self.coefficients, dtype=float)
        beta.setflags(write=False)
        if beta.shape != (self.spec.size,):
            raise ValueError(f"{beta.shape} coefficients for a basis of size {self.spec.size}")
        object.__setattr__(self, "coefficients", beta)


def design_matrix(spec, taus):
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size == 0:
        raise ValueError("no maturities given")
    return spec.design(taus)


def _taus_and_yields(curve):
    return curve.grid.as_array(), np.asarray(curve.yields, dtype=float)


def fit_ols(spec, curve):
    taus, y = _taus_and_yields(curve)
    if len(taus) < spec.size:
        raise RankDeficient(f"{len(taus)} points cannot determine {spec.size} coefficients")
    return BasisFit(spec, ols_solve(design_matrix(spec, taus), y), 0.0)


def penalty_matrix_r2(spec, lo, hi, n_panels=R2_PANELS):
    """Integrated products of basis second derivatives over [lo, hi]."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    n = spec.size
    r2 = np.zeros((n, n))

    def integrand(j, k):
        def f(t):
            d = spec.second_derivative(t)
            return d[:, j] * d[:, k]
        return f

    for j in range(n):
        for k in range(j, n):
            r2[j, k] = r2[k, j] = simpson_quadrature(integrand(j, k), lo, hi, n_panels)
    return r2


def fit_penalized(spec, curve, lam, lo=None, hi=None):
    """Roughness-penalized fit: (phi'phi + lam R2)^{-1} phi'y.

    The penalty interval defaults to the curve's term range.
    """
    if lam < 0:
        raise ValueError("penalty lambda must be non-negative")
    if lam == 0:
        return fit_ols(spec, curve)
    taus, y = _taus_and_yields(curve)
    lo = taus.min() if lo is None else lo
    hi = taus.max() if hi is None else hi
    phi = design_matrix(spec, taus)
    a = phi.T @ phi + lam * penalty_matrix_r2(spec, lo, hi)
    try:
        beta = spd_solve(0.5 * (a + a.T), phi.T @ y)
    except NotPositiveDefinite as exc:
        raise RankDeficient(str(exc)) from None
    return BasisFit(spec, beta, float(lam))


def evaluate(fit, taus):
    return design_matrix(fit.spec, taus) @ fit.coefficients


def curvature_energy(fit, lo, hi, n_panels=R2_PANELS):
    beta = fit.coefficients
    return float(beta @ penalty_matrix_r2(fit.spec, lo, hi, n_panels) @ beta)
