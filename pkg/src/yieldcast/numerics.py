"""Dense linear algebra and optimization primitives shared by the models."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize as _scipy_minimize

from .errors import NonFiniteObjective, NotPositiveDefinite, RankDeficient

SYMMETRY_ATOL = 1e-12
# Relative jitter rungs, scaled by mean(diag) of the matrix being factored.
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)
NORMAL_EQ_MAX_COND = 1e6


def as_vector(x):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    return v


def as_symmetric(a, atol=SYMMETRY_ATOL):
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    if np.max(np.abs(m - m.T), initial=0.0) > atol:
        raise ValueError("matrix is not symmetric")
    return m


def cholesky_spd(a, jitter=0.0):
    """Lower Cholesky factor of ``a + jitter * I``.

    Strict: no jitter beyond the requested amount is added, so the factor
    reproduces its input. Use :func:`robust_cholesky` for the escalating
    retry policy.
    """
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    m = as_symmetric(a)
    if jitter:
        m = m + jitter * np.eye(m.shape[0])
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def robust_cholesky(a, jitter=0.0):
    """Factor ``a + jitter * I``, escalating extra diagonal jitter on failure.

    Returns ``(L, total_jitter)``. Extra jitter rungs are multiples of the
    mean diagonal; NotPositiveDefinite is raised once every rung fails.
    """
    m = as_symmetric(a)
    n = m.shape[0]
    scale = float(np.mean(np.diag(m))) if n else 0.0
    if not scale > 0:
        scale = 1.0
    eye = np.eye(n)
    for rung in JITTER_LADDER:
        total = jitter + rung * scale
        try:
            return np.linalg.cholesky(m + total * eye), total
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefinite(
        f"matrix of order {n} not positive definite after jitter escalation"
    )


def cho_solve_lower(chol, b):
    """Solve ``L L^T x = b`` given the lower factor ``L``."""
    z = solve_triangular(chol, b, lower=True, check_finite=False)
    return solve_triangular(chol.T, z, lower=False, check_finite=False)


def spd_solve(a, b, jitter=0.0):
    b = np.asarray(b, dtype=float)
    chol, _ = robust_cholesky(a, jitter)
    if b.shape[0] != chol.shape[0]:
        raise ValueError("dimension mismatch between matrix and right-hand side")
    return cho_solve_lower(chol, b)


def ols_solve(design, y):
    """Least-squares coefficients via the normal equations.

    ``y`` may be a vector or a matrix whose columns are separate responses
    sharing the design. Designs whose condition number exceeds
    ``NORMAL_EQ_MAX_COND`` are solved by SVD instead, since forming
    ``design^T design`` squares the condition number.
    """
    phi = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.ndim != 2 or phi.shape[0] < phi.shape[1]:
        raise ValueError("design must have at least as many rows as columns")
    if y.shape[0] != phi.shape[0]:
        raise ValueError("design and response row counts differ")
    sv = np.linalg.svd(phi, compute_uv=False)
    # same threshold as numpy.linalg.matrix_rank
    if sv.size and sv[-1] <= sv[0] * max(phi.shape) * np.finfo(float).eps:
        raise RankDeficient("design matrix does not have full column rank")
    if sv.size and sv[0] > NORMAL_EQ_MAX_COND * sv[-1]:
        return np.linalg.lstsq(phi, y, rcond=None)[0]
    gram = phi.T @ phi
    gram = 0.5 * (gram + gram.T)
    try:
        return spd_solve(gram, phi.T @ y)
    except NotPositiveDefinite as exc:
        raise RankDeficient(str(exc)) from None


@dataclass(frozen=True)
class OptimConfig:
    """Nelder-Mead settings. ``tol`` bounds the simplex diameter."""

    max_evals: int = 2000
    tol: float = 1e-6
    n_starts: int = 3
    seed: int = 42


def _multistart_points(init, n_starts, rng):
    # init, then init scaled up by ~e^{ln 10} and down by ~e^{-ln 10}, with noise
    starts = [init]
    shifts = [np.log(10.0), -np.log(10.0)]
    for i in range(1, n_starts):
        shift = shifts[(i - 1) % 2]
        noise = rng.normal(0.0, 0.1, size=init.shape)
        starts.append(init + shift + noise)
    return starts


def minimize(objective, init, bounds=None, config=OptimConfig(), log_space=False):
    """Derivative-free minimization with Nelder-Mead and multiple starts.

    Parameters
    ----------
    objective : callable
        Maps a parameter vector to a float. NaN/Inf at a probed point rejects
        that point; at ``init`` it raises NonFiniteObjective.
    init : array_like
        Starting point (in the natural, not log, space).
    bounds : sequence of (lo, hi), optional
        Per-coordinate box. With ``log_space`` the bounds must be positive.
    log_space : bool
        Optimize over log-parameters, which keeps positive parameters positive.

    Returns
    -------
    (argmin, value) with ``value <= objective(init)``.
    """
    x0 = np.asarray(init, dtype=float)
    f0 = float(objective(x0))
    if not np.isfinite(f0):
        raise NonFiniteObjective("objective is not finite at the initial point")

    if log_space:
        to_natural = np.exp
        z0 = np.log(x0)
        zbounds = None if bounds is None else [(np.log(lo), np.log(hi)) for lo, hi in bounds]
    else:
        to_natural = lambda z: z  # noqa: E731
        z0 = x0
        zbounds = None if bounds is None else [tuple(b) for b in bounds]

    def wrapped(z):
        val = objective(to_natural(z))
        return val if np.isfinite(val) else np.inf

    rng = np.random.default_rng(config.seed)
    best_x, best_f = x0, f0
    for start in _multistart_points(z0, max(1, config.n_starts), rng):
        if zbounds is not None:
            lo, hi = np.array(zbounds).T
            start = np.clip(start, lo, hi)
        if not np.isfinite(wrapped(start)):
            continue
        res = _scipy_minimize(
            wrapped,
            start,
            method="Nelder-Mead",
            bounds=zbounds,
            options={
                "maxfev": config.max_evals,
                "xatol": config.tol,
                "fatol": np.inf,
                "adaptive": len(start) > 2,
            },
        )
        if np.isfinite(res.fun) and res.fun < best_f:
            best_x, best_f = to_natural(res.x), float(res.fun)
    return best_x, best_f


def simpson_quadrature(f, lo, hi, n_panels=200):
    """Composite Simpson rule; ``f`` must accept numpy arrays."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    if n_panels <= 0 or n_panels % 2:
        raise ValueError("n_panels must be a positive even integer")
    x = np.linspace(lo, hi, n_panels + 1)
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    h = (hi - lo) / n_panels
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    return float(h / 3.0 * np.dot(w, fx))
