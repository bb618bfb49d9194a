from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from yieldcast.errors import NonFiniteObjective, NotPositiveDefinite, RankDeficient
from yieldcast.numerics import (
    OptimConfig, cholesky_spd, minimize, ols_solve, robust_cholesky, simpson_quadrature, spd_solve,
)


def test_cholesky_identity():
    assert np.array_equal(cholesky_spd(np.eye(3)), np.eye(3))


def test_cholesky_two_by_two():
    a = np.array([[4.0, 2.0], [2.0, 3.0]])
    chol = cholesky_spd(a)
    np.testing.assert_allclose(chol, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-15)
    np.testing.assert_allclose(chol @ chol.T, a, atol=1e-14)


def test_cholesky_rank_one_fails():
    with pytest.raises(NotPositiveDefinite):
        cholesky_spd(np.ones((2, 2)))


def test_robust_cholesky_ladder_rescues_singular():
    chol, added = robust_cholesky(np.ones((2, 2)))
    assert added > 0
    np.testing.assert_allclose(chol @ chol.T, np.ones((2, 2)) + added * np.eye(2), atol=1e-12)


def test_robust_cholesky_gives_up_on_indefinite():
    with pytest.raises(NotPositiveDefinite):
        robust_cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky_spd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_cholesky_with_jitter():
    chol = cholesky_spd(np.ones((2, 2)), jitter=1.0)
    np.testing.assert_allclose(chol @ chol.T, [[2.0, 1.0], [1.0, 2.0]], atol=1e-14)


@pytest.mark.parametrize("a,b,expected", [
    (np.eye(2), [3.0, 4.0], [3.0, 4.0]),
    (np.diag([2.0, 4.0]), [2.0, 8.0], [1.0, 2.0]),
])
def test_spd_solve_examples(a, b, expected):
    np.testing.assert_allclose(spd_solve(a, b), expected, atol=1e-15)


def test_spd_solve_matches_general_solver(rng):
    m = rng.normal(size=(5, 5))
    a = m @ m.T + 5 * np.eye(5)
    b = rng.normal(size=5)
    np.testing.assert_allclose(spd_solve(a, b), np.linalg.solve(a, b), atol=1e-8)


def _spd(seed, n):
    r = np.random.default_rng(seed)
    m = r.normal(size=(n, n))
    return m @ m.T + 0.1 * np.eye(n), r.normal(size=n)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8), st.floats(0, 1))
def test_spd_solve_residual_bound(seed, n, jitter):
    a, b = _spd(seed, n)
    x = spd_solve(a, b, jitter)
    resid = (a + jitter * np.eye(n)) @ x - b
    assert np.max(np.abs(resid)) <= 1e-8 * (1 + np.max(np.abs(b)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_cholesky_reconstruction(seed, n):
    a, _ = _spd(seed, n)
    chol = cholesky_spd(a)
    assert np.max(np.abs(chol @ chol.T - a)) <= 1e-10 * np.max(np.abs(a))
    assert np.allclose(chol, np.tril(chol))


def test_ols_identity_design():
    np.testing.assert_allclose(ols_solve(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0], atol=1e-15)


def test_ols_noiseless_recovery(rng):
    phi = rng.normal(size=(20, 4))
    beta = np.array([1.5, -2.0, 0.25, 3.0])
    np.testing.assert_allclose(ols_solve(phi, phi @ beta), beta, atol=1e-10)


def _rational_normal_equations(phi, y):
    # (phi^T phi)^{-1} phi^T y in exact arithmetic, 2 columns
    p = [[Fraction(v) for v in row] for row in phi]
    yy = [Fraction(v) for v in y]
    g = [[sum(p[r][i] * p[r][j] for r in range(len(p))) for j in range(2)] for i in range(2)]
    h = [sum(p[r][i] * yy[r] for r in range(len(p))) for i in range(2)]
    det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
    return [(g[1][1] * h[0] - g[0][1] * h[1]) / det, (g[0][0] * h[1] - g[1][0] * h[0]) / det]


def test_ols_overdetermined_matches_exact_rational_oracle():
    phi = [[1, 1], [1, 2], [1, 3], [1, 5]]
    y = [2, 3, 7, 8]
    expected = [float(v) for v in _rational_normal_equations(phi, y)]
    np.testing.assert_allclose(ols_solve(np.array(phi, float), np.array(y, float)), expected, atol=1e-12)


def test_ols_rank_deficient():
    phi = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(RankDeficient):
        ols_solve(phi, [1.0, 2.0, 3.0])


def test_ols_multiple_responses(rng):
    phi = rng.normal(size=(10, 3))
    y = rng.normal(size=(10, 2))
    out = ols_solve(phi, y)
    for j in range(2):
        np.testing.assert_allclose(out[:, j], ols_solve(phi, y[:, j]), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(0, 10))
def test_ols_residual_orthogonal(seed, p, extra):
    r = np.random.default_rng(seed)
    phi = r.normal(size=(p + extra + 1, p))
    y = r.normal(size=p + extra + 1)
    beta = ols_solve(phi, y)
    lhs = np.max(np.abs(phi.T @ (y - phi @ beta)))
    assert lhs <= 1e-8 * max(np.max(np.abs(phi.T @ y)), 1e-300)


def test_minimize_quadratic_bowl():
    x, f = minimize(lambda v: (v[0] - 2.0) ** 2, [0.0], config=OptimConfig(tol=1e-9))
    assert abs(x[0] - 2.0) < 1e-6
    assert f <= 4.0


def test_minimize_symmetric_bowl():
    x, _ = minimize(lambda v: v[0] ** 2 + v[1] ** 2, [1.0, 1.0], config=OptimConfig(tol=1e-9))
    np.testing.assert_allclose(x, [0.0, 0.0], atol=1e-6)


def test_minimize_log_space_respects_bounds():
    x, _ = minimize(lambda v: (np.log(v[0]) + 20) ** 2, [1.0], bounds=[(1e-6, 1e4)], log_space=True)
    assert 1e-6 * (1 - 1e-9) <= x[0] <= 1e4


def test_minimize_rejects_nonfinite_probes():
    def f(v):
        return np.nan if v[0] < 0 else (v[0] - 1.0) ** 2
    x, fx = minimize(f, [3.0])
    assert np.isfinite(fx) and abs(x[0] - 1.0) < 1e-4


def test_minimize_nonfinite_init():
    with pytest.raises(NonFiniteObjective):
        minimize(lambda v: np.inf, [1.0])


@settings(max_examples=30, deadline=None)
@given(arrays(float, 3, elements=st.floats(-5, 5)))
def test_minimize_never_worse_than_init(x0):
    f = lambda v: np.sum((v - 1) ** 2) + np.sin(5 * v).sum()  # noqa: E731
    _, fx = minimize(f, x0, config=OptimConfig(max_evals=200))
    assert fx <= f(x0)


def test_minimize_deterministic_for_seed():
    f = lambda v: np.sum(np.cos(3 * v) + 0.1 * v**2)  # noqa: E731
    a = minimize(f, [0.5, 0.2], config=OptimConfig(seed=7))
    b = minimize(f, [0.5, 0.2], config=OptimConfig(seed=7))
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_simpson_constant():
    assert simpson_quadrature(lambda x: np.ones_like(x), 0.0, 1.0, 2) == pytest.approx(1.0, abs=1e-15)


def test_simpson_cubic_exact():
    assert simpson_quadrature(lambda x: x**2, 0.0, 1.0, 2) == pytest.approx(1 / 3, abs=1e-15)
    assert simpson_quadrature(lambda x: x**3, 0.0, 2.0, 2) == pytest.approx(4.0, abs=1e-14)


def test_simpson_sine():
    assert abs(simpson_quadrature(np.sin, 0.0, np.pi, 64) - 2.0) < 1e-6


@pytest.mark.parametrize("lo,hi,n", [(1.0, 1.0, 2), (0.0, 1.0, 3), (0.0, 1.0, 0)])
def test_simpson_bad_arguments(lo, hi, n):
    with pytest.raises(ValueError):
        simpson_quadrature(np.sin, lo, hi, n)
