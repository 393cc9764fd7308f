import numpy as np
import pytest
from scipy.special import gammaln

from hesslasso import (
    LossModel,
    correlation,
    curvature_weights,
    deviance_stats,
    duality_gap,
    lambda_max,
)

from _reference import fd_gradient, fd_second, ista_solve, smooth_value


def _toy(rng, kind, n=10, p=4):
    X = rng.standard_normal((n, p))
    if kind == "logistic":
        y = (rng.uniform(size=n) < 0.5).astype(float)
    elif kind == "poisson":
        y = rng.poisson(1.5, size=n).astype(float)
    else:
        y = rng.standard_normal(n)
    return X, y


def test_correlation_least_squares_at_zero(rng):
    X, y = _toy(rng, "least_squares")
    assert np.allclose(correlation(X, y, np.zeros(4)), X.T @ y)


def test_correlation_logistic_at_zero(rng):
    X, y = _toy(rng, "logistic")
    assert np.allclose(correlation(X, y, np.zeros(4), "logistic"), X.T @ (y - 0.5))


@pytest.mark.parametrize("kind", ["least_squares", "logistic", "poisson"])
def test_correlation_matches_finite_differences(kind):
    rng = np.random.default_rng(17)
    for _ in range(100):
        X, y = _toy(rng, kind, n=8, p=3)
        beta = 0.5 * rng.standard_normal(3)
        c = correlation(X, y, beta, kind)
        g = fd_gradient(lambda b: smooth_value(kind, X @ b, y), beta)
        scale = max(1.0, np.max(np.abs(g)))
        assert np.max(np.abs(c + g)) <= 1e-5 * scale


def test_lambda_max_orthonormal_readoff():
    X = np.eye(5)[:, :2]
    y = np.array([3.0, -4.0, 0.0, 0.0, 0.0])
    assert lambda_max(X, y) == pytest.approx(4.0)


def test_lambda_max_zero_response():
    assert lambda_max(np.eye(3), np.zeros(3)) == 0.0


def test_lambda_max_kkt_characterization(rng):
    X = rng.standard_normal((20, 10))
    X = (X - X.mean(0)) / X.std(0)
    y = rng.standard_normal(20)
    y -= y.mean()
    lmax = lambda_max(X, y)
    c0 = np.abs(X.T @ y)
    assert np.all(c0 <= lmax)  # beta = 0 stationary at lam >= lam_max
    assert np.any(c0 > 0.999 * lmax)  # and not at 0.999 lam_max


def test_duality_gap_null_model_at_lambda_max(rng):
    X, y = _toy(rng, "least_squares", n=15, p=6)
    y -= y.mean()
    lmax = lambda_max(X, y)
    gap, theta = duality_gap(X, y, np.zeros(6), lmax)
    assert gap <= 1e-10 * max(1.0, y @ y)
    assert np.max(np.abs(X.T @ theta)) <= 1.0 + 1e-12


def test_duality_gap_at_reference_optimum(rng):
    X, y = _toy(rng, "least_squares", n=12, p=5)
    y -= y.mean()
    lam = 0.4 * lambda_max(X, y)
    beta = ista_solve(X, y, lam, gap_tol=1e-12)
    gap, _ = duality_gap(X, y, beta, lam)
    assert gap <= 1e-10


@pytest.mark.parametrize("kind", ["least_squares", "logistic"])
def test_weak_duality_random_points(kind):
    rng = np.random.default_rng(3)
    for _ in range(50):
        X, y = _toy(rng, kind, n=9, p=4)
        beta = rng.standard_normal(4)
        lam = rng.uniform(0.05, 2.0)
        gap, theta = duality_gap(X, y, beta, lam, kind)
        assert gap >= 0.0
        assert np.max(np.abs(X.T @ theta)) <= 1.0 + 1e-12


def test_duality_gap_poisson_unsupported(rng):
    X, y = _toy(rng, "poisson")
    with pytest.raises(ValueError):
        duality_gap(X, y, np.zeros(4), 1.0, "poisson")
    assert not LossModel("poisson", y).supports_gap_safe
    assert LossModel("logistic", np.array([0.0, 1.0])).supports_gap_safe


def test_curvature_weights_logistic_at_zero(rng):
    X, y = _toy(rng, "logistic")
    local = curvature_weights(X, y, np.zeros(4), "logistic")
    assert np.allclose(local.weights, 0.25)
    bounded = curvature_weights(X, y, rng.standard_normal(4), "logistic", bounded=True)
    assert np.allclose(bounded.weights, 0.25)


def test_curvature_weights_least_squares(rng):
    X, y = _toy(rng, "least_squares")
    assert np.allclose(curvature_weights(X, y, rng.standard_normal(4), "least_squares").weights, 1.0)


def test_curvature_weights_poisson_matches_fd(rng):
    X, y = _toy(rng, "poisson", n=6, p=3)
    beta0 = 0.3 * rng.standard_normal(3)
    local = curvature_weights(X, y, beta0, "poisson")
    eta = X @ beta0
    for i in range(6):
        f_i = lambda z, yi=y[i]: np.exp(z) - yi * z
        assert local.weights[i] == pytest.approx(fd_second(f_i, eta[i]), rel=1e-5)


def test_deviance_null_and_saturated(rng):
    X, y = _toy(rng, "least_squares", n=12, p=4)
    y -= y.mean()
    dev, null, ratio = deviance_stats(X, y, np.zeros(4))
    assert dev == pytest.approx(null) and ratio == pytest.approx(0.0)

    beta = rng.standard_normal(4)
    y_span = X @ beta  # response in the column span: zero residual
    dev, null, ratio = deviance_stats(X, y_span, beta)
    assert dev <= 1e-20 * null
    assert ratio == pytest.approx(1.0, abs=1e-10)


def test_deviance_logistic_separable():
    X = np.array([[1.0], [2.0], [3.0], [-1.0], [-2.0], [-3.0]])
    y = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    dev, _, ratio = deviance_stats(X, y, np.array([40.0]), "logistic")
    assert dev < 1e-10
    assert ratio == pytest.approx(1.0)


def test_deviance_constant_response():
    _, null, ratio = deviance_stats(np.eye(4), np.zeros(4), np.zeros(4))
    assert null == 0.0 and ratio == 1.0


def test_zeta_values(rng):
    y = rng.standard_normal(20)
    assert LossModel("least_squares", y).zeta == pytest.approx(y @ y)
    yb = (rng.uniform(size=20) < 0.5).astype(float)
    assert LossModel("logistic", yb).zeta == pytest.approx(20 * np.log(2))
    yp = rng.poisson(2.0, 20).astype(float)
    assert LossModel("poisson", yp).zeta == pytest.approx(20 + np.sum(gammaln(yp + 1)))


def test_response_validation():
    with pytest.raises(ValueError):
        LossModel("logistic", np.array([0.0, 2.0]))
    with pytest.raises(ValueError):
        LossModel("poisson", np.array([-1.0, 2.0]))
    with pytest.raises(ValueError):
        LossModel("huber", np.zeros(3))
