import numpy as np
import pytest

from hesslasso import (
    PathConfig,
    build_gram,
    as_design,
    duality_gap,
    fit_path,
    lambda_grid,
    lambda_max,
    standardize,
    warm_start,
)

from _reference import ista_solve, standardize_dense

NO_STOPS = dict(dev_ratio_stop=None, dev_change_stop=None)


def _sim(rng, n=40, p=12, noise=0.3, loss="least_squares"):
    X = rng.standard_normal((n, p))
    eta = X[:, 0] - 0.8 * X[:, 3]
    if loss == "logistic":
        y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    elif loss == "poisson":
        y = rng.poisson(np.exp(0.4 * eta)).astype(float)
    else:
        y = eta + noise * rng.standard_normal(n)
    return X, y


def test_lambda_grid_endpoints():
    lams = lambda_grid(1.0, 100, 1e-2)
    assert lams[0] == 1.0
    assert lams[-1] == pytest.approx(0.01)
    assert len(lams) == 100


def test_lambda_grid_two_points():
    assert np.allclose(lambda_grid(2.0, 2, 1e-4), [2.0, 2e-4])


def test_lambda_grid_constant_ratio():
    lams = lambda_grid(3.0, 57, 1e-3)
    ratios = lams[1:] / lams[:-1]
    assert np.max(np.abs(ratios - 1e-3 ** (1 / 56))) <= 1e-12


def test_lambda_grid_degenerate():
    assert np.array_equal(lambda_grid(0.0, 10, 1e-2), [0.0])
    assert np.array_equal(lambda_grid(5.0, 1, 1e-2), [5.0])


def test_warm_start_orthonormal_shift(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((15, 4)))
    design = as_design(Q)
    gram = build_gram(design, [0, 1, 2, 3])
    beta = np.array([0.5, -1.0, 2.0, -0.1])
    out = warm_start(beta, 1.0, 0.7, gram)
    assert np.allclose(out, beta + 0.3 * np.sign(beta))


def test_warm_start_identity_at_equal_lambda(rng):
    design = as_design(rng.standard_normal((10, 3)))
    gram = build_gram(design, [0, 1])
    beta = np.array([1.0, -2.0])
    assert np.allclose(warm_start(beta, 0.5, 0.5, gram), beta)


def test_first_step_is_null_model(rng):
    X, y = _sim(rng)
    res = fit_path(standardize(X, y), PathConfig(path_length=5))
    assert res.records[0].n_active == 0
    assert res.records[0].gap == 0.0
    assert res.records[0].lam == pytest.approx(res.lam_max)


def test_certificate_recomputed_from_scratch(rng):
    for loss in ("least_squares", "logistic"):
        X, y = _sim(rng, loss=loss)
        data = standardize(X, y, loss)
        config = PathConfig(loss=loss, path_length=20)
        res = fit_path(data, config)
        assert len(res.records) >= 5
        coefs = res.coef_matrix()
        for i, rec in enumerate(res.records):
            gap, _ = duality_gap(data.design, data.y, coefs[i], rec.lam, loss)
            assert gap < config.epsilon * res.zeta
            assert rec.gap < config.epsilon * res.zeta


def test_full_kkt_clean_at_every_step(rng):
    X, y = _sim(rng, n=60, p=30)
    data = standardize(X, y)
    res = fit_path(data, PathConfig(path_length=25, strategy="hessian"))
    coefs = res.coef_matrix()
    for i, rec in enumerate(res.records):
        resid = data.y - data.design.X @ coefs[i]
        corr = np.abs(data.design.X.T @ resid)
        excluded = np.ones(30, dtype=bool)
        excluded[rec.screened_indices] = False
        assert np.all(corr[excluded] < rec.lam * (1.0 + 1e-9))
        assert set(rec.coef_indices) <= set(rec.screened_indices)


def test_count_invariants(rng):
    X, y = _sim(rng, n=50, p=25)
    res = fit_path(standardize(X, y), PathConfig(path_length=30))
    for rec in res.records:
        assert rec.n_active <= rec.n_screened <= rec.n_gap_safe


@pytest.mark.parametrize("strategy", ["hessian", "strong", "working_plus", "gap_safe_only"])
def test_strategy_agreement_with_reference(rng, strategy):
    X, y = _sim(rng, n=25, p=8, noise=0.5)
    data = standardize(X, y)
    config = PathConfig(strategy=strategy, path_length=8, epsilon=1e-11, **NO_STOPS)
    res = fit_path(data, config)
    assert len(res.records) == 8
    coefs = res.coef_matrix()
    for i, rec in enumerate(res.records):
        ref = ista_solve(data.design.X, data.y, rec.lam, gap_tol=1e-12)
        assert np.max(np.abs(coefs[i] - ref)) <= 1e-4


def test_seeded_determinism(rng):
    X, y = _sim(rng, n=50, p=20)
    data = standardize(X, y)
    config = PathConfig(path_length=15, seed=11)
    r1 = fit_path(data, config)
    r2 = fit_path(data, config)
    assert np.array_equal(r1.coef_matrix(), r2.coef_matrix())
    assert [r.passes for r in r1.records] == [r.passes for r in r2.records]
    assert [r.n_violations for r in r1.records] == [r.n_violations for r in r2.records]


def test_hessian_warm_start_single_pass_steps(rng):
    n, p = 400, 20
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[::4] = 1.0
    y = X @ beta + 0.5 * rng.standard_normal(n)
    data = standardize(X, y)
    res = fit_path(data, PathConfig(path_length=40, strategy="hessian", **NO_STOPS))
    coefs = res.coef_matrix()
    qualifying = []
    for k in range(len(res.records) - 1):
        a, b = coefs[k] != 0, coefs[k + 1] != 0
        same = np.array_equal(a, b) and np.array_equal(
            np.sign(coefs[k][a]), np.sign(coefs[k + 1][b])
        )
        if same and a.any() and res.records[k + 1].alpha == 0.0:
            qualifying.append(res.records[k + 1].passes)
    assert qualifying, "no constant-active-set steps found"
    assert np.mean(np.array(qualifying) == 1) >= 0.9


def test_termination_dev_ratio(rng):
    X = rng.standard_normal((80, 5))
    y = X @ np.array([2.0, -1.0, 0.5, 0.0, 0.0])  # noiseless: ratio -> 1
    res = fit_path(standardize(X, y), PathConfig(path_length=100, dev_change_stop=None))
    assert res.termination == "dev_ratio"
    assert res.records[-1].dev_ratio >= 0.999


def test_termination_dev_change(rng):
    X, y = _sim(rng, n=60, p=8, noise=2.0)
    res = fit_path(standardize(X, y), PathConfig(path_length=100))
    assert res.termination in ("dev_change", "dev_ratio", "max_steps")
    if res.termination == "dev_change":
        assert len(res.records) < 100


def test_termination_degenerate():
    X = np.zeros((10, 3))
    X[:, 0] = np.arange(10.0)
    res = fit_path(standardize(X, np.zeros(10)), PathConfig(path_length=10))
    assert res.termination == "degenerate"
    assert len(res.records) == 1
    assert res.records[0].n_active == 0


def test_poisson_path_disables_gap_machinery(rng):
    X, y = _sim(rng, n=50, p=10, loss="poisson")
    data = standardize(X, y, "poisson")
    res = fit_path(data, PathConfig(loss="poisson", path_length=10))
    assert res.criterion == "primal_decrease"
    assert all(rec.n_gap_safe == data.design.p for rec in res.records)
    with pytest.raises(ValueError):
        fit_path(data, PathConfig(loss="poisson", strategy="gap_safe_only"))


def test_poisson_kkt_clean(rng):
    X, y = _sim(rng, n=50, p=10, loss="poisson")
    data = standardize(X, y, "poisson")
    res = fit_path(data, PathConfig(loss="poisson", path_length=12, strategy="working_plus"))
    coefs = res.coef_matrix()
    for i, rec in enumerate(res.records):
        eta = data.design.X @ coefs[i]
        corr = np.abs(data.design.X.T @ (data.y - np.exp(eta)))
        excluded = np.ones(10, dtype=bool)
        excluded[rec.screened_indices] = False
        assert np.all(corr[excluded] < rec.lam * (1.0 + 1e-9))


def test_custom_lambdas_validation(rng):
    X, y = _sim(rng)
    data = standardize(X, y)
    with pytest.raises(ValueError):
        fit_path(data, PathConfig(lambdas=np.array([1.0, 2.0])))
    with pytest.raises(ValueError):
        fit_path(data, PathConfig(lambdas=np.array([1.0, -0.5])))
    lmax = lambda_max(data.design.X, data.y)
    res = fit_path(data, PathConfig(lambdas=np.array([0.8, 0.5, 0.2]) * lmax, **NO_STOPS))
    assert len(res.records) == 3


def test_matches_sklearn_lasso(rng):
    from sklearn.linear_model import Lasso

    X, y = _sim(rng, n=60, p=10, noise=0.5)
    Xs, ys = standardize_dense(X, y)
    data = standardize(X, y)
    lmax = lambda_max(Xs, ys)
    lam = 0.3 * lmax
    res = fit_path(data, PathConfig(lambdas=np.array([lam]), epsilon=1e-10, **NO_STOPS))
    sk = Lasso(alpha=lam / 60, fit_intercept=False, tol=1e-12, max_iter=100000)
    sk.fit(Xs, ys)
    assert np.max(np.abs(res.coef_matrix()[0] - sk.coef_)) <= 1e-6


def test_unknown_strategy_rejected(rng):
    X, y = _sim(rng)
    with pytest.raises(ValueError):
        fit_path(standardize(X, y), PathConfig(strategy="fastest"))


def test_violations_resolved_by_working_plus(rng):
    X, _, = np.linalg.qr(rng.standard_normal((60, 2)))[0], None
    Xc = rng.standard_normal((60, 1))
    X = np.hstack([Xc + 0.05 * rng.standard_normal((60, 20)), Xc])  # correlated block
    y = (X[:, 0] + X[:, -1] + 0.2 * rng.standard_normal(60))
    data = standardize(X, y)
    res = fit_path(data, PathConfig(strategy="working_plus", path_length=30))
    assert res.total_violations > 0  # new entrants arrive via KKT checks
    coefs = res.coef_matrix()
    for i, rec in enumerate(res.records):  # and safety is restored
        gap, _ = duality_gap(data.design, data.y, coefs[i], rec.lam)
        assert gap < 1e-4 * res.zeta


def test_sparse_dense_paths_agree(rng):
    import scipy.sparse as sp

    Xs = sp.random(60, 40, density=0.25, random_state=9, format="csc")
    y = np.asarray(Xs[:, 0].todense()).ravel() + 0.1 * rng.standard_normal(60)
    cfg = PathConfig(path_length=20, strategy="hessian", epsilon=1e-8, seed=4)
    res_sparse = fit_path(standardize(Xs, y), cfg)
    res_dense = fit_path(standardize(np.asarray(Xs.todense()), y), cfg)
    k = min(len(res_sparse.records), len(res_dense.records))
    diff = np.max(np.abs(res_sparse.coef_matrix()[:k] - res_dense.coef_matrix()[:k]))
    assert diff <= 1e-6
    for res in (res_sparse, res_dense):
        for rec in res.records:
            assert rec.gap < 1e-8 * res.zeta


def test_sparse_logistic_full_weight_mode(rng):
    import scipy.sparse as sp

    # density * n / max(n, p) < 1e-3 selects exact weighted Gram rebuilds
    Xs = sp.random(50, 400, density=0.005, random_state=2, format="csc")
    eta = 2.0 * np.asarray(Xs[:, 0].todense()).ravel()
    y = (rng.uniform(size=50) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    data = standardize(Xs, y, "logistic")
    assert data.design.density * 50 / 400 < 1e-3
    res = fit_path(data, PathConfig(loss="logistic", strategy="hessian", path_length=15))
    assert len(res.records) >= 2
    coefs = res.coef_matrix()
    for i, rec in enumerate(res.records):
        gap, _ = duality_gap(data.design, data.y, coefs[i], rec.lam, "logistic")
        assert gap < 1e-4 * res.zeta


def test_duplicate_columns_latch_preconditioning(rng):
    X = rng.standard_normal((40, 6))
    X[:, 3] = X[:, 0]  # exact duplicate: singular active Gram once both enter
    y = X[:, 0] + 0.5 * X[:, 1] + 0.05 * rng.standard_normal(40)
    data = standardize(X, y)
    res = fit_path(data, PathConfig(strategy="hessian", path_length=40, xi=1e-4,
                                    **NO_STOPS))
    both_active = [
        rec for rec in res.records
        if {0, 3} <= set(rec.coef_indices.tolist())
    ]
    assert both_active, "duplicates never co-activated"
    assert any(rec.alpha > 0 for rec in res.records)
    coefs = res.coef_matrix()
    for i, rec in enumerate(res.records):
        gap, _ = duality_gap(data.design, data.y, coefs[i], rec.lam)
        assert gap < 1e-4 * res.zeta


def test_gap_safe_augmentation_toggle(rng):
    X, y = _sim(rng, n=50, p=30)
    data = standardize(X, y)
    on = fit_path(data, PathConfig(strategy="working_plus", path_length=20,
                                   gap_safe_augmentation=True))
    off = fit_path(data, PathConfig(strategy="working_plus", path_length=20,
                                    gap_safe_augmentation=False))
    k = min(len(on.records), len(off.records))
    assert np.max(np.abs(on.coef_matrix()[:k] - off.coef_matrix()[:k])) <= 1e-3
    for res in (on, off):
        for rec in res.records:
            assert rec.gap < 1e-4 * res.zeta


def test_incremental_gram_toggle(rng):
    X, y = _sim(rng, n=50, p=20)
    data = standardize(X, y)
    inc = fit_path(data, PathConfig(strategy="hessian", path_length=20,
                                    incremental_gram=True))
    scratch = fit_path(data, PathConfig(strategy="hessian", path_length=20,
                                        incremental_gram=False))
    k = min(len(inc.records), len(scratch.records))
    assert np.max(np.abs(inc.coef_matrix()[:k] - scratch.coef_matrix()[:k])) <= 1e-8


def test_subproblem_stall_aborts_path(rng):
    X, y = _sim(rng, n=40, p=15, noise=0.2)
    data = standardize(X, y)
    res = fit_path(data, PathConfig(path_length=30, max_passes=1, epsilon=1e-12,
                                    **NO_STOPS))
    assert res.termination == "stalled"
    # recorded steps (if any) still carry valid certificates
    coefs = res.coef_matrix()
    for i, rec in enumerate(res.records):
        gap, _ = duality_gap(data.design, data.y, coefs[i], rec.lam)
        assert gap < 1e-12 * res.zeta
