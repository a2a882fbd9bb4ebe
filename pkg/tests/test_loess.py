import math

import numpy as np
import pytest

from epidetect import LoessConfig, fit
from epidetect.loess import basis_size


def oracle_basis(X, degree):
    """Uncentered polynomial basis used by the independent oracle."""
    X = np.atleast_2d(X)
    n, d = X.shape
    cols = [np.ones(n)]
    if degree >= 1:
        cols.extend(X[:, j] for j in range(d))
    if degree == 2:
        for j in range(d):
            for l in range(j, d):
                cols.append(X[:, j] * X[:, l])
    return np.column_stack(cols)


def dense_wls_oracle(X, y, x, span, degree, min_neighbors=None, uniform=False):
    """Independent loess prediction: dense weighted least squares via pinv.

    Builds the full N-point weight vector (tricube on the k-nearest
    neighborhood in standardized distance, zero elsewhere), solves the
    uncentered normal equations with a pseudo-inverse, and returns the
    predicted mean plus the full equivalent-kernel row.
    """
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    n, d = X.shape
    scales = X.std(axis=0, ddof=1) if n > 1 else np.ones(d)
    scales = np.where(scales > 0, scales, 1.0)
    dist = np.sqrt((((X - x) / scales) ** 2).sum(axis=1))

    r = basis_size(d, degree)
    k = min(n, max(math.ceil(span * n), min_neighbors if min_neighbors else r))
    dmax = np.sort(dist)[k - 1]
    w = np.zeros(n)
    mask = dist <= dmax
    if uniform or dmax == 0.0:
        w[mask] = 1.0
    else:
        w[mask] = (1.0 - (dist[mask] / dmax) ** 3) ** 3
    if w.sum() == 0.0:
        w[mask] = 1.0

    B = oracle_basis(X, degree)
    A = B.T @ (w[:, None] * B)
    A_inv = np.linalg.pinv(A)
    bx = oracle_basis(x[None, :], degree)[0]
    l_row = (w[:, None] * B) @ (A_inv @ bx)
    return float(bx @ A_inv @ B.T @ (w * y)), l_row


class TestFitValidation:
    def test_underdetermined_errors(self):
        # r = 3 for d = 2 linear; r - 1 points must be rejected
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(ValueError):
            fit(X, [1.0, 2.0], LoessConfig(span=1.0, degree=1))

    def test_non_finite_rejected(self):
        X = np.array([[0.0], [1.0], [np.nan], [3.0]])
        with pytest.raises(ValueError):
            fit(X, [1.0, 2.0, 3.0, 4.0], LoessConfig(span=1.0))
        with pytest.raises(ValueError):
            fit(np.array([[0.0], [1.0]]), [1.0, np.inf], LoessConfig(span=1.0, degree=0))

    def test_dimension_cap(self):
        X = np.zeros((20, 5))
        with pytest.raises(ValueError):
            fit(X, np.zeros(20), LoessConfig())

    def test_duplicated_design_points_accepted(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0, 1, size=(15, 2))
        X = np.vstack([X, X[:5], X[:5]])  # heavy replication is expected usage
        y = X[:, 0] + rng.normal(0, 0.05, len(X))
        model = fit(X, y, LoessConfig(span=0.8))
        pred = model.predict(X[0])
        assert np.isfinite(pred.mean) and np.isfinite(pred.stderr)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LoessConfig(span=0.0)
        with pytest.raises(ValueError):
            LoessConfig(degree=3)
        with pytest.raises(ValueError):
            LoessConfig(kernel="boxcar")
        with pytest.raises(ValueError):
            fit(np.zeros((10, 2)), np.zeros(10), LoessConfig(min_neighbors=1))


class TestExactness:
    def test_reproduces_linear_functions(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(-1, 2, size=(40, 1))
        y = 2.0 * X[:, 0] + 1.0
        model = fit(X, y, LoessConfig(span=0.4))
        for xq in np.linspace(-0.5, 1.5, 11):
            pred = model.predict([xq])
            assert pred.mean == pytest.approx(2.0 * xq + 1.0, abs=1e-8)

    def test_constant_responses_exact_with_zero_stderr(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(0, 1, size=(25, 2))
        model = fit(X, np.full(25, 3.25), LoessConfig(span=0.6))
        pred = model.predict([0.4, 0.7])
        assert pred.mean == pytest.approx(3.25, abs=1e-10)
        assert pred.stderr == pytest.approx(0.0, abs=1e-10)

    def test_kernel_sums_to_one(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(0, 5, size=(60, 3))
        y = rng.normal(size=60)
        model = fit(X, y, LoessConfig(span=0.5))
        for _ in range(20):
            xq = rng.uniform(0.5, 4.5, size=3)
            pred = model.predict(xq, with_kernel=True)
            assert pred.kernel.sum() == pytest.approx(1.0, abs=1e-10)


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_dense_wls(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(20, 50))
        d = int(rng.integers(1, 4))
        degree = int(rng.integers(0, 3))
        span = float(rng.uniform(0.3, 1.0))
        X = rng.uniform(0, 5, size=(n, d))
        y = rng.normal(size=n) + X.sum(axis=1)
        cfg = LoessConfig(span=span, degree=degree)
        model = fit(X, y, cfg)
        for _ in range(5):
            xq = rng.uniform(0.5, 4.5, size=d)
            pred = model.predict(xq, with_kernel=True)
            mean_o, l_o = dense_wls_oracle(X, y, xq, span, degree)
            assert pred.mean == pytest.approx(mean_o, abs=1e-8)
            np.testing.assert_allclose(pred.kernel, l_o, atol=1e-8)

    def test_span_one_uniform_equals_global_ols(self):
        rng = np.random.default_rng(42)
        X = rng.uniform(0, 2, size=(30, 2))
        y = 1.0 + X @ [0.5, -2.0] + rng.normal(0, 0.3, 30)
        model = fit(X, y, LoessConfig(span=1.0, degree=1, kernel="uniform"))
        B = oracle_basis(X, 1)
        coef, *_ = np.linalg.lstsq(B, y, rcond=None)
        for _ in range(5):
            xq = rng.uniform(0, 2, size=2)
            expected = oracle_basis(xq[None, :], 1)[0] @ coef
            assert model.predict(xq).mean == pytest.approx(expected, abs=1e-8)


class TestPredictionProperties:
    def test_row_reordering_invariance(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(0, 1, size=(40, 2))
        y = rng.normal(size=40)
        perm = rng.permutation(40)
        a = fit(X, y, LoessConfig(span=0.5))
        b = fit(X[perm], y[perm], LoessConfig(span=0.5))
        xq = [0.5, 0.5]
        pa, pb = a.predict(xq), b.predict(xq)
        assert pa.mean == pytest.approx(pb.mean, abs=1e-10)
        assert pa.stderr == pytest.approx(pb.stderr, abs=1e-10)

    def test_stderr_composition(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(0, 1, size=(50, 2))
        y = rng.normal(size=50)
        model = fit(X, y, LoessConfig(span=0.5))
        pred = model.predict([0.3, 0.3])
        assert pred.stderr == pytest.approx(
            math.sqrt(pred.local_sigma2) * pred.kernel_norm, rel=1e-12
        )

    def test_query_duplicate_gets_full_weight(self):
        X = np.array([[0.0], [0.5], [1.0], [1.5], [2.0]])
        y = np.array([0.0, 1.0, 4.0, 9.0, 16.0])
        model = fit(X, y, LoessConfig(span=0.8))
        pred = model.predict([1.0], with_kernel=True)
        # tricube weight at distance zero is 1; prediction well-defined
        assert np.isfinite(pred.mean)
        assert pred.kernel[2] != 0.0

    def test_singular_local_system_falls_back_to_weighted_mean(self):
        # constant second coordinate: centered basis column identically zero
        X = np.column_stack([np.arange(10.0), np.full(10, 3.0)])
        y = np.arange(10.0) ** 2
        model = fit(X, y, LoessConfig(span=1.0))
        pred = model.predict([4.0, 3.0], with_kernel=True)
        assert pred.degenerate
        assert pred.kernel.sum() == pytest.approx(1.0, abs=1e-12)
        assert min(y) <= pred.mean <= max(y)

    def test_predict_many_matches_predict(self):
        rng = np.random.default_rng(13)
        X = rng.uniform(0, 1, size=(45, 2))
        y = rng.normal(size=45)
        model = fit(X, y, LoessConfig(span=0.45))
        Q = rng.uniform(0, 1, size=(12, 2))
        means, stderrs = model.predict_many(Q)
        for j in range(12):
            pred = model.predict(Q[j])
            assert means[j] == pytest.approx(pred.mean, abs=1e-12)
            assert stderrs[j] == pytest.approx(pred.stderr, abs=1e-12)
            assert model.predict_mean(Q[j]) == pytest.approx(pred.mean, abs=1e-12)
