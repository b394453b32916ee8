"""Tests for least-squares predictor fits and the banded inverse object.

The heavy oracles are a direct lstsq fit of each AR window plus an explicit
dense triple product T' D^{-1} T, both assembled with plain loops so they
share no code with the module under test.
"""

import numpy as np
import numpy.testing as npt
import pytest
from scipy.linalg import toeplitz

import longmem as lm


def brute_estimated_inverse(u, K):
    """Dense T' D^{-1} T from per-order lstsq fits, loop assembly."""
    u = np.asarray(u, dtype=float)
    n = len(u)
    T = np.eye(n)
    dv = np.empty(n)
    dv[0] = np.var(u, ddof=1)
    coef = {}
    for k in range(1, K + 1):
        X = np.column_stack([u[k - a: n - a] for a in range(1, k + 1)])
        y = u[k:n]
        c, *_ = np.linalg.lstsq(X, y, rcond=None)
        rss = float(np.sum((y - X @ c) ** 2))
        coef[k] = (c, rss / (n - k))
    for r in range(1, n):
        k = min(r, K)
        c, s2 = coef[k]
        T[r, r - k: r] = -c[::-1]
        dv[r] = s2
    return T.T @ np.diag(1.0 / dv) @ T


def test_fit_ar_ls_matches_lstsq():
    u = lm.simulate(lm.FarimaModel.preset("dgp2", d=0.25), 200, 3)
    n = len(u)
    for k in (1, 2, 5, 9):
        X = np.column_stack([u[k - a: n - a] for a in range(1, k + 1)])
        y = u[k:n]
        want, *_ = np.linalg.lstsq(X, y, rcond=None)
        rss = float(np.sum((y - X @ want) ** 2))
        got_c, got_s2 = lm.fit_ar_ls(u, k)
        npt.assert_allclose(got_c, want, rtol=1e-9)
        npt.assert_allclose(got_s2, rss / (n - k), rtol=1e-9)


def test_fit_ar_ls_order_zero_is_sample_variance():
    u = np.array([1.0, 2.0, 4.0, 0.5])
    c, s2 = lm.fit_ar_ls(u, 0)
    assert len(c) == 0
    npt.assert_allclose(s2, np.var(u, ddof=1), rtol=1e-15)


def test_fit_all_orders_consistent_with_single_fits():
    u = lm.simulate(lm.FarimaModel(d=0.4), 150, 11)
    table = lm.fit_all_orders(u, 6)
    assert table.source == "least_squares"
    for k in range(1, 7):
        c, s2 = lm.fit_ar_ls(u, k)
        npt.assert_allclose(table.coeffs[k - 1], c, rtol=1e-12)
        npt.assert_allclose(table.sigma2_by_order[k], s2, rtol=1e-12)
    npt.assert_allclose(table.sigma2_by_order[0], np.var(u, ddof=1), rtol=1e-12)


def test_fit_window_excludes_early_observations():
    # the order-k objective must start at t = k, not reuse a common window
    u = np.array([100.0, 1.0, -2.0, 3.0, 0.5, -1.5, 2.5, 0.7, -0.3, 1.1])
    n = len(u)
    k = 2
    X = np.column_stack([u[k - a: n - a] for a in range(1, k + 1)])
    want, *_ = np.linalg.lstsq(X, u[k:], rcond=None)
    got, _ = lm.fit_ar_ls(u, k)
    npt.assert_allclose(got, want, rtol=1e-9)


def test_fit_validation_and_degeneracy():
    u = np.ones(40)
    with pytest.raises(lm.NotPositiveDefiniteError):
        lm.fit_ar_ls(u, 0)
    with pytest.raises(lm.LongmemError):
        lm.fit_ar_ls(u, 1)
    x = 0.7 ** np.arange(40)  # exact one-term recursion
    with pytest.raises(lm.NotPositiveDefiniteError):
        lm.fit_ar_ls(x, 1)
    with pytest.raises(lm.SingularGramError) as exc:
        lm.fit_ar_ls(x, 2)  # lagged columns exactly collinear
    assert exc.value.order == 2
    with pytest.raises(lm.ParameterError):
        lm.fit_ar_ls(np.arange(10.0), 5)  # window too short for the order
    with pytest.raises(lm.ParameterError):
        lm.SampleGram(np.zeros((3, 3)), 1)


def test_sample_gram_entries():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    g = lm.SampleGram(x, 2)
    # order-2 window is t = 2..5
    assert g.entry(0, 0, 2) == pytest.approx(sum(x[2:] ** 2))
    assert g.entry(1, 0, 2) == pytest.approx(sum(x[2:] * x[1:5]))
    assert g.entry(2, 2, 2) == pytest.approx(sum(x[0:4] ** 2))
    assert g.entry(1, 2, 2) == g.entry(2, 1, 2)


def test_population_full_band_equals_dense_inverse():
    for n in (5, 12, 30):
        for d in (0.0, 0.25, 0.45):
            g = lm.autocov(lm.FarimaModel.preset("dgp4", d=d), n).values
            inv = lm.build_population_inverse(g, n, n - 1)
            want = np.linalg.inv(toeplitz(g))
            assert np.linalg.norm(inv.dense() - want, 2) < 1e-10


def test_population_ar_exact_at_true_order():
    # an AR(p) inverse is exactly banded at K = p
    phi, s2, n = 0.6, 2.0, 15
    g = s2 * phi ** np.arange(n) / (1 - phi * phi)
    inv = lm.build_population_inverse(g, n, 1)
    want = np.zeros((n, n))
    np.fill_diagonal(want, (1 + phi * phi) / s2)
    want[0, 0] = want[-1, -1] = 1 / s2
    i = np.arange(n - 1)
    want[i, i + 1] = want[i + 1, i] = -phi / s2
    npt.assert_allclose(inv.dense(), want, atol=1e-14)
    npt.assert_allclose(np.linalg.inv(inv.dense()), toeplitz(g), rtol=1e-10)


def test_estimated_inverse_matches_brute_force():
    u = lm.simulate(lm.FarimaModel(d=0.25), 30, 7)
    est = lm.build_estimated_inverse(u, 4)
    brute = brute_estimated_inverse(u, 4)
    assert np.abs(est.dense() - brute).max() < 1e-10
    npt.assert_allclose(lm.materialize(est), est.dense(), atol=1e-13)


def test_apply_matches_dense_product():
    rng = np.random.default_rng(0)
    u = lm.simulate(lm.FarimaModel.preset("dgp3", d=0.3), 50, 5)
    for K in (0, 1, 7):
        inv = lm.build_estimated_inverse(u, K)
        dense = inv.dense()
        for _ in range(3):
            x = rng.standard_normal(50)
            npt.assert_allclose(inv.apply(x), dense @ x,
                                rtol=1e-11, atol=1e-13)
            npt.assert_allclose(lm.inverse_apply(inv, x), inv.apply(x),
                                rtol=0, atol=0)


def test_banded_structure_and_positive_definiteness():
    u = lm.simulate(lm.FarimaModel(d=0.4), 60, 9)
    K = 5
    inv = lm.build_estimated_inverse(u, K)
    M = inv.dense()
    npt.assert_allclose(M, M.T, rtol=0, atol=1e-15)
    for i in range(60):
        for j in range(60):
            if abs(i - j) > K:
                assert M[i, j] == 0.0
    assert np.linalg.eigvalsh(M).min() > 0


def test_population_white_noise_inverse_is_scaled_identity():
    g = lm.autocov(lm.FarimaModel(d=0.0, sigma2=2.5), 10)
    inv = lm.build_population_inverse(g, 10, 3)
    npt.assert_allclose(inv.dense(), np.eye(10) / 2.5, atol=1e-14)


def test_estimated_inverse_white_noise_close_to_identity():
    rng = np.random.default_rng(21)
    u = rng.standard_normal(2000)
    inv = lm.build_estimated_inverse(u, 3)
    gap = np.linalg.norm(lm.materialize(inv) - np.eye(2000), 2)
    assert gap < 0.25


def test_json_roundtrip_preserves_operator():
    u = lm.simulate(lm.FarimaModel.preset("dgp4", d=0.25), 80, 13)
    inv = lm.build_estimated_inverse(u, 6)
    again = lm.BandedCholInverse.from_json(inv.to_json())
    assert again.n == inv.n and again.K == inv.K and again.source == inv.source
    x = np.random.default_rng(1).standard_normal(80)
    npt.assert_allclose(again.apply(x), inv.apply(x), rtol=1e-15)


def test_banded_inverse_validation():
    tab = lm.durbin_levinson(lm.autocov(lm.FarimaModel(d=0.25), 6), 5)
    with pytest.raises(lm.ParameterError):
        lm.BandedCholInverse.from_table(tab, 4, 5)  # K > n-1
    with pytest.raises(lm.ParameterError):
        lm.BandedCholInverse.from_table(tab, 10, 7)  # table too short
    with pytest.raises(lm.NotPositiveDefiniteError):
        lm.BandedCholInverse(n=5, K=1, coeffs=[np.array([0.5])],
                             sigma2_by_order=np.array([1.0, 0.0]))


def test_approximation_error_curve_decreases():
    g = lm.autocov(lm.FarimaModel(d=0.25), 120).values
    curve = lm.approximation_error_curve(g, 120, [2, 4, 8, 16, 119])
    assert np.all(np.diff(curve[:-1]) < 0)
    assert curve[-1] < 1e-10  # full band is exact
    with pytest.raises(lm.ParameterError):
        lm.approximation_error_curve(g, 120, [120])
    with pytest.raises(lm.SizeCapError):
        lm.approximation_error_curve(g, 2001, [2])
