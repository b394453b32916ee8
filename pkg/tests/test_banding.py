"""Tests for block-based bandwidth selection and loss sensitivity."""

import numpy as np
import numpy.testing as npt
import pytest

import longmem as lm


def test_sar_defaults_frozen_values():
    assert lm.sar_defaults(250) == lm.SarConfig(b=50, L=5, H=10)
    assert lm.sar_defaults(1000) == lm.SarConfig(b=200, L=6, H=16)
    assert lm.sar_defaults(4000) == lm.SarConfig(b=800, L=8, H=28)
    assert lm.sar_defaults(50) == lm.SarConfig(b=10, L=3, H=5)
    with pytest.raises(lm.ParameterError):
        lm.sar_defaults(19)


def test_sar_defaults_clamp_small_n():
    # nominal H = 4 exceeds half the block length 5, nominal L = 3 exceeds H - 1
    assert lm.sar_defaults(25) == lm.SarConfig(b=5, L=1, H=2, l_reduced=True)


def test_sar_config_validation():
    with pytest.raises(lm.ParameterError):
        lm.SarConfig(b=50, L=10, H=10)  # candidates must stay below H
    with pytest.raises(lm.ParameterError):
        lm.SarConfig(b=18, L=3, H=10)  # block too short for order H - 1 fits
    with pytest.raises(lm.ParameterError):
        lm.SarConfig(b=50, L=0, H=10)


def test_select_k_deterministic_and_traced():
    u = lm.simulate(lm.FarimaModel(d=0.25), 1000, 5)
    t1 = lm.select_k(u)
    t2 = lm.select_k(u)
    npt.assert_array_equal(t1.risks, t2.risks)
    assert t1.chosen_k == t2.chosen_k
    npt.assert_array_equal(t1.candidates, np.arange(6, 16))
    assert len(t1.risks) == 10
    assert t1.chosen_k == t1.candidates[np.argmin(t1.risks)]
    assert t1.skipped_blocks == 0


def test_select_k_white_noise_prefers_narrow_bands():
    floor = lm.sar_defaults(1000).L
    for seed in range(10):
        u = np.random.default_rng(seed).standard_normal(1000)
        assert lm.select_k(u).chosen_k <= floor + 1


def test_select_k_single_candidate():
    u = np.random.default_rng(4).standard_normal(200)
    tr = lm.select_k(u, lm.SarConfig(b=40, L=7, H=8))
    assert tr.chosen_k == 7 and len(tr.risks) == 1


def test_select_k_risk_curve_frozen_shape():
    # long-memory series at n = 1000: the risk is lowest near the candidate
    # floor and grows toward the widest bands
    u = lm.simulate(lm.FarimaModel(d=0.25), 1000, 77)
    tr = lm.select_k(u)
    assert tr.chosen_k == 6
    assert tr.risks[0] < tr.risks[-1]
    assert tr.candidates[0] == tr.config.L
    assert tr.candidates[-1] == tr.config.H - 1


def test_select_k_skips_degenerate_blocks():
    u = np.random.default_rng(3).standard_normal(1000)
    u[200:400] = 1.0  # one constant block
    tr = lm.select_k(u)
    assert tr.skipped_blocks == 1
    assert 6 <= tr.chosen_k <= 15


def test_select_k_majority_degenerate_raises():
    u = np.random.default_rng(1).standard_normal(1000)
    u[0:200] = 0.0
    u[200:400] = 1.0
    u[400:600] = 2.0
    with pytest.raises(lm.DegenerateDataError):
        lm.select_k(u)
    with pytest.raises(lm.DegenerateDataError):
        lm.select_k(np.ones(1000))


def test_select_k_validation():
    u = np.random.default_rng(0).standard_normal(49)
    with pytest.raises(lm.ParameterError):
        lm.select_k(u, lm.SarConfig(b=48, L=3, H=24))  # 2H + 2 > n


def test_sensitivity_identity_scaling_is_exact_zero():
    model = lm.FarimaModel(d=0.25)
    u = lm.simulate(model, 1000, 77)
    res = lm.sensitivity(u, 1.0, lm.autocov(model, 1000))
    assert res.sf == 0.0
    assert res.k_scaled == res.chosen_k


def test_sensitivity_moves_loss_and_caches():
    model = lm.FarimaModel(d=0.25)
    gam = lm.autocov(model, 1000)
    u = lm.simulate(model, 1000, 77)
    cache = {}
    r = lm.sensitivity(u, 1.5, gam, _cache=cache)
    assert r.chosen_k == 6 and r.k_scaled == 9
    assert r.base_loss > 0 and r.scaled_loss > 0
    npt.assert_allclose(r.sf, (r.scaled_loss - r.base_loss) / r.base_loss,
                        rtol=1e-15)
    assert {"trace", "true_dense", "base_loss"} <= set(cache)
    # cached second call must agree with a cold call
    again = lm.sensitivity(u, 1.5, gam)
    npt.assert_allclose(again.sf, r.sf, rtol=1e-9)
    # sharing the cache across c reuses the base loss
    r2 = lm.sensitivity(u, 0.5, gam, _cache=cache)
    assert r2.base_loss == r.base_loss
    assert r2.k_scaled == 3


def test_sensitivity_clamps_scaled_bandwidth():
    model = lm.FarimaModel(d=0.25)
    gam = lm.autocov(model, 1000)
    u = lm.simulate(model, 1000, 77)
    cache = {}
    assert lm.sensitivity(u, 400.0, gam, _cache=cache).k_scaled == 499
    assert lm.sensitivity(u, 1e-6, gam, _cache=cache).k_scaled == 1
    with pytest.raises(lm.ParameterError):
        lm.sensitivity(u, 0.0, gam)


def test_sensitivity_zero_base_loss_raises():
    model = lm.FarimaModel(d=0.25)
    gam = lm.autocov(model, 1000)
    u = lm.simulate(model, 1000, 77)
    trace = lm.select_k(u)
    cache = {"trace": trace,
             "true_dense": lm.true_inverse_dense(gam, 1000),
             "base_loss": 0.0}
    with pytest.raises(lm.DegenerateDataError):
        lm.sensitivity(u, 3.0, gam, _cache=cache)


def test_true_inverse_dense_matches_linalg_inv():
    from scipy.linalg import toeplitz
    g = lm.autocov(lm.FarimaModel.preset("dgp3", d=0.3), 40)
    got = lm.true_inverse_dense(g, 40)
    want = np.linalg.inv(toeplitz(g.values))
    npt.assert_allclose(got, want, rtol=1e-8, atol=1e-12)
    with pytest.raises(lm.ParameterError):
        lm.true_inverse_dense(g, 41)
