"""Tests for the Monte Carlo table harness."""

import json
import math

import numpy as np
import numpy.testing as npt
import pytest

import longmem as lm
from longmem.banding import _loss_estimate
from longmem.experiments import _check_failures
from longmem.farima import _simulate_from_gamma
from longmem.linops import DenseOp
from longmem.regression import build_detrended_inverse, detrend, polynomial_design


# frozen outputs of the rate benchmark formula
OP_FROZEN = {
    (0.25, 1000): 0.20154556845606675,
    (0.1, 1000): 0.2798299297137508,
    (0.45, 4000): 0.26258829575727227,
}


def test_op_rate_frozen_values():
    for (d, n), want in OP_FROZEN.items():
        npt.assert_allclose(lm.op_rate(d, n), want, rtol=1e-15)


def test_op_rate_branch_boundary_and_validation():
    ln = math.log(500)
    low = 0.05 * 500 ** (-0.225 / 4.45) * ln ** (4.225 / 4.45)
    npt.assert_allclose(lm.op_rate(0.225, 500), low, rtol=1e-15)
    high = 0.05 * 500 ** (-0.3 * 0.4 / 2.6) * ln ** (2.3 / 2.6)
    npt.assert_allclose(lm.op_rate(0.3, 500), high, rtol=1e-15)
    for bad_d in (0.0, 0.5, -0.1):
        with pytest.raises(lm.ParameterError):
            lm.op_rate(bad_d, 100)
    with pytest.raises(lm.ParameterError):
        lm.op_rate(0.25, 1)


def test_config_validation():
    ok = dict(table=1, reps=5, d_values=(0.25,), dgp_n=(("dgp1", (100,)),))
    lm.ExperimentConfig(**ok)
    for patch in (dict(table=5), dict(reps=1), dict(d_values=()),
                  dict(d_values=(0.6,)), dict(dgp_n=()),
                  dict(dgp_n=(("nope", (100,)),)),
                  dict(dgp_n=(("dgp1", (19,)),))):
        with pytest.raises(lm.ParameterError):
            lm.ExperimentConfig(**{**ok, **patch})
    with pytest.raises(lm.ParameterError):
        lm.ExperimentConfig(table=3, d_values=(0.25,))  # needs model_n
    with pytest.raises(lm.ParameterError):
        lm.ExperimentConfig(table=3, d_values=(0.25,), model_n=((9, (100,)),))
    with pytest.raises(lm.ParameterError):
        lm.ExperimentConfig(table=4, d_values=(0.25,),
                            dgp_n=(("dgp1", (100,)),))  # needs c_list
    with pytest.raises(lm.ParameterError):
        lm.ExperimentConfig(table=4, d_values=(0.25,),
                            dgp_n=(("dgp1", (100,)),), c_list=(0.0,))


def test_grid_builders():
    desk = lm.desk_config(1)
    assert desk.reps == 250 and desk.seed == 42
    assert desk.dgp_n[0] == ("dgp1", (250, 500, 1000))
    assert len(desk.dgp_n) == 4
    full = lm.full_config(3)
    assert full.reps == 1000
    assert full.model_n == tuple((m, (250, 500, 1000, 2000, 4000))
                                 for m in (1, 2, 3))
    assert full.d_values == (0.1, 0.25, 0.45)
    assert lm.desk_config(4).c_list == (0.8, 1.2)
    with pytest.raises(lm.ParameterError):
        lm.desk_config(5)


def test_config_from_file_json_and_toml(tmp_path):
    js = tmp_path / "grid.json"
    js.write_text(json.dumps({"table": 4, "reps": 7, "seed": 3,
                              "d_values": [0.3], "dgps": {"dgp2": [100]},
                              "c_list": [0.5]}))
    cfg = lm.config_from_file(str(js))
    assert cfg == lm.ExperimentConfig(table=4, reps=7, seed=3, d_values=(0.3,),
                                      dgp_n=(("dgp2", (100,)),), c_list=(0.5,))
    tm = tmp_path / "grid.toml"
    tm.write_text('table = 3\nd_values = [0.25]\n[models]\n1 = [120]\n')
    cfg2 = lm.config_from_file(str(tm), reps=4, seed=9)
    assert cfg2 == lm.ExperimentConfig(table=3, reps=4, seed=9,
                                       d_values=(0.25,), model_n=((1, (120,)),))
    bad = tmp_path / "bad.json"
    bad.write_text('{"reps": 3}')
    with pytest.raises(lm.ParameterError):
        lm.config_from_file(str(bad))


def test_l2_cell_matches_hand_loop():
    # replays the exact per-replication seed stream of the harness
    cfg = lm.ExperimentConfig(table=1, reps=4, seed=13, d_values=(0.3,),
                              dgp_n=(("dgp2", (80,)),))
    row = lm.run_l2_table(cfg).rows[0]
    gam = lm.autocov(lm.FarimaModel.preset("dgp2", d=0.3), 80).values
    true_op = DenseOp(lm.true_inverse_dense(gam, 80))
    losses = []
    for r in range(4):
        ss = np.random.SeedSequence([13, 1, 2, round(0.3 * 1e6), 80, r])
        u = _simulate_from_gamma(gam, np.random.default_rng(ss).standard_normal(80))
        k = lm.select_k(u).chosen_k
        losses.append(_loss_estimate(lm.build_estimated_inverse(u, k),
                                     true_op, 1e-6))
    npt.assert_allclose(row.value, np.mean(losses), rtol=1e-12)
    npt.assert_allclose(row.se, np.std(losses, ddof=1) / 2.0, rtol=1e-12)
    assert row.reps_used == 4 and row.group == "dgp2"


def test_sf_cell_matches_hand_loop():
    cfg = lm.ExperimentConfig(table=4, reps=3, seed=21, d_values=(0.25,),
                              dgp_n=(("dgp1", (80,)),), c_list=(2.0,))
    row = lm.run_sf_table(cfg).rows[0]
    gam = lm.autocov(lm.FarimaModel(d=0.25), 80).values
    dense = lm.true_inverse_dense(gam, 80)
    sfs = []
    for r in range(3):
        ss = np.random.SeedSequence([21, 4, 1, round(0.25 * 1e6), 80, r])
        u = _simulate_from_gamma(gam, np.random.default_rng(ss).standard_normal(80))
        sfs.append(lm.sensitivity(u, 2.0, gam, rel_tol=1e-6,
                                  _cache={"true_dense": dense}).sf)
    npt.assert_allclose(row.value, np.mean(sfs), rtol=1e-12)
    assert row.extras["c"] == 2.0


def test_regression_cell_matches_hand_loop():
    cfg = lm.ExperimentConfig(table=3, reps=3, seed=8, d_values=(0.2,),
                              model_n=((2, (90,)),))
    row = lm.run_regression_table(cfg).rows[0]
    gam = lm.autocov(lm.FarimaModel(d=0.2), 90).values
    true_op = DenseOp(lm.true_inverse_dense(gam, 90))
    signal = lm.trend_signal(90, 2)
    design = polynomial_design(90, (0, 1))
    known, selected, hits = [], [], 0
    for r in range(3):
        ss = np.random.SeedSequence([8, 3, 2, round(0.2 * 1e6), 90, r])
        u = _simulate_from_gamma(gam, np.random.default_rng(ss).standard_normal(90))
        y = signal + u

        def loss(dm):
            k = lm.select_k(detrend(y, dm).resid).chosen_k
            return _loss_estimate(build_detrended_inverse(y, dm, k),
                                  true_op, 1e-6)

        known.append(loss(design))
        exps = tuple(lm.model_select(y, 90).exponents)
        if exps == (0, 1):
            hits += 1
            selected.append(known[-1])
        else:
            selected.append(loss(polynomial_design(90, exps)))
    npt.assert_allclose(row.value, np.mean(known), rtol=1e-12)
    npt.assert_allclose(row.extras["l2_selected_mean"], np.mean(selected),
                        rtol=1e-12)
    npt.assert_allclose(row.extras["q_hat"], hits / 3.0, rtol=1e-15)


def test_thread_count_does_not_change_results(monkeypatch):
    cfg = lm.ExperimentConfig(table=1, reps=5, seed=2, d_values=(0.25,),
                              dgp_n=(("dgp1", (100,)),))
    serial = lm.table_csv(lm.run_table(cfg))
    monkeypatch.setenv("LONGMEM_THREADS", "3")
    pooled = lm.table_csv(lm.run_table(cfg))
    assert pooled == serial
    monkeypatch.setenv("LONGMEM_THREADS", "1")
    assert lm.table_csv(lm.run_table(cfg)) == serial


def test_worker_count(monkeypatch):
    monkeypatch.setenv("LONGMEM_THREADS", "4")
    assert lm.worker_count(10) == 4
    assert lm.worker_count(2) == 2
    monkeypatch.setenv("LONGMEM_THREADS", "0")
    with pytest.raises(lm.ParameterError):
        lm.worker_count(10)
    monkeypatch.setenv("LONGMEM_THREADS", "two")
    with pytest.raises(lm.ParameterError):
        lm.worker_count(10)
    monkeypatch.delenv("LONGMEM_THREADS")
    assert lm.worker_count(1) == 1


def test_csv_headers_and_formatting():
    mk = lambda table, extras: lm.ExperimentRow(
        table, "dgp1" if table != 3 else "model1", 0.25, 100,
        0.1234567, 0.0123456, 99, extras)
    cfg1 = lm.ExperimentConfig(table=1, d_values=(0.25,),
                               dgp_n=(("dgp1", (100,)),))
    out = lm.table_csv(lm.TableResult(1, cfg1, (mk(1, {}),)))
    assert out == ("dgp,d,n,l2_mean,l2_se,reps\n"
                   "dgp1,0.25,100,0.123457,0.012346,99\n")
    out2 = lm.table_csv(lm.TableResult(
        2, cfg1, (mk(2, {"op_rate": 0.2, "ratio": 0.61728}),)))
    assert out2.splitlines()[0] == "dgp,d,n,l2_mean,l2_se,op_rate,ratio,reps"
    assert out2.splitlines()[1].endswith(",0.200000,0.617280,99")
    out3 = lm.table_csv(lm.TableResult(
        3, cfg1, (mk(3, {"l2_selected_mean": 0.2, "l2_selected_se": 0.01,
                         "q_hat": 0.98}),)))
    assert out3.splitlines()[0] == ("model,d,n,l2_known_mean,l2_known_se,"
                                    "l2_selected_mean,l2_selected_se,q_hat,reps")
    assert out3.splitlines()[1].startswith("model1,0.25,100,")
    out4 = lm.table_csv(lm.TableResult(4, cfg1, (mk(4, {"c": 0.8}),)))
    assert out4.splitlines()[0] == "dgp,d,n,c,sf_mean,sf_se,reps"
    assert out4.splitlines()[1] == "dgp1,0.25,100,0.8,0.123457,0.012346,99"


def test_table_json_mirrors_rows():
    cfg = lm.ExperimentConfig(table=4, reps=3, seed=21, d_values=(0.25,),
                              dgp_n=(("dgp1", (80,)),), c_list=(0.5, 2.0))
    res = lm.run_table(cfg)
    doc = json.loads(lm.table_json(res))
    assert doc["table"] == 4 and doc["seed"] == 21
    assert len(doc["rows"]) == 2
    npt.assert_allclose(doc["rows"][1]["sf_mean"], res.rows[1].value, rtol=0)
    assert doc["rows"][0]["c"] == 0.5
    assert set(doc["summary"]) == {"80"}
    assert "failures" not in doc
    for key in ("min", "q1", "median", "q3", "max", "mean"):
        assert key in doc["summary"]["80"]


def test_failure_threshold():
    _check_failures([], 100, "x")
    _check_failures(["a", "b"], 100, "x")  # exactly 2 percent passes
    with pytest.raises(lm.DegenerateDataError):
        _check_failures(["a", "b", "c"], 100, "x")
    with pytest.raises(lm.DegenerateDataError):
        _check_failures(["boom"], 4, "x")


def test_runner_table_dispatch_guards():
    cfg1 = lm.ExperimentConfig(table=1, d_values=(0.25,),
                               dgp_n=(("dgp1", (100,)),))
    with pytest.raises(lm.ParameterError):
        lm.run_regression_table(cfg1)
    with pytest.raises(lm.ParameterError):
        lm.run_sf_table(cfg1)
    cfg3 = lm.ExperimentConfig(table=3, d_values=(0.25,),
                               model_n=((1, (100,)),))
    with pytest.raises(lm.ParameterError):
        lm.run_l2_table(cfg3)


def test_master_seed_changes_draws():
    base = dict(table=1, reps=3, d_values=(0.25,), dgp_n=(("dgp1", (80,)),))
    a = lm.run_table(lm.ExperimentConfig(seed=1, **base)).rows[0].value
    b = lm.run_table(lm.ExperimentConfig(seed=2, **base)).rows[0].value
    assert a != b
