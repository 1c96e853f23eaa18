import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from evonet.analysis import (
    RunManifest,
    as_probabilities,
    compare,
    estimate_tail_exponent,
    kolmogorov_distance,
    loglog_curvature,
    select_kmin,
    trend_test,
    tv_distance,
)
from evonet.errors import InsufficientTail

from conftest import ex1_graph_run, solved


def zeta_hist(gamma, n, seed):
    x = stats.zipf.rvs(gamma, size=n, random_state=np.random.default_rng(seed))
    return np.bincount(x)


def test_zeta_samples_recover_exponent():
    fit = estimate_tail_exponent(zeta_hist(5.0, 1_000_000, 1), 1)
    assert abs(fit.gamma - 5.0) <= 0.05
    assert fit.std_err < 0.02
    gamma, se = fit
    assert (gamma, se) == (fit.gamma, fit.std_err)


@pytest.mark.parametrize("gamma", [2.2, 3.0])
def test_zeta_samples_other_exponents(gamma):
    fit = estimate_tail_exponent(zeta_hist(gamma, 200_000, 2), 1)
    assert abs(fit.gamma - gamma) <= 4 * fit.std_err
    assert fit.power_law_accepted


def test_geometric_tail_rejected():
    x = np.random.default_rng(3).geometric(0.2, size=200_000)
    fit = estimate_tail_exponent(np.bincount(x), 1)
    assert not fit.power_law_accepted
    assert fit.lr_statistic < 0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 50))
def test_scale_invariance(c):
    h = zeta_hist(3.0, 20_000, 4)
    a = estimate_tail_exponent(h, 2)
    b = estimate_tail_exponent(h * c, 2)
    assert a.gamma == b.gamma


def test_insufficient_tail():
    h = np.zeros(20, dtype=int)
    h[1] = 50
    h[5] = 10
    with pytest.raises(InsufficientTail):
        estimate_tail_exponent(h, 3)
    with pytest.raises(InsufficientTail):
        select_kmin(h, 3)


def test_select_kmin_finds_power_law_region():
    # flat body below 10, exact zeta tail from 10 on
    gen = np.random.default_rng(6)
    body = gen.integers(1, 10, size=50_000)
    tail = stats.zipf.rvs(3.0, size=2_000_000, random_state=gen)
    tail = tail[tail >= 10]
    h = np.bincount(np.concatenate([body, tail]))
    k = select_kmin(h, 1)
    assert 8 <= k <= 14
    fit = estimate_tail_exponent(h, 1, auto_kmin=True)
    assert fit.k_min == k
    assert abs(fit.gamma - 3.0) <= 0.1


def test_as_probabilities():
    p, r = as_probabilities(np.array([1, 3]))
    assert list(p) == [0.25, 0.75] and r == 0
    p, r = as_probabilities(np.array([0.25, 0.5]))
    assert r == pytest.approx(0.25)
    with pytest.raises(ValueError):
        as_probabilities(np.array([1, -1]))


def test_distances():
    assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0
    assert tv_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert kolmogorov_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)


def test_self_comparison():
    _, _, dist = solved("ba-del", 3)
    report = compare(dist, dist.pmf(5000), 5000)
    assert report.tv_distance == pytest.approx(0.0, abs=1e-15)
    assert report.kolmogorov_distance == pytest.approx(0.0, abs=1e-15)


def test_report_invariants():
    _, _, dist = solved("ba-del", 3)
    h = np.random.default_rng(7).multinomial(50_000, dist.pmf(3000) / dist.pmf(3000).sum())
    report = compare(dist, h, 200)
    assert 0 <= report.tv_distance <= 1
    assert 0 <= report.kolmogorov_distance <= 1
    assert report.kolmogorov_distance <= 2 * report.tv_distance + 1e-12
    assert len(report.per_k) == 201
    assert json.loads(json.dumps(report.to_dict()))["K"] == 200


def test_example2_classification_agreement():
    params, law, dist = solved("group-del", 3)
    p = dist.pmf(400)
    h = np.random.default_rng(8).multinomial(200_000, p / p.sum())
    report = compare(dist, h, 400)
    assert report.classification == "not_scale_free"
    assert report.classification_agreement


def test_example1_classification_agreement():
    _, _, dist = solved("ba-del", 3)
    p = dist.pmf(20_000)
    h = np.random.default_rng(9).multinomial(2_000_000, p / p.sum())
    report = compare(dist, h, 1000, k_min=30)
    assert report.tail_fit.power_law_accepted
    assert report.classification_agreement


def test_loglog_curvature():
    coef, se = loglog_curvature(zeta_hist(3.0, 1_000_000, 10), 1)
    assert abs(coef) < 3 * se + 0.02
    x = np.random.default_rng(11).poisson(20, size=200_000)
    coef, se = loglog_curvature(np.bincount(x), 5)
    assert coef < 0


def test_trend_test():
    gen = np.random.default_rng(12)
    dec = np.column_stack([0.1 + gen.normal(0, 0.01, 20), 0.05 + gen.normal(0, 0.01, 20)])
    ok, pv = trend_test(dec)
    assert ok and len(pv) == 1
    inc = dec[:, ::-1]
    ok, _ = trend_test(inc)
    assert not ok
    flat = np.column_stack([0.1 + gen.normal(0, 0.01, 20), 0.1 + gen.normal(0, 0.01, 20)])
    assert trend_test(flat, alpha=0.001)[0]


def test_manifest():
    man = RunManifest("solve", {"a": 1}, 3, "0.1.0", "philox4x64-10", ["out.csv"])
    man.finish()
    data = json.loads(man.to_json())
    assert data["seed"] == 3 and data["finished"] is not None


def test_example1_simulation_exponent():
    # 16416 k^-5 is reached only for k in the thousands, where a T = 1e5
    # network has almost no nodes
    h = ex1_graph_run().pooled()
    fit = estimate_tail_exponent(h, 3)
    assert abs(fit.gamma - 5.0) <= 0.3
