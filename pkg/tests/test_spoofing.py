import math

import numpy as np
import pytest

from phaselab import spoofing as sp
from phaselab.stabilizer import DecayResult


def test_order_statistic_examples():
    D = 2**20
    assert sp.order_statistic_mean(D, D / math.e) == pytest.approx(1.0)
    assert sp.order_statistic_mean(D, 10**3) == pytest.approx(math.log(D / 10**3))
    assert sp.order_statistic_mean(D, 10**3) == pytest.approx(6.949, rel=1e-3)
    assert sp.order_statistic_mean(D, D, method="exact") == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        sp.order_statistic_mean(D, 0)


@pytest.mark.parametrize("D, k", [(50, 1), (50, 7), (400, 30)])
def test_exact_order_statistic_matches_quadrature(D, k):
    assert sp.order_statistic_mean(D, k, method="exact") == pytest.approx(sp.top_k_mean_quad(D, k), rel=1e-8)


def test_exact_order_statistic_matches_monte_carlo():
    gen = np.random.default_rng(0)
    D, k, trials = 4096, 20, 400
    x = np.sort(gen.exponential(size=(trials, D)), axis=1)[:, -k:]
    mc = x.mean(axis=1) - 1
    assert abs(mc.mean() - sp.order_statistic_mean(D, k, method="exact")) < 4 * mc.std() / math.sqrt(trials)


def test_asymptotic_switch_is_within_one_percent_of_exact():
    for k in (100, 1000):
        exact = sp.order_statistic_mean(2**20, k, method="exact")
        assert sp.order_statistic_mean(2**20, k) == pytest.approx(exact, rel=0.01)


def test_kth_density_normalized():
    from scipy import integrate

    D, k = 200, 5
    val, _ = integrate.quad(lambda x: math.exp(float(sp.log_order_density(x, D, k))), 0, 50, points=[math.log(D / k)])
    assert val == pytest.approx(1.0, abs=1e-9)


def test_linear_bound_trivial_case():
    sc = sp.SpoofScenario(D_L=2.0**10, D_R=2.0**12, lambda_decay=1.0, d=0)
    b = sp.spoof_linear_bound(sc)
    assert b.value == pytest.approx(math.log(2**10) * math.log(2**12))


def test_hardware_like_bound_is_far_below_experiment():
    sc = sp.SpoofScenario.from_qubits(35, 35, k_L=1e3, k_R=1e3, lambda_decay=math.exp(-1.95), d=24)
    b = sp.spoof_linear_bound(sc, k=1e6)
    assert b.value < 1e-3
    assert b.value_opt < 1e-15


def test_linear_bound_checks_k():
    sc = sp.SpoofScenario(D_L=100, D_R=100, k_L=2, k_R=5)
    with pytest.raises(ValueError):
        sp.spoof_linear_bound(sc, k=11)


def test_optimal_split_matches_grid_search():
    D_L, D_R, k = 2.0**30, 2.0**30, 1e6
    kl, kr = sp.optimal_split(D_L, D_R, k)
    assert kl == pytest.approx(1e3) and kr == pytest.approx(1e3)
    grid = np.exp(np.linspace(0, math.log(k), 2001))
    vals = np.log(D_L / grid) * np.log(D_R / (k / grid))
    assert math.log(D_L / kl) * math.log(D_R / kr) >= vals.max() - 1e-9
    kl, kr = sp.optimal_split(2.0**30, 2.0**24, 1e6)
    assert kl * kr == pytest.approx(1e6)
    assert math.log(2**30 / kl) == pytest.approx(math.log(2**24 / kr))
    # too unbalanced to equalize: all of k goes to the larger side
    assert sp.optimal_split(2.0**40, 2.0**20, 1e4) == pytest.approx((1e4, 1.0))


def test_bounds_decrease_in_depth_and_k():
    vals = [sp.spoof_linear_bound(sp.SpoofScenario(1e6, 1e6, 10, 10, d=d)).value for d in range(10)]
    assert sp.is_monotone_decreasing(vals)
    vals = [sp.spoof_linear_bound(sp.SpoofScenario(1e6, 1e6, k, k, d=3)).value for k in (1, 10, 100, 1000)]
    assert sp.is_monotone_decreasing(vals)


def test_log_bound_examples():
    sc = sp.SpoofScenario(1e4, 1e4, N_superposition=1e300)
    assert sp.spoof_log_bound(sc) == pytest.approx(0.0, abs=1e-250)
    sc = sp.SpoofScenario(1e4, 1e4, lambda_decay=1.0)
    assert sp.spoof_log_bound(sc) == pytest.approx(math.log1p(sp.spoof_linear_bound(sc).prefactor))
    sc = sp.SpoofScenario(1e4, 1e4, N_superposition=1e8)
    first_order = sp.spoof_linear_bound(sc).prefactor / 1e8
    assert sp.spoof_log_bound(sc) == pytest.approx(first_order, rel=1e-5)


def test_cut_contribution():
    assert sp.cut_contribution(0, 9) == 1.0
    assert sp.cut_contribution(1, 2) == 1 / 16
    lam = math.exp(-1.95)
    for d in (4, 12, 24):
        # ln 4 < 1.95 < 2 ln 4: one cut gate per cycle is not subdominant, two are
        assert sp.cut_contribution(1, d) > lam**d
        for nu in (2, 3):
            assert sp.cut_contribution(nu, d) < lam**d


def test_fit_lambda_from_synthetic_table():
    d = np.arange(0, 10)
    ex = 2.0 * np.exp(-2.0 * d)
    s, _ = sp.fit_lambda_from_clifford((d[1:], ex[1:]), floor=1e-12)
    assert s == pytest.approx(-2.0, abs=1e-6)
    r = DecayResult(12, d, ex + 0.5, np.zeros(10), 10**9, 1e-6, 0.5)
    s, _ = sp.fit_lambda_from_clifford(r)
    assert s == pytest.approx(-2.0, abs=1e-6)
    sc = sp.with_lambda(sp.SpoofScenario(10, 10), s)
    assert sc.lambda_decay == pytest.approx(math.exp(-2.0), rel=1e-5)
    with pytest.raises(ValueError):
        sp.fit_lambda_from_clifford((d, ex))


def test_scenario_validation():
    with pytest.raises(ValueError):
        sp.SpoofScenario(10, 10, k_L=11)
    with pytest.raises(ValueError):
        sp.SpoofScenario(0.5, 10)
