import math

import numpy as np
import pytest

from phaselab import analytics as an


def test_weak_link_examples():
    assert an.weak_link_xeb(1.0, 6, 1) == pytest.approx(1.5)
    assert an.weak_link_xeb(1.0, 6, 200) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        an.weak_link_xeb(0.0, 6, 1)


def test_weak_link_critical_ratio_is_constant():
    T = 6
    F = (1 / 16) ** (1 / T)
    m = np.arange(1, 8)
    fid = F ** (m * T)
    corr = an.weak_link_xeb(F, T, m) - fid
    assert np.allclose(corr / fid, 2.0)


def test_weak_link_strong_noise_ratio_grows():
    F = (1 / 100) ** (1 / 6)
    m = np.arange(1, 10)
    r = an.weak_link_xeb(F, 6, m) / F ** (6 * m)
    # F^(-T/2) / 4 = 2.5 per period
    assert np.allclose(r, 1 + 2 * 2.5**m)


def test_split_model_examples():
    assert an.weak_link_split_xeb(1.0, 1.0, 6, 0) == pytest.approx(3.0)
    d = np.array([12, 24, 36])
    assert np.allclose(an.weak_link_split_xeb(1.0, 1e-12, 6, d), 0.25 ** (d / 6), rtol=1e-9)
    # equal halves: F_L = F_R = g is weak_link_xeb with per-layer fidelity g^2
    g, T = 0.98, 6
    m = np.arange(1, 5)
    assert np.allclose(an.weak_link_split_xeb(g, g, T, m * T), an.weak_link_xeb(g**2, T, m))


def test_xeb_1d_noiseless_anticoncentration_form():
    n, d = 30.0, np.arange(1, 12)
    assert np.allclose(an.xeb_1d(n, d, 0.0) + 1, 2 * np.exp(n * 2.0**-d))


def test_xeb_1d_against_direct_cosh_form():
    n, d, eps = 20, 7.0, 0.01
    delta = math.sqrt(eps**2 * d**2 / 4 + 2.0 ** (-2 * d))
    direct = 2 * math.exp(-eps * n * d / 2) * (
        math.cosh(n * delta) + 2.0**-d / delta * math.sinh(n * delta)
    ) - 1
    assert an.xeb_1d(n, d, eps) == pytest.approx(direct, rel=1e-12)


def test_xeb_1d_is_finite_for_large_systems():
    v = an.log_xeb1_1d(1e6, 40.0, 1e-4)
    assert np.isfinite(v)


def test_weak_noise_branch_is_fidelity():
    n, alpha, f = 2**10, 4.0, 0.1
    d = alpha * math.log2(n)
    assert an.xeb_1d(n, d, f / n) == pytest.approx(math.exp(-f * d), rel=0.05)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("f", [0.0, 0.05, 0.2])
def test_low_alpha_branch_continuity(alpha, f):
    n = 2**10
    assert an.xeb_1d_low_alpha(n, alpha, f) == pytest.approx(an.xeb_1d_scaling(n, alpha, f), rel=0.05)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("f", [0.5, 1.0, 2.0])
def test_high_alpha_branch_continuity(alpha, f):
    n = 2**10
    assert an.xeb_1d_high_alpha(n, alpha, f) == pytest.approx(an.xeb_1d_scaling(n, alpha, f), rel=0.05)


def test_log_high_alpha_terms_match_branch():
    n, alpha, f = 2**10, 2.0, 1.0
    fid, corr = an.log_high_alpha_terms(math.log(n), alpha, f)
    assert math.exp(fid) + math.exp(corr) == pytest.approx(an.xeb_1d_high_alpha(n, alpha, f))


def test_critical_line_examples():
    assert an.critical_line(2.0) == pytest.approx(math.log(2) / 2)
    assert an.critical_line(2.0, dimension=2) == pytest.approx(math.log(2))
    assert an.critical_line(2.0, dimension=2, boundary="regular") == pytest.approx(math.log(2) / 2)
    assert an.critical_line(1e12) == pytest.approx(math.log(2))
    assert an.critical_line(math.inf) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        an.critical_line(1.0)


def test_xeb_2d_examples():
    n, d = 64.0, np.arange(1, 8)
    assert np.allclose(an.xeb_2d(n, d, 0.0) + 1, 2 * np.exp(n * 4.0**-d))
    # weak noise: fidelity term
    n, alpha, f = 4**8, 4.0, 0.2
    d = alpha * math.log(n, 4)
    assert an.xeb_2d(n, d, f / n) == pytest.approx(math.exp(-f * d), rel=0.05)
    # strong noise: n^(1 - alpha)
    n, alpha, f = 4**8, 2.0, 3.0
    d = alpha * math.log(n, 4)
    assert an.xeb_2d(n, d, f / n) == pytest.approx(n ** (1 - alpha), rel=0.05)


def test_boundary_factor_multiplies_xeb_plus_one():
    n, d, eps = 100, 6.0, 0.001
    base = an.log_xeb1_2d(n, d, eps)
    reg = an.log_xeb1_2d(n, d, eps, boundary="regular", c_r=2.0)
    assert reg - base == pytest.approx(2.0 * 10 * math.exp(-eps * d) * 4.0 ** (-d * 3 / 4))
    with pytest.raises(ValueError):
        an.log_xeb1_2d(n, d, eps, boundary="hexagonal")


def test_phase_classification():
    label, sp = an.phase_classify(an.PhasePoint(n=16, d=2, epsilon=0.0))
    assert label == "pre_anticoncentration" and sp.alpha == pytest.approx(0.5)
    label, sp = an.phase_classify(an.PhasePoint(n=16, d=8, epsilon=1.0 / 16))
    assert label == "strong_noise" and sp.f == pytest.approx(1.0)
    label, _ = an.phase_classify(an.PhasePoint(n=16, d=8, epsilon=0.1 / 16))
    assert label == "weak_noise"


def test_hardware_scale_point_is_weak_noise():
    # 67 qubits, 32 cycles, about 0.3 errors per cycle on a lattice with a boundary
    label, sp = an.phase_classify(an.PhasePoint(n=67, d=32, epsilon=0.3 / 67, dimension=2, boundary="sycamore"))
    assert label == "weak_noise"
    assert sp.f == pytest.approx(0.3)


def test_point_validation():
    with pytest.raises(ValueError):
        an.PhasePoint(n=1, d=3, epsilon=0.0)
    with pytest.raises(ValueError):
        an.ScalingPoint(f=-1.0, alpha=1.0)


@pytest.mark.parametrize("eps", [0.0, 0.005, 0.01])
def test_transfer_matrix_tracks_popdyn_after_anticoncentration(eps):
    # compared on XEB + 1, the partition sum the transfer matrix computes
    from phaselab import popdyn
    from phaselab.circuits import CircuitSpec, NoiseModel

    for n in (12, 16, 18):
        d_max = int(3 * math.log2(n))
        tr = popdyn.evolve(CircuitSpec(n=n, depth_cycles=d_max), NoiseModel(epsilon=eps), d_max)
        for d in range(d_max + 1):
            if d / math.log2(n) >= 1.5:
                assert tr[d] + 1 == pytest.approx(an.xeb_1d(n, d, eps) + 1, rel=0.2)
