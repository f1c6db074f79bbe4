import hashlib
import hmac
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaselab import entropy, xeb
from phaselab import extractor as ex
from phaselab.samples import SampleSet


def _bits(n, seed):
    return np.random.default_rng(seed).integers(0, 2, size=n).astype(np.uint8)


# ---------------------------------------------------------------- field arithmetic

def test_degree_eight_modulus_is_the_aes_polynomial():
    assert ex.irreducible_poly(8) == 0x11B


def test_irreducibility_against_bruteforce():
    def has_factor(f):
        deg = f.bit_length() - 1
        for g in range(2, 1 << (deg // 2 + 1)):
            if g.bit_length() - 1 >= 1 and ex._pmod(f, g) == 0 and g != f:
                return True
        return False

    for f in range(1 << 2, 1 << 9):
        assert ex.is_irreducible(f) == (not has_factor(f)), bin(f)


def test_field_inverse_exists():
    # a^(2^l - 1) = 1 for every nonzero a
    l = 10
    for a in (1, 2, 3, 517, 1023):
        acc, base, e = 1, a, 2**l - 1
        while e:
            if e & 1:
                acc = ex.gf_mul(acc, base, l)
            base = ex.gf_mul(base, base, l)
            e >>= 1
        assert acc == 1


def test_next_prime():
    assert [ex.next_prime(v) for v in (0, 2, 14, 173, 174)] == [2, 2, 17, 173, 179]


# ---------------------------------------------------------------- parameters and design

def test_parameters_for_reference_size():
    p = ex.trevisan_params(2**16, 4096, 1e-6)
    # m > q forces quadratic polynomials
    assert (p.l, p.q, p.c, p.d) == (84, 173, 2, 173**2)
    assert p.eps_bit * p.m == pytest.approx(1e-6)


def test_parameter_errors():
    with pytest.raises(ex.ExtractorError):
        ex.trevisan_params(100, 0, 1e-6)
    with pytest.raises(ex.ExtractorError):
        ex.trevisan_params(100, 10, 1.5)
    with pytest.raises(ex.ExtractorError, match="field"):
        ex.trevisan_params(2**60, 10, 1e-30)


@pytest.mark.parametrize("n_x, m", [(500, 30), (500, 2000), (5000, 300)])
def test_design_overlaps_and_r(n_x, m):
    p = ex.trevisan_params(n_x, m, 1e-3)
    pos = ex.design_positions(p)
    assert pos.shape == (m, p.t)
    assert pos.max() < p.d
    sets = [set(r.tolist()) for r in pos]
    assert all(len(s) == p.t for s in sets)
    rng = np.random.default_rng(0)
    for _ in range(300):
        i, j = rng.choice(m, size=2, replace=False)
        assert len(sets[i] & sets[j]) <= p.c - 1
    assert ex.design_r(pos) <= p.r


def test_max_output_bits_is_tight():
    n_x, k, eps, margin = 2**14, 5000.0, 1e-6, 64
    m = ex.max_output_bits(n_x, k, eps, margin)
    assert ex.trevisan_params(n_x, m, eps).k_required <= k - margin
    assert ex.trevisan_params(n_x, m + 1, eps).k_required > k - margin
    assert ex.max_output_bits(n_x, 10.0, eps) == 0


# ---------------------------------------------------------------- extraction

@pytest.mark.parametrize("n_x, m", [(300, 40), (1000, 25)])
def test_vectorized_matches_reference(n_x, m):
    p = ex.trevisan_params(n_x, m, 1e-3)
    x, seed = _bits(n_x, 1), _bits(p.d, 2)
    fast = ex.trevisan_extract(x, p, seed)
    pos = ex.design_positions(p)
    for i in range(m):
        y = seed[pos[i]]
        alpha = int("".join(map(str, y[: p.l])), 2)
        beta = int("".join(map(str, y[p.l:])), 2)
        assert fast[i] == ex.one_bit_extract(x, alpha, beta, p.l)


def test_wide_field_matches_reference():
    # l > 64 exercises the two-word path
    p = ex.trevisan_params(4096, 8, 1e-9)
    assert p.l > 64
    x, seed = _bits(4096, 3), _bits(p.d, 4)
    fast = ex.trevisan_extract(x, p, seed)
    pos = ex.design_positions(p)
    for i in range(8):
        y = seed[pos[i]]
        alpha = int("".join(map(str, y[: p.l])), 2)
        beta = int("".join(map(str, y[p.l:])), 2)
        assert fast[i] == ex.one_bit_extract(x, alpha, beta, p.l)


def test_extraction_is_deterministic():
    p = ex.trevisan_params(2000, 100, 1e-6)
    x, seed = _bits(2000, 5), _bits(p.d, 6)
    a = np.packbits(ex.trevisan_extract(x, p, seed)).tobytes()
    b = np.packbits(ex.trevisan_extract(x.copy(), p, seed.copy())).tobytes()
    assert a == b


def test_input_checks():
    p = ex.trevisan_params(100, 5, 1e-3)
    with pytest.raises(ex.ExtractorError, match="input"):
        ex.trevisan_extract(_bits(99, 0), p, _bits(p.d, 0))
    with pytest.raises(ex.ExtractorError, match="exactly"):
        ex.trevisan_extract(_bits(100, 0), p, _bits(p.d + 1, 0))
    with pytest.raises(ex.ExtractorError, match="only 0 and 1"):
        ex.trevisan_extract(np.full(100, 2), p, _bits(p.d, 0))


def test_one_bit_output_is_unbiased_over_seeds():
    l, trials = 16, 10_000
    x = _bits(200, 7)
    gen = np.random.default_rng(8)
    ones = sum(ex.one_bit_extract(x, int(gen.integers(1 << l)), int(gen.integers(1 << l)), l)
               for _ in range(trials))
    assert abs(ones - trials / 2) < 4 * math.sqrt(trials) / 2


def test_hmac_slot_equals_stdlib():
    x, seed = b"raw sample bytes", bytes(range(128))
    out = ex.hmac_extract(x, seed, 700)
    want = hmac.new(seed[:64], x, hashlib.sha512).digest() + hmac.new(seed[64:128], x, hashlib.sha512).digest()
    assert np.array_equal(out, np.unpackbits(np.frombuffer(want, dtype=np.uint8))[:700])
    with pytest.raises(ex.ExtractorError, match="seed"):
        ex.hmac_extract(x, seed[:64], 700)


# ---------------------------------------------------------------- composition

@pytest.mark.parametrize("schedule", [(), (1e-7,), (1e-7, 1e-8)])
def test_composition_matches_closed_form_exactly(schedule):
    plan = ex.CompositionPlan(k=1000.0, epsilon=1e-6, m=256, rounds=len(schedule), eps_schedule=schedule)
    comp = ex.compose_extractor(plan)
    k, eps, m = ex.composed_closed_form(1000.0, 1e-6, 256, schedule)
    assert comp.k == k and comp.epsilon == eps and comp.m == m
    assert comp.n_seeds == 2 ** len(schedule)


def test_composition_two_rounds_by_hand():
    k, eps, m = ex.composed_closed_form(100.0, 0.01, 10, (0.5, 0.25))
    assert k == 100 + 10 + 1 + 20 + 2
    assert eps == pytest.approx(4 * 0.01 + 2 * 0.5 + 0.25)
    assert m == 40


def test_composition_over_budget_raises():
    plan = ex.CompositionPlan(k=1000.0, epsilon=1e-6, m=256, rounds=2, eps_schedule=(1e-3, 1e-3))
    with pytest.raises(ex.ExtractorError, match="round 2"):
        ex.compose_extractor(plan, source_k=1500.0)
    with pytest.raises(ex.ExtractorError):
        ex.CompositionPlan(k=1.0, epsilon=0.1, m=1, rounds=1, eps_schedule=())


def test_composed_extractor_concatenates_base_outputs():
    p = ex.trevisan_params(500, 16, 1e-3)
    base = lambda x, s: ex.trevisan_extract(x, p, s)  # noqa: E731
    plan = ex.CompositionPlan(k=p.k_required, epsilon=1e-3, m=16, rounds=1, eps_schedule=(1e-3,), base=base)
    comp = ex.compose_extractor(plan)
    x = _bits(500, 0)
    seeds = [_bits(p.d, 1), _bits(p.d, 2)]
    out = comp(x, seeds)
    assert out.size == 32
    assert np.array_equal(out[:16], base(x, seeds[0]))
    with pytest.raises(ex.ExtractorError):
        comp(x, seeds[:1])


# ---------------------------------------------------------------- pipeline

def _pt_samples(n, k, F, seed):
    dist = xeb.porter_thomas_distribution(n, seed=seed)
    return xeb.mixture_sample(dist, F, k, seed=seed + 1)


def test_pipeline_refuses_without_entropy():
    s = _pt_samples(8, 200, 0.0, 0)
    rep = {"smooth_bits": 0.0}
    with pytest.raises(ex.ExtractorError, match="no extractable"):
        ex.pipeline(s, rep, ex.ExtractorParams(8 * 200, 1e9), _bits(10, 0))


def test_pipeline_full_fidelity_budget():
    n, k = 16, 100_000
    s = _pt_samples(n, k, 1.0, 3)
    rep = entropy.report(entropy.EntropyParams(F=1.0, k=k, D=2.0**n))
    params = ex.ExtractorParams(n * k, rep["smooth_bits"], output_len=4096)
    m_max = ex.max_output_bits(n * k, rep["smooth_bits"], params.epsilon_total, params.margin)
    tp = ex.trevisan_params(n * k, 4096, params.epsilon_total)
    out, audit = ex.pipeline(s, rep, params, _bits(tp.d, 9))
    assert audit["m_max"] == m_max and m_max > 4096
    assert out.size == 4096
    assert audit["output_sha256"] == hashlib.sha256(np.packbits(out).tobytes()).hexdigest()
    with pytest.raises(ex.ExtractorError, match="budget"):
        ex.pipeline(s, rep, ex.ExtractorParams(n * k, rep["smooth_bits"], output_len=m_max + 1), _bits(10, 0))


def test_tampered_probabilities_shrink_output():
    n, k = 10, 20_000
    s = _pt_samples(n, k, 0.5, 11)
    honest = entropy.report(entropy.params_from_samples(s))
    tampered = SampleSet(n, s.bitstrings, s.probs * 0.7)
    lowered = entropy.report(entropy.params_from_samples(tampered))
    assert lowered["smooth_bits"] < honest["smooth_bits"]
    m_h = ex.max_output_bits(n * k, honest["smooth_bits"], 1e-6, 64)
    m_t = ex.max_output_bits(n * k, lowered["smooth_bits"], 1e-6, 64)
    assert 0 < m_t < m_h


def test_claimed_entropy_caps_budget():
    n, k = 10, 20_000
    s = _pt_samples(n, k, 0.5, 11)
    rep = entropy.report(entropy.params_from_samples(s))
    tp = ex.trevisan_params(n * k, 8, 1e-6)
    _, audit = ex.pipeline(s, rep, ex.ExtractorParams(n * k, 1000.0, output_len=8), _bits(tp.d, 0))
    assert audit["entropy_bits"] == 1000.0


def test_seed_bits_from_bytes():
    assert ex.seed_bits_from_bytes(b"\x80\x01", 9).tolist() == [1, 0, 0, 0, 0, 0, 0, 0, 0]
    with pytest.raises(ex.ExtractorError):
        ex.seed_bits_from_bytes(b"\x00", 9)


# ---------------------------------------------------------------- battery

def test_battery_accepts_random_and_rejects_structure():
    good = ex.battery(_bits(100_000, 0))
    assert min(good.values()) > 0.01
    assert ex.monobit_test(np.ones(1000, dtype=np.uint8)) < 1e-6
    assert ex.runs_test(np.tile([0, 1], 5000)) < 1e-6
    assert ex.serial_test(np.tile([0, 0, 0, 1, 1, 1], 2000)) < 1e-6


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_battery_p_values_in_unit_interval(seed):
    for v in ex.battery(_bits(2000, seed)).values():
        assert 0.0 <= v <= 1.0
