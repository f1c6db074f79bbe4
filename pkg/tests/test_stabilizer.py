import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaselab import popdyn, schmidt, stabilizer
from phaselab import statevec as sv
from phaselab.circuits import Circuit, CircuitSpec, Gate, build_circuit


def _clifford_spec(n, d, seed, **kw):
    return CircuitSpec(n=n, depth_cycles=d, gate_ensemble="clifford_zxz", seed=seed, **kw)


def test_gf2_rank_matches_bruteforce():
    gen = np.random.default_rng(0)
    for _ in range(50):
        m = gen.integers(0, 2, size=(6, 5)).astype(bool)
        # rank = log2 of the size of the row space
        span = {0}
        for row in m:
            v = int("".join("1" if b else "0" for b in row), 2)
            span |= {s ^ v for s in span}
        assert stabilizer.gf2_rank(m) == int(math.log2(len(span)))


def test_fresh_tableau_is_symplectic_and_measures_zero():
    tab = stabilizer.Tableau(4)
    assert tab.check_symplectic()
    for q in range(4):
        out, rand = tab.measure(q)
        assert (out, rand) == (0, False)


def test_hadamard_gives_random_outcome():
    tab = stabilizer.Tableau(1)
    tab.h(0)
    out, rand = tab.measure(0, forced=1)
    assert rand and out == 1
    assert tab.measure(0) == (1, False)


def test_bell_pair_amplitudes_and_purity():
    tab = stabilizer.Tableau(2)
    tab.h(0)
    tab.cnot(0, 1)
    probs = [stabilizer.amplitude_squared(tab, z) for z in range(4)]
    assert probs == [0.5, 0.0, 0.0, 0.5]
    assert stabilizer.reduced_purity(tab, [0]) == 0.5
    assert stabilizer.reduced_purity(tab, []) == 1.0


def test_non_clifford_gates_rejected():
    circ = Circuit(1, (Gate(1, "zxz", (0,), {"p": 0.25}),))
    with pytest.raises(stabilizer.NonCliffordError, match="cycle 1"):
        stabilizer.clifford_run(circ)
    with pytest.raises(stabilizer.NonCliffordError):
        stabilizer.clifford_run(Circuit(2, (Gate(1, "fsim", (0, 1), {"theta": 0.3, "phi": 0.1}),)))
    with pytest.raises(stabilizer.NonCliffordError):
        stabilizer.Tableau(1).z_pow(0, 0.25)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 5), d=st.integers(0, 6), seed=st.integers(0, 10**6))
def test_tableau_probabilities_match_statevector(n, d, seed):
    circ = build_circuit(_clifford_spec(n, d, seed, final_layer=True))
    tab = stabilizer.clifford_run(circ, check=True)
    p = sv.run_ideal(circ).probabilities()
    q = np.array([stabilizer.amplitude_squared(tab, z) for z in range(2**n)])
    assert np.allclose(p, q, atol=1e-12)
    # output distribution is uniform on 2^(n - k) strings
    k = stabilizer.x_rank(tab)
    assert np.isclose(p.max(), 2.0 ** -k)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 8), d=st.integers(0, 8), seed=st.integers(0, 10**6), data=st.data())
def test_reduced_purity_matches_svd(n, d, seed, data):
    circ = build_circuit(_clifford_spec(n, d, seed, final_layer=True))
    tab = stabilizer.clifford_run(circ)
    left = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n - 1, unique=True))
    exact = schmidt.schmidt_decompose(sv.run_ideal(circ), left).purity
    assert stabilizer.reduced_purity(tab, left) == pytest.approx(exact, abs=1e-12)


def test_reduced_purity_range_check():
    with pytest.raises(ValueError):
        stabilizer.reduced_purity(stabilizer.Tableau(3), [5])


def test_batch_rank_matches_scalar_rank():
    gen = np.random.default_rng(4)
    n = 7
    cols = gen.integers(0, 2**n, size=(200, n), dtype=np.uint64)
    ranks = stabilizer._batch_rank(cols, n)
    for row, r in zip(cols, ranks):
        mat = np.array([[(int(v) >> j) & 1 for j in range(n)] for v in row], dtype=bool)
        assert stabilizer.gf2_rank(mat) == r


def test_batch_engine_matches_three_symbol_popdyn():
    spec = _clifford_spec(4, 6, 0)
    exact = popdyn.evolve(spec)
    tr = stabilizer.batch_xeb_trace(spec, 6, 200_000, np.random.default_rng(1))
    se = tr.std(axis=0) / math.sqrt(tr.shape[0])
    assert np.all(np.abs(tr.mean(axis=0) - exact) <= 4 * se + 1e-12)


def test_batch_engine_matches_tableau_statistics_on_grid():
    spec = _clifford_spec(4, 3, 0, topology="grid2d", rows=2, cols=2, pattern=tuple("ABCD"))
    tr = stabilizer.batch_xeb_trace(spec, 3, 40_000, np.random.default_rng(2))
    vals = []
    for s in range(1500):
        tab = stabilizer.clifford_run(build_circuit(_clifford_spec(
            4, 3, s, topology="grid2d", rows=2, cols=2, pattern=tuple("ABCD"), final_layer=True)))
        vals.append(2.0 ** (4 - stabilizer.x_rank(tab)) - 1)
    vals = np.array(vals)
    se = math.hypot(vals.std() / math.sqrt(vals.size), tr[:, 3].std() / math.sqrt(tr.shape[0]))
    assert abs(vals.mean() - tr[:, 3].mean()) < 4 * se


def test_asymptotic_xeb():
    assert stabilizer.asymptotic_xeb(2) == pytest.approx(0.6)


def test_fit_recovers_exact_exponential():
    d = np.arange(1, 10)
    ln_lam, err, used = stabilizer.fit_ln_lambda(d, 3.0 * np.exp(-2.0 * d), floor=1e-12)
    assert ln_lam == pytest.approx(-2.0, abs=1e-9)
    assert used == tuple(range(1, 10))


def test_fit_excludes_points_below_floor():
    d = np.arange(1, 10)
    ex = np.exp(-2.0 * d)
    ex[5:] = 1e-3  # plateau at the floor
    _, _, used = stabilizer.fit_ln_lambda(d, ex, floor=1e-3)
    assert max(used) <= 5
    with pytest.raises(ValueError):
        stabilizer.fit_ln_lambda(d, np.full(9, 1e-4), floor=1e-3)


def test_pooled_fit_shares_slope():
    res = []
    for n, amp in ((10, 1.0), (12, 5.0)):
        d = np.arange(0, 8)
        c = stabilizer.asymptotic_xeb(n)
        r = stabilizer.DecayResult(n, d, c + amp * np.exp(-1.9 * d), np.zeros(8), 10**12, 1e-9, c)
        res.append(r)
    s, _ = stabilizer.pooled_ln_lambda(res)
    assert s == pytest.approx(-1.9, abs=1e-9)


def test_decay_run_is_reproducible(tmp_path):
    spec = _clifford_spec(6, 0, 0)
    a = stabilizer.clifford_xeb_decay(spec, 6, 2000, seed=3, chunk=512)
    b = stabilizer.clifford_xeb_decay(spec, 6, 2000, seed=3, chunk=512)
    assert np.array_equal(a.xeb, b.xeb)
    assert a.floor == pytest.approx(1 / math.sqrt(2000))
    path = tmp_path / "decay.csv"
    stabilizer.write_decay_csv(path, [a])
    assert path.read_text().splitlines()[0] == "n,d,xeb,stderr,floor"
