"""Population dynamics: circuit-averaged two-replica evolution.

Averaging the two-copy operator rho (x) rho' over random single-qubit gates
leaves, on each qubit, a combination of a few invariant operators.  For Haar
single-qubit gates these are the identity (symbol 0) and the swap-like
invariant B (symbol 1), and the weights P({v_i}) evolve by a column
stochastic 4x4 matrix per two-qubit gate.  The discrete gate set
Z^p X^(1/2) Z^-p needs three symbols per qubit; those matrices are derived
numerically here by explicit averaging.

Weights are stored as float arrays of shape ``batch + (q,) * n`` so that a
whole noise grid evolves in one pass.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import circuits
from .circuits import CircuitSpec, NoiseModel

MAX_CONFIG_QUBITS = 26

OMEGA_ISWAP = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1 / 3, 2 / 9],
        [0.0, 1 / 3, 0.0, 2 / 9],
        [0.0, 2 / 3, 2 / 3, 5 / 9],
    ]
)
OMEGA_OMITTED = np.diag([1.0, 0.0, 0.0, 1 / 3])


@dataclass(frozen=True)
class TransferOp:
    """q^2 x q^2 matrix on (v_j, v_k), columns indexed by the old pair."""

    matrix: np.ndarray
    name: str = ""


ISWAP_OP = TransferOp(OMEGA_ISWAP, "iswap")
OMITTED_OP = TransferOp(OMEGA_OMITTED, "omitted")


# ----------------------------------------------------------------- engines

@dataclass(frozen=True)
class Engine:
    """Local symbol space: initial weights, XEB readout, idle map, gate maps."""

    q: int
    initial: np.ndarray
    readout: np.ndarray
    idle: Optional[np.ndarray]
    pair: np.ndarray
    omitted: Optional[np.ndarray]
    purity_left: np.ndarray
    purity_right: np.ndarray
    name: str


_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.diag([1.0, -1.0]).astype(complex),
]
_SWAP1 = np.eye(4)[[0, 2, 1, 3]].astype(complex)
_PI_MEAS = np.diag([1.0, 0.0, 0.0, 1.0]).astype(complex)


def _haar_twirl_super() -> np.ndarray:
    """Superoperator (row-major vec) of the Haar average on one qubit's two copies."""
    cols = []
    for k in range(16):
        x = np.zeros(16, dtype=complex)
        x[k] = 1
        xm = x.reshape(4, 4)
        tr, ts = np.trace(xm), np.trace(_SWAP1 @ xm)
        a, b = (2 * tr - ts) / 6, (2 * ts - tr) / 6
        cols.append((a * np.eye(4) + b * _SWAP1).reshape(-1))
    return np.array(cols).T


def _ensemble_twirl_super(gates: Sequence[np.ndarray]) -> np.ndarray:
    acc = np.zeros((16, 16), dtype=complex)
    for g in gates:
        gg = np.kron(g, g)
        acc += np.kron(gg, gg.conj())
    return acc / len(gates)


def _two_copy_pair_unitary(u: np.ndarray) -> np.ndarray:
    """u (x) u on factor order (q1c1, q1c2, q2c1, q2c2)."""
    w = np.kron(u, u).reshape((2,) * 8)  # out: q1c1 q2c1 q1c2 q2c2 | in: same
    perm = [0, 2, 1, 3]
    w = w.transpose(perm + [4 + p for p in perm])
    return w.reshape(16, 16)


def _decompose(ops: Sequence[np.ndarray], target: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    basis = np.array([o.reshape(-1) for o in ops]).T
    coef, *_ = np.linalg.lstsq(basis, target.reshape(-1), rcond=None)
    resid = np.abs(basis @ coef - target.reshape(-1)).max()
    if resid > tol:
        raise ArithmeticError(f"symbol space not closed (residual {resid:.2e})")
    if np.abs(coef.imag).max() > tol:
        raise ArithmeticError("complex transfer coefficients")
    return coef.real


def _pair_matrix(local_ops, super1, u) -> np.ndarray:
    q = len(local_ops)
    w = _two_copy_pair_unitary(u) if u is not None else np.eye(16)
    sup2 = np.kron(super1, super1)  # acts on vec of (4x4)(x)(4x4) arranged per qubit
    mat = np.zeros((q * q, q * q))
    for a in range(q):
        for b in range(q):
            y = w @ np.kron(local_ops[a], local_ops[b]) @ w.conj().T
            # reorder Y (rows q1,q2 | cols q1,q2) into per-qubit (row,col) blocks
            y4 = y.reshape(4, 4, 4, 4).transpose(0, 2, 1, 3).reshape(-1)
            ty = (sup2 @ y4).reshape(4, 4, 4, 4).transpose(0, 2, 1, 3).reshape(16, 16)
            targets = [np.kron(local_ops[i], local_ops[j]) for i in range(q) for j in range(q)]
            mat[:, a * q + b] = _decompose(targets, ty)
    return mat


def derive_engine(ensemble: str, entangler: np.ndarray = circuits.ISWAP) -> Engine:
    """Build the symbol engine for a single-qubit ensemble by explicit averaging."""
    if ensemble == "haar_1q":
        b = (np.kron(_PAULI[1], _PAULI[1]) + np.kron(_PAULI[2], _PAULI[2]) + np.kron(_PAULI[3], _PAULI[3])) / 3
        ops = [np.eye(4, dtype=complex) / 2, b / 2]
        sup = _haar_twirl_super()
        name = "haar"
    elif ensemble in ("discrete_zxz", "clifford_zxz"):
        zz = np.kron(_PAULI[3], _PAULI[3])
        perp = (np.kron(_PAULI[1], _PAULI[1]) + np.kron(_PAULI[2], _PAULI[2])) / 2
        ops = [np.eye(4, dtype=complex) / 2, zz / 2, perp / 2]
        ps = circuits.DISCRETE_P if ensemble == "discrete_zxz" else circuits.CLIFFORD_P
        sup = _ensemble_twirl_super([circuits.zxz(p) for p in ps])
        name = ensemble
    else:
        raise ValueError(f"unknown ensemble {ensemble!r}")
    q = len(ops)
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    init = _decompose(ops, (sup @ np.kron(rho0, rho0).reshape(-1)).reshape(4, 4))
    idle = np.array([_decompose(ops, (sup @ o.reshape(-1)).reshape(4, 4)) for o in ops]).T
    pair = _pair_matrix(ops, sup, entangler)
    try:
        omitted = _pair_matrix_omitted(ops, sup, entangler)
    except ArithmeticError:
        omitted = None  # one-replica gate leaves the symbol space
    readout = np.array([2 * np.real(np.trace(_PI_MEAS @ o)) for o in ops])
    pl = np.array([np.real(np.trace(_SWAP1 @ o)) for o in ops])
    pr = np.array([np.real(np.trace(o)) for o in ops])
    if np.allclose(idle, np.eye(q)):
        idle = None
    return Engine(q, init, readout, idle, pair, omitted, pl, pr, name)


def _pair_matrix_omitted(local_ops, super1, u) -> np.ndarray:
    """Gate applied on the first replica only (the simulated circuit) and skipped on the second."""
    q = len(local_ops)
    w1 = _two_copy_pair_unitary_one(u)
    sup2 = np.kron(super1, super1)
    mat = np.zeros((q * q, q * q))
    targets = [np.kron(local_ops[i], local_ops[j]) for i in range(q) for j in range(q)]
    for a in range(q):
        for b in range(q):
            y = w1 @ np.kron(local_ops[a], local_ops[b]) @ w1.conj().T
            y4 = y.reshape(4, 4, 4, 4).transpose(0, 2, 1, 3).reshape(-1)
            ty = (sup2 @ y4).reshape(4, 4, 4, 4).transpose(0, 2, 1, 3).reshape(16, 16)
            mat[:, a * q + b] = _decompose(targets, ty)
    return mat


def _two_copy_pair_unitary_one(u: np.ndarray) -> np.ndarray:
    w = np.kron(u, np.eye(4)).reshape((2,) * 8)
    perm = [0, 2, 1, 3]
    w = w.transpose(perm + [4 + p for p in perm])
    return w.reshape(16, 16)


@functools.lru_cache(maxsize=None)
def engine_for(ensemble: str = "haar_1q") -> Engine:
    """Cached engine; the Haar/iSWAP case uses the closed-form matrices."""
    eng = derive_engine(ensemble)
    if ensemble == "haar_1q":
        eng = dataclasses.replace(eng, initial=np.array([0.5, 0.5]), readout=np.array([2.0, 2 / 3]),
                                  pair=OMEGA_ISWAP.copy(), omitted=OMEGA_OMITTED.copy())
    return eng


# ----------------------------------------------------------------- state

@dataclass
class PopState:
    n: int
    weights: np.ndarray  # shape batch + (q,)*n
    q: int = 2

    @property
    def batch_shape(self) -> tuple:
        return self.weights.shape[: self.weights.ndim - self.n]

    def flat(self) -> np.ndarray:
        """Weights indexed by configuration integer (qubit 0 most significant)."""
        return self.weights.reshape(self.batch_shape + (-1,))

    def copy(self) -> "PopState":
        return PopState(self.n, self.weights.copy(), self.q)

    @property
    def vacuum_weight(self):
        return self.weights[(Ellipsis,) + (0,) * self.n]


def init_popstate(n: int, engine: Engine | None = None, batch: tuple = ()) -> PopState:
    eng = engine or engine_for("haar_1q")
    if n > MAX_CONFIG_QUBITS:
        raise OverflowError(f"n={n} exceeds configuration-vector limit {MAX_CONFIG_QUBITS}")
    w = np.ones(())
    for _ in range(n):
        w = np.multiply.outer(w, eng.initial)
    w = np.broadcast_to(w, tuple(batch) + w.shape).copy()
    return PopState(n, w, eng.q)


def _split(state: PopState, j: int, k: int):
    """View of weights as (B, L, q, M, q, R) for j < k."""
    q, n = state.q, state.n
    b = int(np.prod(state.batch_shape, dtype=int))
    return state.weights.reshape(b, q**j, q, q ** (k - j - 1), q, q ** (n - k - 1))


def apply_gate(state: PopState, pair, op) -> PopState:
    """P <- Omega P on the pair (j, k); ``op`` is a TransferOp or matrix."""
    mat = op.matrix if isinstance(op, TransferOp) else np.asarray(op)
    j, k = pair
    if j == k:
        raise ValueError("pair needs two distinct qubits")
    q = state.q
    if j > k:
        j, k = k, j
        perm = [b * q + a for a in range(q) for b in range(q)]
        mat = mat[np.ix_(perm, perm)]
    v = _split(state, j, k)
    old = [v[:, :, c, :, d, :].copy() for c in range(q) for d in range(q)]
    for a in range(q):
        for b in range(q):
            row = mat[a * q + b]
            acc = np.zeros_like(old[0])
            for idx in np.flatnonzero(row):
                acc += row[idx] * old[idx]
            v[:, :, a, :, b, :] = acc
    return state


def apply_single(state: PopState, qubit: int, mat: np.ndarray) -> PopState:
    q, n = state.q, state.n
    b = int(np.prod(state.batch_shape, dtype=int))
    v = state.weights.reshape(b, q**qubit, q, q ** (n - qubit - 1))
    old = [v[:, :, c, :].copy() for c in range(q)]
    for a in range(q):
        v[:, :, a, :] = sum(mat[a, c] * old[c] for c in range(q) if mat[a, c] != 0)
    return state


def noise_factor(p, k: int, decay: str = "exp"):
    """Per-gate decay of non-vacuum pair configurations, k = 1 or 2 qubits.

    ``exp`` is exp(-4^k p / (4^k - 1)); ``linear`` is the exact factor
    1 - 4^k p / (4^k - 1) of a Pauli depolarizing channel with error p.
    """
    rate = np.asarray(p, dtype=float) * 4**k / (4**k - 1)
    if decay == "exp":
        return np.exp(-rate)
    if decay == "linear":
        return 1.0 - rate
    raise ValueError(f"unknown decay rule {decay!r}")


def apply_noise(state: PopState, pair, p2, decay: str = "exp") -> PopState:
    """Scale configurations with a non-identity symbol on the pair."""
    return apply_noise_factor(state, pair, noise_factor(p2, 2, decay))


def apply_noise_factor(state: PopState, pair, g) -> PopState:
    j, k = sorted(pair)
    v = _split(state, j, k)
    gb = np.asarray(g, dtype=float)
    gb = gb if gb.ndim == 0 else gb.reshape(-1, 1, 1, 1, 1, 1)
    vac = v[:, :, 0, :, 0, :].copy()
    v *= gb
    v[:, :, 0, :, 0, :] = vac
    return state


def apply_qubit_decay(state: PopState, qubit: int, factor) -> PopState:
    """Multiply configurations with a non-identity symbol on ``qubit`` by ``factor``."""
    q, n = state.q, state.n
    b = int(np.prod(state.batch_shape, dtype=int))
    v = state.weights.reshape(b, q**qubit, q, q ** (n - qubit - 1))
    f = np.asarray(factor, dtype=float)
    v[:, :, 1:, :] *= f if f.ndim == 0 else f.reshape(-1, 1, 1, 1)
    return state


def _contract(state: PopState, vectors) -> np.ndarray:
    w = state.weights
    nb = len(state.batch_shape)
    for i in range(state.n - 1, -1, -1):
        w = np.tensordot(w, vectors[i], axes=([nb + i], [0]))
    return w


def xeb_readout(state: PopState, engine: Engine | None = None) -> np.ndarray:
    """XEB = 2^n sum 3^(-|v|) P - 1 (Haar); general engines use their readout vector."""
    eng = engine or engine_for("haar_1q")
    return _contract(state, [eng.readout] * state.n) - 1.0


def purity_readout(state: PopState, left, engine: Engine | None = None) -> np.ndarray:
    """Average reduced purity Tr rho_L^2 of noise-free evolution."""
    eng = engine or engine_for("haar_1q")
    left = set(left)
    vecs = [eng.purity_left if i in left else eng.purity_right for i in range(state.n)]
    return _contract(state, vecs)


# ----------------------------------------------------------------- evolve

def _noise_arrays(noise):
    if isinstance(noise, NoiseModel) or noise is None:
        noise = [noise or NoiseModel()]
    p2 = np.array([m.p2 for m in noise])
    p1 = np.array([m.p1 for m in noise])
    eps = np.array([m.epsilon for m in noise])
    return p2, p1, eps


def evolve(
    spec: CircuitSpec,
    noise=None,
    d_max: Optional[int] = None,
    mode: str = "normal",
    decay: str = "exp",
    engine: Engine | None = None,
) -> np.ndarray:
    """Average XEB after d = 0..d_max cycles (circuits with a final 1q layer).

    ``noise`` is one NoiseModel or a sequence of them (evolved together; the
    result then has a leading axis over models).  Per model:
      p2 decays the pair after each two-qubit gate,
      p1 decays each qubit once per cycle (single-qubit depolarizing),
      epsilon decays each qubit once per cycle by exp(-4 epsilon / 3), so the
      thermal state loses fidelity exp(-epsilon n) per cycle.
    ``mode='spoof_omit_cut'`` replaces every gate crossing the cut by the
    omitted-gate map (the sampled circuit lacks those gates).
    """
    if mode not in ("normal", "spoof_omit_cut"):
        raise ValueError(f"unknown mode {mode!r}")
    single = isinstance(noise, NoiseModel) or noise is None
    p2, p1, eps = _noise_arrays(noise)
    eng = engine or engine_for(spec.gate_ensemble if spec.gate_ensemble != "clifford_zxz" else "clifford_zxz")
    if spec.entangler != "iswap" and engine is None:
        eng = derive_engine(spec.gate_ensemble, circuits.fsim(spec.fsim_theta, spec.fsim_phi))
    d_max = spec.depth_cycles if d_max is None else d_max
    full = dataclasses.replace(spec, depth_cycles=d_max)
    n = spec.n
    st = init_popstate(n, eng, batch=(p2.size,))
    g2 = noise_factor(p2, 2, decay)
    g1 = noise_factor(p1, 1, decay) * np.exp(-4.0 * eps / 3.0)
    trace = np.empty((p2.size, d_max + 1))
    trace[:, 0] = xeb_readout(st, eng)
    left = circuits.cut_sides(full)
    for c in range(1, d_max + 1):
        busy = set()
        for pr in circuits.cycle_pairs(full, c):
            cross = bool(left[pr[0]] != left[pr[1]])
            op = eng.omitted if (mode == "spoof_omit_cut" and cross) else eng.pair
            apply_gate(st, pr, op)
            if np.any(g2 != 1.0):
                apply_noise_factor(st, pr, g2)
            busy.update(pr)
        if eng.idle is not None:
            for qb in range(n):
                if qb not in busy:
                    apply_single(st, qb, eng.idle)
        if np.any(g1 != 1.0):
            for qb in range(n):
                apply_qubit_decay(st, qb, g1)
        trace[:, c] = xeb_readout(st, eng)
    return trace[0] if single else trace


def evolve_purity(spec: CircuitSpec, left, d_max: int, engine: Engine | None = None) -> np.ndarray:
    """Average reduced purity of the noise-free ensemble after each cycle."""
    eng = engine or engine_for(spec.gate_ensemble)
    full = dataclasses.replace(spec, depth_cycles=d_max)
    st = init_popstate(spec.n, eng, batch=(1,))
    out = [purity_readout(st, left, eng)[0]]
    for c in range(1, d_max + 1):
        busy = set()
        for pr in circuits.cycle_pairs(full, c):
            apply_gate(st, pr, eng.pair)
            busy.update(pr)
        if eng.idle is not None:
            for qb in range(spec.n):
                if qb not in busy:
                    apply_single(st, qb, eng.idle)
        out.append(purity_readout(st, left, eng)[0])
    return np.array(out)


# ----------------------------------------------------------------- sectors

def weak_link_sectors(F: float, T: int, m_max: int, mode: str = "normal") -> np.ndarray:
    """XEB(mT), m = 0..m_max, from the coarse-grained weak-link sector model.

    Each half is either vacuum or thermalized between link applications.  The
    sector contributions g00, g01, g10, g11 start at 1; one period multiplies
    the single-sided sectors by F^(T/2)/4 and the two-sided sector by F^T
    (normal) or by F^T/4 (the link gate omitted from the sampled circuit).
    """
    g = np.ones(4)
    one_side = F ** (T / 2) / 4
    both = F**T if mode == "normal" else F**T / 4
    out = [g.sum() - 1]
    for _ in range(m_max):
        g = g * np.array([1.0, one_side, one_side, both])
        out.append(g.sum() - 1)
    return np.array(out)


# ----------------------------------------------------------------- order parameter

@dataclass
class ScanResult:
    eps_n: np.ndarray
    depths: np.ndarray
    xeb: np.ndarray   # (len(eps_n), len(depths))
    theta: np.ndarray
    crossings: np.ndarray  # eps_n crossing per consecutive depth pair (nan if none)
    crossing: float
    spread: float

    def rows(self):
        for i, en in enumerate(self.eps_n):
            for j, d in enumerate(self.depths):
                yield en, int(d), self.xeb[i, j], self.theta[i, j]


def theta_table(spec: CircuitSpec, eps_n: Sequence[float], depths: Sequence[int], decay: str = "exp"):
    eps_n = np.asarray(eps_n, dtype=float)
    depths = np.asarray(depths, dtype=int)
    models = [NoiseModel(epsilon=float(e) / spec.n) for e in eps_n]
    trace = evolve(spec, models, d_max=int(depths.max()), decay=decay)
    xeb = trace[:, depths]
    theta = np.exp(-eps_n[:, None] * depths[None, :]) / xeb
    return eps_n, depths, xeb, theta


def curve_crossings(x: np.ndarray, y1: np.ndarray, y2: np.ndarray) -> list:
    """All x where the linear interpolants of y1 and y2 intersect."""
    diff = y1 - y2
    out = []
    for i in range(len(x) - 1):
        a, b = diff[i], diff[i + 1]
        if a == 0:
            out.append(float(x[i]))
        elif a * b < 0:
            out.append(float(x[i] + (x[i + 1] - x[i]) * a / (a - b)))
    if diff[-1] == 0:
        out.append(float(x[-1]))
    return out


def find_crossing(eps_n, theta, n_boot: int = 200, seed: int = 0):
    """Crossing per consecutive depth pair plus bootstrap spread over pairs.

    Where a pair crosses more than once, the crossing with the largest eps_n
    is taken (the curves coincide at eps_n = 0 when Theta saturates).
    """
    from . import rng

    cross = []
    for j in range(theta.shape[1] - 1):
        xs = [x for x in curve_crossings(eps_n, theta[:, j], theta[:, j + 1]) if x > eps_n[0]]
        cross.append(max(xs) if xs else np.nan)
    cross = np.array(cross)
    good = cross[np.isfinite(cross)]
    if good.size == 0:
        raise ValueError("no crossing in the scanned range")
    gen = rng.stream(seed, "crossing-bootstrap")
    boots = [np.mean(gen.choice(good, size=good.size)) for _ in range(n_boot)]
    return cross, float(np.mean(good)), float(np.std(boots))


def order_parameter_scan(spec: CircuitSpec, eps_n, depths, decay: str = "exp") -> ScanResult:
    """Theta = exp(-eps n d)/XEB over an eps*n grid and its crossing estimate."""
    depths = np.asarray(depths)
    if len(depths) < 2:
        raise ValueError("need at least two depths")
    eps_n, depths, xeb, theta = theta_table(spec, eps_n, depths, decay)
    cross, est, spread = find_crossing(eps_n, theta)
    return ScanResult(eps_n, depths, xeb, theta, cross, est, spread)


def weak_link_spec(n: int, T: int, depth: int, seed: int = 0) -> CircuitSpec:
    return CircuitSpec(n=n, depth_cycles=depth, weak_link=circuits.WeakLink(n // 2, T), seed=seed)


def fidelity_crossing(eps_n, xeb_col, d: int) -> float:
    """eps*n at which the fidelity term exp(-eps n d) equals the rest of the XEB.

    This is Theta = 1/2 at a single depth; the largest crossing is returned.
    """
    eps_n = np.asarray(eps_n, dtype=float)
    fid = np.exp(-eps_n * d)
    xs = curve_crossings(eps_n, fid, np.asarray(xeb_col, dtype=float) - fid)
    if not xs:
        raise ValueError(f"no Theta = 1/2 crossing at depth {d}")
    return max(xs)


def critical_line_scan(spec: CircuitSpec, alphas, eps_n, decay: str = "exp") -> np.ndarray:
    """Rows (alpha, d, f_c) with d = round(alpha log2 n) and f_c from fidelity_crossing."""
    depths = sorted({int(round(a * math.log2(spec.n))) for a in alphas})
    eps_n, depths_arr, xeb, _ = theta_table(spec, eps_n, depths, decay)
    rows = []
    for a in alphas:
        d = int(round(a * math.log2(spec.n)))
        j = int(np.nonzero(depths_arr == d)[0][0])
        rows.append((float(a), d, fidelity_crossing(eps_n, xeb[:, j], d)))
    return np.array(rows)
