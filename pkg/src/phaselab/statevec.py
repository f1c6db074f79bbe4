"""Dense state-vector and density-matrix simulation.

Amplitudes are indexed by the integer whose most significant bit is qubit 0.
A density matrix on n qubits is stored as a state on 2n qubits (row qubits
0..n-1, column qubits n..2n-1), so one gate kernel serves both.
"""

from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass

import numpy as np

from . import rng
from .circuits import Circuit, CircuitSpec, NoiseModel, build_circuit
from .samples import SampleSet

MAX_SV_QUBITS = 26
MAX_DM_QUBITS = 13
NORM_TOL = 1e-10


@dataclass
class StateVector:
    amplitudes: np.ndarray

    @property
    def n(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass
class DensityMatrix:
    rho: np.ndarray

    @property
    def n(self) -> int:
        return int(self.rho.shape[0]).bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diagonal(self.rho)), 0.0, None)


def apply_unitary(state: np.ndarray, nq: int, u: np.ndarray, targets) -> np.ndarray:
    """Apply a k-qubit matrix to ``targets`` of a flat 2**nq array (returns new array)."""
    k = len(targets)
    t = state.reshape((2,) * nq)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(targets)))
    return np.moveaxis(out, list(range(k)), list(targets)).reshape(-1)


def zero_state(n: int) -> np.ndarray:
    if n > MAX_SV_QUBITS:
        raise OverflowError(f"n={n} exceeds state-vector limit {MAX_SV_QUBITS}")
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    return psi


def run_ideal(circuit: Circuit, initial: np.ndarray | None = None) -> StateVector:
    n = circuit.n
    psi = zero_state(n) if initial is None else np.array(initial, dtype=complex)
    for g in circuit.gates:
        psi = apply_unitary(psi, n, g.matrix(), g.qubits)
    return StateVector(psi)


# ------------------------------------------------------------ density matrix

def _dm_unitary(vec: np.ndarray, n: int, u: np.ndarray, qubits) -> np.ndarray:
    vec = apply_unitary(vec, 2 * n, u, qubits)
    return apply_unitary(vec, 2 * n, u.conj(), [q + n for q in qubits])


def depolarize(vec: np.ndarray, n: int, qubits, p: float) -> np.ndarray:
    """Pauli depolarizing channel rho -> (1-p) rho + p/(4^k-1) sum_{P != I} P rho P.

    Summing the Kraus terms gives (1 - c) rho + c Tr_q(rho) (x) I/2^k with
    c = p 4^k / (4^k - 1); that closed form is what is applied.
    """
    if p == 0:
        return vec
    return _mix_with_identity(vec, vec.reshape((2,) * (2 * n)), list(qubits), _depol_c(p, len(qubits)))


def _mix_with_identity(vec, t, qubits, c):
    n2 = t.ndim
    n = n2 // 2
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for q in qubits:
        cols[q] = rows[q]
    spec_in = "".join(rows) + "".join(cols)
    keep = [q for q in range(n) if q not in qubits]
    spec_red = "".join(rows[q] for q in keep) + "".join(cols[q] for q in keep)
    red = np.einsum(f"{spec_in}->{spec_red}", t)
    # embed red (x) I / 2^k
    k = len(qubits)
    eye = np.eye(2**k).reshape((2,) * (2 * k)) / 2**k
    rows2 = list(letters[:n])
    cols2 = list(letters[n:2 * n])
    spec_eye = "".join(rows2[q] for q in qubits) + "".join(cols2[q] for q in qubits)
    spec_red2 = "".join(rows2[q] for q in keep) + "".join(cols2[q] for q in keep)
    full = np.einsum(f"{spec_eye},{spec_red2}->{''.join(rows2) + ''.join(cols2)}", eye, red)
    return (1 - c) * vec + c * full.reshape(-1)


def depolarize_kraus(vec: np.ndarray, n: int, qubits, p: float) -> np.ndarray:
    """Reference implementation via the explicit Pauli Kraus sum."""
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    k = len(qubits)
    out = (1 - p) * vec
    for idx in np.ndindex(*(4,) * k):
        if not any(idx):
            continue
        P = np.array([[1.0]])
        for i in idx:
            P = np.kron(P, paulis[i])
        out = out + p / (4**k - 1) * _dm_unitary(vec, n, P, qubits)
    return out


def _dm_gates(circuit: Circuit, noise: NoiseModel):
    """Yield ('u', gate) and ('noise', qubits, p) steps in circuit order."""
    for block in circuit.layers():
        for g in block:
            yield ("u", g)
            if len(g.qubits) == 2 and noise.p2 > 0:
                yield ("noise", g.qubits, noise.p2)
        if len(block[0].qubits) == 1 and block[0].kind != "inject" and noise.p1 > 0:
            for g in block:
                yield ("noise", g.qubits, noise.p1)


def run_depolarizing(circuit: Circuit, noise: NoiseModel, initial: DensityMatrix | None = None) -> DensityMatrix:
    """Kraus evolution: p2 after each two-qubit gate, p1 on every qubit after each 1q layer."""
    n = circuit.n
    if n > MAX_DM_QUBITS:
        raise OverflowError(f"n={n} exceeds density-matrix limit {MAX_DM_QUBITS}")
    if initial is None:
        vec = np.zeros(4**n, dtype=complex)
        vec[0] = 1.0
    else:
        vec = initial.rho.reshape(-1).astype(complex)
    for step in _dm_gates(circuit, noise):
        if step[0] == "u":
            vec = _dm_unitary(vec, n, step[1].matrix(), step[1].qubits)
        else:
            vec = depolarize(vec, n, step[1], step[2])
    return DensityMatrix(vec.reshape(2**n, 2**n))


def _depol_c(p: float, k: int) -> float:
    return p * 4**k / (4**k - 1)


def run_trajectory(circuit: Circuit, noise: NoiseModel, seed: int) -> StateVector:
    """One Pauli-insertion trajectory; averaging |psi><psi| reproduces run_depolarizing."""
    gen = rng.stream(seed, "trajectory")
    n = circuit.n
    psi = zero_state(n)
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    for step in _dm_gates(circuit, noise):
        if step[0] == "u":
            psi = apply_unitary(psi, n, step[1].matrix(), step[1].qubits)
            continue
        qubits, p = step[1], step[2]
        if gen.random() >= p:
            continue
        k = len(qubits)
        idx = int(gen.integers(1, 4**k))
        for pos, q in enumerate(qubits):
            which = (idx >> (2 * (k - 1 - pos))) & 3
            if which:
                psi = apply_unitary(psi, n, paulis[which], [q])
    return StateVector(psi)


# ---------------------------------------------------------------- readout

def xeb(ideal_probs: np.ndarray, device_probs: np.ndarray) -> float:
    """Ensemble-free linear XEB D sum_z p(z) q(z) - 1 of a distribution q."""
    return float(ideal_probs.size * np.dot(ideal_probs, device_probs) - 1.0)


def fidelity(psi: StateVector, rho: DensityMatrix) -> float:
    a = psi.amplitudes
    return float(np.real(np.vdot(a, rho.rho @ a)))


def xeb_depth_trace(spec: CircuitSpec, noise: NoiseModel, d_max: int) -> np.ndarray:
    """Per-circuit XEB of the depth-d circuit with final 1q layer, d = 0..d_max.

    The depth-d circuit with a final layer is the prefix of the depth d+1
    circuit ending with that circuit's (d+1)-th single-qubit layer, so one
    pass over a deeper circuit gives every depth.
    """
    full = build_circuit(dataclasses.replace(spec, depth_cycles=d_max, final_layer=True))
    n = spec.n
    psi = zero_state(n)
    vec = np.zeros(4**n, dtype=complex)
    vec[0] = 1.0
    out = np.empty(d_max + 1)
    dim = 2**n
    for block in full.layers():
        for g in block:
            u = g.matrix()
            psi = apply_unitary(psi, n, u, g.qubits)
            vec = _dm_unitary(vec, n, u, g.qubits)
            if len(g.qubits) == 2 and noise.p2 > 0:
                vec = depolarize(vec, n, g.qubits, noise.p2)
        if len(block[0].qubits) == 1 and block[0].kind != "inject":
            if noise.p1 > 0:
                for g in block:
                    vec = depolarize(vec, n, g.qubits, noise.p1)
            d = block[0].cycle - 1
            p = np.abs(psi) ** 2
            q = np.real(vec[:: dim + 1])
            out[d] = dim * np.dot(p, q) - 1.0
    return out


# ---------------------------------------------------------------- sampling

def sample_bitstrings(state, count: int, seed: int) -> SampleSet:
    probs = state.probabilities()
    probs = probs / probs.sum()
    gen = rng.stream(seed, "sample")
    idx = gen.choice(probs.size, size=count, p=probs)
    n = int(probs.size).bit_length() - 1
    return SampleSet(n, idx, probs[idx], {"sampler": type(state).__name__})


# ---------------------------------------------------------------- binary dump

MAGIC = b"PHSV"


def dump_state(path, state: StateVector) -> None:
    a = np.ascontiguousarray(state.amplitudes, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<I", state.n))
        fh.write(a.view("<f8").tobytes())


def load_state(path) -> StateVector:
    with open(path, "rb") as fh:
        head = fh.read(8)
        if head[:4] != MAGIC:
            raise ValueError(f"{path}: not a state dump")
        (n,) = struct.unpack("<I", head[4:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != 2 * 2**n:
        raise ValueError(f"{path}: truncated dump")
    return StateVector(data.view("<c16").astype(complex))
