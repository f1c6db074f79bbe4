"""Clifford circuits on stabilizer tableaux.

Two engines live here: a full Aaronson-Gottesman tableau with phases
(probabilities, reduced purities of single circuits) and a phase-free
batched engine that evolves many random circuits at once to estimate the
circuit-averaged noiseless XEB at large n.

For a stabilizer state every nonzero output probability equals 2^-k, where
k is the GF(2) rank of the X part of the stabilizer generators, so the ideal
XEB of one circuit is D sum p^2 - 1 = 2^(n-k) - 1 and needs no phases.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import rng
from .circuits import CLIFFORD_P, Circuit, CircuitSpec, cycle_pairs, validate


class NonCliffordError(ValueError):
    pass


# ---------------------------------------------------------------- GF(2) rank

def gf2_rank(mat: np.ndarray) -> int:
    """Rank over GF(2) of a 0/1 matrix."""
    a = np.array(mat, dtype=bool)
    rank = 0
    rows, cols = a.shape
    for c in range(cols):
        piv = np.nonzero(a[rank:, c])[0]
        if piv.size == 0:
            continue
        p = rank + piv[0]
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
        hit = a[:, c].copy()
        hit[rank] = False
        a[hit] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


# ---------------------------------------------------------------- tableau

class Tableau:
    """Destabilizer rows 0..n-1, stabilizer rows n..2n-1, one scratch row."""

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n + 1, n), dtype=bool)
        self.z = np.zeros((2 * n + 1, n), dtype=bool)
        self.r = np.zeros(2 * n + 1, dtype=bool)
        idx = np.arange(n)
        self.x[idx, idx] = True
        self.z[idx + n, idx] = True

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n, t.x, t.z, t.r = self.n, self.x.copy(), self.z.copy(), self.r.copy()
        return t

    # Clifford generators -------------------------------------------------
    def h(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def s(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def cnot(self, a: int, b: int) -> None:
        xa, xb, za, zb = self.x[:, a], self.x[:, b], self.z[:, a], self.z[:, b]
        self.r ^= xa & zb & ~(xb ^ za)
        self.x[:, b] ^= xa
        self.z[:, a] ^= zb

    def cz(self, a: int, b: int) -> None:
        self.h(b)
        self.cnot(a, b)
        self.h(b)

    def swap(self, a: int, b: int) -> None:
        self.x[:, [a, b]] = self.x[:, [b, a]]
        self.z[:, [a, b]] = self.z[:, [b, a]]

    def z_pow(self, a: int, t: float) -> None:
        q = t * 2
        if abs(q - round(q)) > 1e-12:
            raise NonCliffordError(f"Z^{t} is not Clifford")
        for _ in range(int(round(q)) % 4):
            self.s(a)

    def sqrt_x(self, a: int) -> None:
        self.h(a)
        self.s(a)
        self.h(a)

    def zxz(self, a: int, p: float) -> None:
        self.z_pow(a, -p)
        self.sqrt_x(a)
        self.z_pow(a, p)

    def iswap(self, a: int, b: int) -> None:
        # iSWAP = SWAP . CZ . (S x S), applied right to left
        self.s(a)
        self.s(b)
        self.cz(a, b)
        self.swap(a, b)

    # rows ------------------------------------------------------------------
    def _rowsum(self, h: int, i: int) -> None:
        x1, z1, x2, z2 = self.x[i], self.z[i], self.x[h], self.z[h]
        x1i, z1i, x2i, z2i = (v.astype(np.int64) for v in (x1, z1, x2, z2))
        g = np.where(
            ~x1 & ~z1, 0,
            np.where(x1 & z1, z2i - x2i, np.where(x1, z2i * (2 * x2i - 1), x2i * (1 - 2 * z2i))),
        )
        tot = 2 * int(self.r[h]) + 2 * int(self.r[i]) + int(g.sum())
        self.r[h] = (tot % 4) == 2
        self.x[h] ^= x1
        self.z[h] ^= z1

    def measure(self, a: int, forced: Optional[int] = None, gen=None) -> tuple[int, bool]:
        """Z measurement of qubit a; returns (outcome, was_random)."""
        n = self.n
        hits = np.nonzero(self.x[n:2 * n, a])[0]
        if hits.size:
            p = n + int(hits[0])
            for i in range(2 * n):
                if i != p and self.x[i, a]:
                    self._rowsum(i, p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p].copy(), self.z[p].copy(), self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            if forced is None:
                forced = int(gen.integers(2)) if gen is not None else 0
            self.r[p] = bool(forced)
            return forced, True
        s = 2 * n
        self.x[s] = False
        self.z[s] = False
        self.r[s] = False
        for i in range(n):
            if self.x[i, a]:
                self._rowsum(s, i + n)
        return int(self.r[s]), False

    def stabilizers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.n
        return self.x[n:2 * n], self.z[n:2 * n], self.r[n:2 * n]

    def check_symplectic(self) -> bool:
        """Destabilizer/stabilizer pairs anticommute, all else commutes."""
        m = 2 * self.n
        x = self.x[:m].astype(np.int64)
        z = self.z[:m].astype(np.int64)
        form = (x @ z.T + z @ x.T) % 2
        want = np.zeros((m, m), dtype=np.int64)
        idx = np.arange(self.n)
        want[idx, idx + self.n] = 1
        want[idx + self.n, idx] = 1
        return bool(np.array_equal(form, want))


def clifford_run(circuit: Circuit, check: bool = False) -> Tableau:
    """Run a circuit of restricted zxz gates and iSWAPs on |0...0>."""
    tab = Tableau(circuit.n)
    for g in circuit.gates:
        if g.kind == "zxz":
            p = float(g.params["p"])
            if not any(abs(p - c) < 1e-12 for c in CLIFFORD_P + (1.0,)):
                raise NonCliffordError(f"zxz(p={p}) at cycle {g.cycle} is not in the Clifford set")
            tab.zxz(g.qubits[0], p)
        elif g.kind == "iswap":
            tab.iswap(*g.qubits)
        elif g.kind == "iswap_omitted":
            pass
        else:
            raise NonCliffordError(f"gate kind {g.kind!r} at cycle {g.cycle} is not supported")
        if check and not tab.check_symplectic():
            raise AssertionError(f"symplectic form broken after {g}")
    return tab


def amplitude_squared(tab: Tableau, bitstring: int) -> float:
    """|<z|psi>|^2 for an integer bitstring (qubit 0 is the most significant bit)."""
    t = tab.copy()
    n = t.n
    prob = 1.0
    for q in range(n):
        bit = (bitstring >> (n - 1 - q)) & 1
        out, rand = t.measure(q, forced=bit)
        if rand:
            prob *= 0.5
        elif out != bit:
            return 0.0
    return prob


def x_rank(tab: Tableau) -> int:
    return gf2_rank(tab.stabilizers()[0])


def reduced_purity(tab: Tableau, left_qubits: Sequence[int]) -> float:
    """Tr rho_L^2 = 2^-S with S = rank(stabilizers restricted to L) - |L|."""
    left = sorted(set(int(q) for q in left_qubits))
    if any(q < 0 or q >= tab.n for q in left):
        raise ValueError("left_qubits out of range")
    if not left:
        return 1.0
    xs, zs, _ = tab.stabilizers()
    sub = np.hstack([xs[:, left], zs[:, left]])
    s = gf2_rank(sub) - len(left)
    return 2.0 ** (-s)


# ---------------------------------------------------------------- batched engine

def asymptotic_xeb(n: int) -> float:
    """C(n) = (1 - 2^-n) / (1 + 2^-n)."""
    t = 2.0 ** (-n)
    return (1 - t) / (1 + t)


def _batch_rank(cols: np.ndarray, n: int) -> np.ndarray:
    """GF(2) rank per circuit; cols[b, q] is a bitmask over the n generators."""
    a = cols.copy()
    B = a.shape[0]
    used = np.zeros(a.shape, dtype=bool)
    rank = np.zeros(B, dtype=np.int64)
    ar = np.arange(B)
    one = np.uint64(1)
    for j in range(n):
        bit = ((a >> np.uint64(j)) & one).astype(bool)
        cand = bit & ~used
        has = cand.any(axis=1)
        piv = np.argmax(cand, axis=1)
        prow = a[ar, piv]
        hit = bit & has[:, None]
        hit[ar, piv] = False
        a ^= np.where(hit, prow[:, None], np.uint64(0))
        used[ar[has], piv[has]] = True
        rank += has
    return rank


def _batch_1q(x, z, q, swap_mask):
    """zxz(p) symplectic action: swap(x, z) for p = +-1/2, x ^= z for p in {0, -1}."""
    xq, zq = x[:, q], z[:, q]
    nx = np.where(swap_mask, zq, xq ^ zq)
    nz = np.where(swap_mask, xq, zq)
    x[:, q], z[:, q] = nx, nz


def _batch_iswap(x, z, a, b):
    za = z[:, a] ^ x[:, a] ^ x[:, b]
    zb = z[:, b] ^ x[:, b] ^ x[:, a]
    xa = x[:, a].copy()
    x[:, a] = x[:, b]
    x[:, b] = xa
    z[:, a] = zb
    z[:, b] = za


def batch_xeb_trace(spec: CircuitSpec, d_max: int, batch: int, gen: np.random.Generator) -> np.ndarray:
    """Per-circuit ideal XEB 2^(n-k) - 1 for d = 0..d_max (final 1q layer included).

    Random Clifford zxz gates are drawn independently per circuit, qubit
    and cycle; the two-qubit layout is the one of ``spec``.  Returns an
    array (batch, d_max + 1).
    """
    n = spec.n
    if n > 64:
        raise OverflowError("batched engine packs generators in 64-bit words; n <= 64")
    full = dataclasses.replace(spec, depth_cycles=d_max, final_layer=False, gate_ensemble="clifford_zxz")
    validate(full)
    x = np.zeros((batch, n), dtype=np.uint64)
    z = np.tile((np.uint64(1) << np.arange(n, dtype=np.uint64))[None, :], (batch, 1))
    out = np.empty((batch, d_max + 1))
    for c in range(1, d_max + 2):
        # half the Clifford set (p = +-1/2) acts as swap(x, z)
        for q in range(n):
            _batch_1q(x, z, q, gen.random(batch) < 0.5)
        k = _batch_rank(x, n)
        out[:, c - 1] = np.exp2(n - k) - 1.0
        if c > d_max:
            break
        for a, b in cycle_pairs(full, c):
            _batch_iswap(x, z, a, b)
    return out


@dataclass
class DecayResult:
    n: int
    depths: np.ndarray
    xeb: np.ndarray
    stderr: np.ndarray
    samples: int
    floor: float
    c_n: float
    ln_lambda: float = float("nan")
    ln_lambda_err: float = float("nan")
    fit_depths: tuple = ()

    def excess(self) -> np.ndarray:
        return self.xeb - self.c_n


def fit_ln_lambda(depths, excess, floor: float, factor: float = 3.0) -> tuple[float, float, tuple]:
    """Unweighted least squares of ln(XEB - C) on d over points >= factor * floor."""
    depths = np.asarray(depths, dtype=float)
    excess = np.asarray(excess, dtype=float)
    keep = excess >= factor * floor
    if keep.sum() < 2:
        raise ValueError("fewer than two points above the resolution floor")
    d, y = depths[keep], np.log(excess[keep])
    A = np.vstack([d, np.ones_like(d)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    if d.size > 2:
        resid = y - A @ coef
        s2 = float(resid @ resid) / (d.size - 2)
        err = math.sqrt(s2 / float(((d - d.mean()) ** 2).sum()))
    else:
        err = float("nan")
    return float(coef[0]), err, tuple(int(v) for v in d)


def clifford_xeb_decay(
    spec: CircuitSpec,
    d_max: int,
    samples_M: int,
    seed: int = 0,
    chunk: int = 1 << 16,
    d_min_fit: int = 1,
) -> DecayResult:
    """Average noiseless Clifford XEB vs depth for one layout, and the ln(lambda) fit."""
    gen = rng.stream(seed, "clifford-decay", spec.n, spec.rows or 0, spec.cols or 0)
    acc = np.zeros(d_max + 1)
    acc2 = np.zeros(d_max + 1)
    done = 0
    while done < samples_M:
        b = min(chunk, samples_M - done)
        tr = batch_xeb_trace(spec, d_max, b, gen)
        acc += tr.sum(axis=0)
        acc2 += (tr**2).sum(axis=0)
        done += b
    mean = acc / done
    var = np.maximum(acc2 / done - mean**2, 0.0)
    res = DecayResult(
        n=spec.n,
        depths=np.arange(d_max + 1),
        xeb=mean,
        stderr=np.sqrt(var / done),
        samples=done,
        floor=1.0 / math.sqrt(done),
        c_n=asymptotic_xeb(spec.n),
    )
    sel = res.depths >= d_min_fit
    try:
        res.ln_lambda, res.ln_lambda_err, res.fit_depths = fit_ln_lambda(
            res.depths[sel], res.excess()[sel], res.floor
        )
    except ValueError:
        pass
    return res


def pooled_ln_lambda(results: Sequence[DecayResult], factor: float = 3.0) -> tuple[float, float]:
    """Common slope over several n with a free intercept per n."""
    rows, ys = [], []
    k = len(results)
    for i, r in enumerate(results):
        ex = r.excess()
        for d, e in zip(r.depths, ex):
            if d >= 1 and e >= factor * r.floor:
                row = np.zeros(k + 1)
                row[0] = d
                row[1 + i] = 1.0
                rows.append(row)
                ys.append(math.log(e))
    if len(rows) < k + 2:
        raise ValueError("not enough points above the floor")
    A, y = np.array(rows), np.array(ys)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(1, len(y) - A.shape[1])
    cov = np.linalg.inv(A.T @ A) * float(resid @ resid) / dof
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def write_decay_csv(path, results: Sequence[DecayResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "d", "xeb", "stderr", "floor"])
        for r in results:
            for d, x, s in zip(r.depths, r.xeb, r.stderr):
                w.writerow([r.n, int(d), repr(float(x)), repr(float(s)), repr(r.floor)])
