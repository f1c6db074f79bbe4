"""Seeded randomness extractors.

Trevisan's construction: a one-bit extractor evaluated on seed slices picked
by a combinatorial design.  The one-bit extractor is the Reed-Solomon code
over GF(2^l) concatenated with the Hadamard code:

    C(x, (alpha, beta)) = < RS_x(alpha), beta >  (inner product mod 2)

where the input bits are cut into l-bit field elements c_0, c_1, ... and
RS_x(alpha) = c_0 alpha^(s-1) + ... + c_(s-1) (Horner order).  Seed slices
come from the polynomial design S_i = {(a, p_i(a)) : a < t} inside F_q x F_q,
p_i running over polynomials of degree < c.  Two sets meet in fewer than c
points, which makes it a weak design with r = 2^(c-1).

Bit conventions: bit arrays are uint8 0/1, the first bit of an l-bit chunk
is the most significant coefficient of the field element, bytes are
unpacked most significant bit first.

An HMAC-SHA512 extractor with the same call shape is provided as a fast
heuristic slot, plus the output-extension composition and its accounting.
"""

from __future__ import annotations

import hashlib
import hmac
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats

MAX_FIELD_BITS = 128
U64 = np.uint64


class ExtractorError(ValueError):
    pass


# ---------------------------------------------------------------- GF(2)[x] helpers

def _clmul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _pmod(a: int, f: int) -> int:
    df = f.bit_length() - 1
    while a and a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def _pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _pmod(a, b)
    return a


def _mulmod(a: int, b: int, f: int) -> int:
    return _pmod(_clmul(a, b), f)


def is_irreducible(f: int) -> bool:
    """Ben-Or test on a GF(2) polynomial encoded as an int (bit i = x^i)."""
    deg = f.bit_length() - 1
    if deg < 1:
        return False
    if deg == 1:
        return True
    xp = 2  # x
    for _ in range(deg // 2):
        xp = _mulmod(xp, xp, f)  # x^(2^i)
        if _pgcd(f, xp ^ 2) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def irreducible_poly(l: int) -> int:
    """Smallest irreducible polynomial of degree l (by integer value)."""
    if not 1 <= l <= MAX_FIELD_BITS:
        raise ExtractorError(f"field degree {l} outside 1..{MAX_FIELD_BITS}")
    base = 1 << l
    for low in range(1, base, 2):  # constant term must be 1
        if is_irreducible(base | low):
            return base | low
    raise AssertionError("no irreducible polynomial found")


def gf_mul(a: int, b: int, l: int) -> int:
    """Product in GF(2^l) with the module's fixed modulus (reference path)."""
    return _mulmod(a, b, irreducible_poly(l))


def next_prime(x: int) -> int:
    x = max(2, int(x))
    while True:
        if all(x % p for p in range(2, int(math.isqrt(x)) + 1)):
            return x
        x += 1


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class TrevisanParams:
    n_x: int
    m: int
    epsilon: float
    l: int
    t: int
    q: int
    c: int
    r: float
    d: int
    eps_bit: float
    k_one_bit: float
    k_required: float

    def to_dict(self) -> dict:
        return asdict(self)


def trevisan_params(n_x: int, m: int, epsilon: float) -> TrevisanParams:
    """Seed length and entropy requirement for m output bits at total error epsilon.

    Per output bit the error is eps_bit = epsilon / m.  The one-bit extractor
    with l = ceil(log2 n_x + 2 log2(2/delta)), delta = eps_bit / 2, is a
    (3 log2(1/delta), 2 delta) extractor; Trevisan's theorem then needs
    k >= k_one_bit + r m + log2(1/eps_bit) bits of min-entropy.
    """
    if n_x < 1 or m < 1:
        raise ExtractorError("input and output lengths must be positive")
    if not 0 < epsilon < 1:
        raise ExtractorError("epsilon must lie in (0, 1)")
    eps_bit = epsilon / m
    delta = eps_bit / 2.0
    l = math.ceil(math.log2(n_x) + 2.0 * math.log2(2.0 / delta))
    if l > MAX_FIELD_BITS:
        raise ExtractorError(f"field size 2^{l} exceeds the supported 2^{MAX_FIELD_BITS}")
    t = 2 * l
    # q >= sqrt(m) keeps the polynomials linear (c <= 2, r <= 2)
    q = next_prime(max(t, math.isqrt(m - 1) + 1 if m > 1 else 1))
    c = 1 if m <= q else 2
    r = float(2 ** (c - 1))
    k1 = 3.0 * math.log2(1.0 / delta)
    k_req = k1 + r * m + math.log2(1.0 / eps_bit)
    return TrevisanParams(n_x, m, epsilon, l, t, q, c, r, q * q, eps_bit, k1, k_req)


def max_output_bits(n_x: int, k_bits: float, epsilon: float, margin: int = 0) -> int:
    """Largest m with k_required(m) <= k_bits - margin (0 if none)."""
    lo, hi = 0, max(1, int(k_bits))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        try:
            ok = trevisan_params(n_x, mid, epsilon).k_required <= k_bits - margin
        except ExtractorError:
            ok = False
        if ok:
            lo = mid
        else:
            hi = mid - 1
    return lo


# ---------------------------------------------------------------- design

def design_positions(p: TrevisanParams) -> np.ndarray:
    """(m, t) seed positions; row i lists a * q + p_i(a) for a = 0..t-1."""
    a = np.arange(p.t, dtype=np.int64)
    idx = np.arange(p.m, dtype=np.int64)
    coeffs = np.stack([(idx // p.q**j) % p.q for j in range(p.c)], axis=1)  # (m, c)
    vals = np.zeros((p.m, p.t), dtype=np.int64)
    for j in range(p.c - 1, -1, -1):
        vals = (vals * a[None, :] + coeffs[:, j:j + 1]) % p.q
    return a[None, :] * p.q + vals


def design_r(positions: np.ndarray) -> float:
    """Smallest r with sum_{j<i} 2^|S_i & S_j| <= r (m - 1) for every i."""
    m = positions.shape[0]
    if m < 2:
        return 1.0
    sets = [set(row.tolist()) for row in positions]
    worst = 0.0
    for i in range(1, m):
        tot = sum(2 ** len(sets[i] & sets[j]) for j in range(i))
        worst = max(worst, tot / (m - 1))
    return worst


# ---------------------------------------------------------------- field arithmetic on words

def _bits_to_words(bits: np.ndarray, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows of l bits (MSB first) to (lo, hi) uint64 words."""
    rows = bits.shape[0]
    padded = np.zeros((rows, 128), dtype=np.uint8)
    padded[:, 128 - l:] = bits
    packed = np.packbits(padded, axis=1)
    w = packed.view(">u8").astype(U64)
    return w[:, 1].copy(), w[:, 0].copy()


def _mul_x(lo, hi, l: int, f_lo: np.uint64, f_hi: np.uint64):
    """Multiply by x modulo f (l-bit elements)."""
    if l <= 64:
        top = (lo >> U64(l - 1)) & U64(1)
        lo = (lo << U64(1)) & U64((1 << l) - 1 if l < 64 else (1 << 64) - 1)
        lo ^= np.where(top.astype(bool), f_lo, U64(0))
        return lo, hi
    top = (hi >> U64(l - 65)) & U64(1)
    hi = ((hi << U64(1)) | (lo >> U64(63))) & U64((1 << (l - 64)) - 1)
    lo = lo << U64(1)
    sel = top.astype(bool)
    lo ^= np.where(sel, f_lo, U64(0))
    hi ^= np.where(sel, f_hi, U64(0))
    return lo, hi


def _mul_tables(alpha_lo, alpha_hi, l: int):
    """Per-alpha 4-bit window tables: T[:, j, v] = alpha * v * x^(4j)."""
    f = irreducible_poly(l) ^ (1 << l)
    f_lo, f_hi = U64(f & ((1 << 64) - 1)), U64(f >> 64)
    m = alpha_lo.size
    nwin = (l + 3) // 4
    basis_lo = np.zeros((m, 4 * nwin), dtype=U64)
    basis_hi = np.zeros((m, 4 * nwin), dtype=U64)
    lo, hi = alpha_lo.copy(), alpha_hi.copy()
    for i in range(l):
        basis_lo[:, i], basis_hi[:, i] = lo, hi
        lo, hi = _mul_x(lo, hi, l, f_lo, f_hi)
    T_lo = np.zeros((m, nwin, 16), dtype=U64)
    T_hi = np.zeros((m, nwin, 16), dtype=U64)
    for v in range(1, 16):
        low = v & -v
        b = low.bit_length() - 1
        prev = v ^ low
        T_lo[:, :, v] = T_lo[:, :, prev] ^ basis_lo[:, b::4][:, :nwin]
        T_hi[:, :, v] = T_hi[:, :, prev] ^ basis_hi[:, b::4][:, :nwin]
    return T_lo, T_hi


def _horner(coef_lo, coef_hi, T_lo, T_hi, l: int):
    m, nwin, _ = T_lo.shape
    ar = np.arange(m)
    acc_lo = np.zeros(m, dtype=U64)
    acc_hi = np.zeros(m, dtype=U64)
    for cl, ch in zip(coef_lo, coef_hi):
        new_lo = np.zeros(m, dtype=U64)
        new_hi = np.zeros(m, dtype=U64)
        for j in range(nwin):
            sh = 4 * j
            if sh < 64:
                nib = (acc_lo >> U64(sh)) & U64(15)
                if sh > 60:
                    nib |= (acc_hi << U64(64 - sh)) & U64(15)
            else:
                nib = (acc_hi >> U64(sh - 64)) & U64(15)
            nib = nib.astype(np.intp)
            new_lo ^= T_lo[ar, j, nib]
            new_hi ^= T_hi[ar, j, nib]
        acc_lo = new_lo ^ cl
        acc_hi = new_hi ^ ch
    return acc_lo, acc_hi


def _parity(x: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(x) & 1).astype(np.uint8)


# ---------------------------------------------------------------- Trevisan

def one_bit_extract(x_bits: np.ndarray, alpha: int, beta: int, l: int) -> int:
    """Reference (pure-Python) RS-Hadamard bit for one seed."""
    x = np.asarray(x_bits, dtype=np.uint8)
    s = -(-x.size // l)
    padded = np.zeros(s * l, dtype=np.uint8)
    padded[: x.size] = x
    f = irreducible_poly(l)
    acc = 0
    for row in padded.reshape(s, l):
        cval = int("".join(map(str, row.tolist())), 2)
        acc = _mulmod(acc, alpha, f) ^ cval
    return bin(acc & beta).count("1") & 1


def trevisan_extract(x_bits: np.ndarray, params: TrevisanParams, seed_bits: np.ndarray) -> np.ndarray:
    """m output bits; deterministic in (input, seed)."""
    x = np.asarray(x_bits, dtype=np.uint8).ravel()
    seed = np.asarray(seed_bits, dtype=np.uint8).ravel()
    if x.size != params.n_x:
        raise ExtractorError(f"input has {x.size} bits, parameters expect {params.n_x}")
    if seed.size != params.d:
        raise ExtractorError(f"seed has {seed.size} bits, construction needs exactly {params.d}")
    if np.any(x > 1) or np.any(seed > 1):
        raise ExtractorError("bit arrays must contain only 0 and 1")
    l = params.l
    s = -(-x.size // l)
    padded = np.zeros(s * l, dtype=np.uint8)
    padded[: x.size] = x
    coef_lo, coef_hi = _bits_to_words(padded.reshape(s, l), l)
    pos = design_positions(params)
    ybits = seed[pos]  # (m, 2l)
    a_lo, a_hi = _bits_to_words(ybits[:, :l], l)
    b_lo, b_hi = _bits_to_words(ybits[:, l:], l)
    T_lo, T_hi = _mul_tables(a_lo, a_hi, l)
    v_lo, v_hi = _horner(coef_lo, coef_hi, T_lo, T_hi, l)
    return _parity(v_lo & b_lo) ^ _parity(v_hi & b_hi)


# ---------------------------------------------------------------- HMAC slot

HMAC_OUT_BITS = 512
HMAC_KEY_BYTES = 64


def hmac_extract(x: bytes, seed: bytes, m: int, digest: Callable = hashlib.sha512) -> np.ndarray:
    """Heuristic extractor: block i is HMAC(key = seed slice i, msg = x)."""
    out_bits = digest().digest_size * 8
    blocks = -(-m // out_bits)
    if len(seed) < blocks * HMAC_KEY_BYTES:
        raise ExtractorError(f"seed too short: need {blocks * HMAC_KEY_BYTES} bytes")
    parts = [
        hmac.new(seed[i * HMAC_KEY_BYTES:(i + 1) * HMAC_KEY_BYTES], x, digest).digest()
        for i in range(blocks)
    ]
    return np.unpackbits(np.frombuffer(b"".join(parts), dtype=np.uint8))[:m]


# ---------------------------------------------------------------- composition

@dataclass(frozen=True)
class CompositionPlan:
    k: float
    epsilon: float
    m: int
    rounds: int = 0
    eps_schedule: tuple = ()
    base: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.rounds < 0:
            raise ExtractorError("rounds must be >= 0")
        if len(self.eps_schedule) != self.rounds:
            raise ExtractorError("need one epsilon per round")
        if any(not 0 < e < 1 for e in self.eps_schedule):
            raise ExtractorError("round epsilons must lie in (0, 1)")


@dataclass
class ComposedExtractor:
    k: float
    epsilon: float
    m: int
    n_seeds: int
    levels: list
    base: Optional[Callable] = None

    def __call__(self, x, seeds: Sequence):
        if self.base is None:
            raise ExtractorError("no base extractor attached")
        if len(seeds) != self.n_seeds:
            raise ExtractorError(f"need {self.n_seeds} independent seeds, got {len(seeds)}")
        return np.concatenate([np.asarray(self.base(x, s), dtype=np.uint8) for s in seeds])


def compose_extractor(plan: CompositionPlan, source_k: Optional[float] = None) -> ComposedExtractor:
    """Output extension by concatenating 2^t copies of the base extractor.

    Each round turns a (k, eps) extractor with m outputs into a
    (k + m + log2(1/eps_i), 2 eps + eps_i) extractor with 2m outputs, so
    after t rounds the requirement is k + (2^t - 1) m + sum log2(1/eps_i)
    and the error 2^t eps + sum 2^(t-i) eps_i.
    """
    k, eps, m = float(plan.k), float(plan.epsilon), int(plan.m)
    levels = [(k, eps, m)]
    for e in plan.eps_schedule:
        k = k + m + math.log2(1.0 / e)
        eps = 2.0 * eps + e
        m = 2 * m
        levels.append((k, eps, m))
        if source_k is not None and k > source_k:
            raise ExtractorError(
                f"round {len(levels) - 1} needs {k:.1f} bits of min-entropy, source has {source_k:.1f}"
            )
    if source_k is not None and plan.k > source_k:
        raise ExtractorError(f"base extractor needs {plan.k:.1f} bits, source has {source_k:.1f}")
    return ComposedExtractor(k, eps, m, 2**plan.rounds, levels, plan.base)


def composed_closed_form(k, eps, m, eps_schedule) -> tuple[float, float, int]:
    t = len(eps_schedule)
    kk = k + (2**t - 1) * m + sum(math.log2(1.0 / e) for e in eps_schedule)
    ee = 2**t * eps + sum(2 ** (t - i) * e for i, e in enumerate(eps_schedule, start=1))
    return kk, ee, 2**t * m


# ---------------------------------------------------------------- pipeline

@dataclass(frozen=True)
class ExtractorParams:
    input_len_bits: int
    claimed_min_entropy: float
    output_len: Optional[int] = None
    epsilon_total: float = 1e-6
    margin: int = 64


def seed_bits_from_bytes(data: bytes, nbits: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bits.size < nbits:
        raise ExtractorError(f"seed source has {bits.size} bits, need {nbits}")
    return bits[:nbits]


def pipeline(samples, entropy_report: dict, params: ExtractorParams, seed_bits: np.ndarray,
             entropy_key: str = "smooth_bits"):
    """Raw sample bits -> Trevisan output; returns (bits, audit log)."""
    raw = samples.bits().astype(np.uint8).ravel()
    if raw.size != params.input_len_bits:
        raise ExtractorError(f"samples give {raw.size} bits, params say {params.input_len_bits}")
    k_bits = float(entropy_report.get(entropy_key, 0.0))
    k_bits = min(k_bits, float(params.claimed_min_entropy))
    m_max = max_output_bits(raw.size, k_bits, params.epsilon_total, params.margin)
    if m_max < 1:
        raise ExtractorError(f"entropy bound {k_bits:.1f} bits leaves no extractable output")
    m = m_max if params.output_len is None else int(params.output_len)
    if m > m_max:
        raise ExtractorError(f"requested m={m} exceeds the entropy budget (max {m_max})")
    tp = trevisan_params(raw.size, m, params.epsilon_total)
    out = trevisan_extract(raw, tp, seed_bits)
    audit = {
        "extractor": "trevisan-rs-hadamard",
        "input_bits": int(raw.size),
        "entropy_key": entropy_key,
        "entropy_bits": k_bits,
        "m_max": int(m_max),
        "margin": int(params.margin),
        "params": tp.to_dict(),
        "output_sha256": hashlib.sha256(np.packbits(out).tobytes()).hexdigest(),
    }
    return out, audit


# ---------------------------------------------------------------- statistical battery

def monobit_test(bits: np.ndarray) -> float:
    b = np.asarray(bits, dtype=np.int64)
    s = abs(int((2 * b - 1).sum()))
    return float(special.erfc(s / math.sqrt(2.0 * b.size)))


def runs_test(bits: np.ndarray) -> float:
    b = np.asarray(bits, dtype=np.int64)
    n = b.size
    pi = b.mean()
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    v = 1 + int((b[1:] != b[:-1]).sum())
    return float(special.erfc(abs(v - 2 * n * pi * (1 - pi)) / (2 * math.sqrt(2 * n) * pi * (1 - pi))))


def serial_test(bits: np.ndarray) -> float:
    """Chi-square test of overlapping 2-bit patterns (cyclic)."""
    b = np.asarray(bits, dtype=np.int64)
    pairs = 2 * b + np.roll(b, -1)
    counts = np.bincount(pairs, minlength=4)
    ones = np.bincount(b, minlength=2)
    n = b.size
    psi2 = 4.0 / n * float((counts**2).sum()) - n
    psi1 = 2.0 / n * float((ones**2).sum()) - n
    return float(stats.chi2.sf(psi2 - psi1, 2))


def battery(bits: np.ndarray) -> dict:
    return {"monobit": monobit_test(bits), "runs": runs_test(bits), "serial": serial_test(bits)}
