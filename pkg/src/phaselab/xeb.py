"""XEB estimators and statistical tests on sample sets."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import rng
from .samples import SampleSet

EULER_GAMMA = float(np.euler_gamma)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def __iter__(self):
        yield self.value
        yield self.stderr


def _dp(samples: SampleSet) -> np.ndarray:
    if samples.probs is None:
        raise ValueError("sample set carries no ideal probabilities")
    if len(samples) == 0:
        raise ValueError("empty sample set")
    return samples.dim * samples.probs


def linear_xeb(samples: SampleSet) -> Estimate:
    """Mean of D p - 1 with its standard error."""
    x = _dp(samples) - 1.0
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
    return Estimate(float(x.mean()), se)


def log_xeb(samples: SampleSet) -> Estimate:
    """<ln(D p)> + gamma.

    Under Porter-Thomas statistics uniform sampling gives <ln(D p)> = -gamma,
    so the estimate is 0, and an ideal sampler gives psi(2) + gamma = 1.
    """
    x = _dp(samples)
    if np.any(x <= 0):
        raise ValueError("zero ideal probability in sample; log XEB undefined")
    y = np.log(x) + EULER_GAMMA
    se = float(y.std(ddof=1) / math.sqrt(y.size)) if y.size > 1 else float("nan")
    return Estimate(float(y.mean()), se)


# ---------------------------------------------------------------- truncated XEB

@dataclass(frozen=True)
class TxebParams:
    t: float

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")
        if txeb_denominator(self.t) <= 0:
            raise ValueError(f"t={self.t}: estimator denominator is not positive")
        if self.t < 2:
            warnings.warn(f"t={self.t} < 2: truncated XEB variance is very large", stacklevel=2)


def txeb_denominator(t: float) -> float:
    return 1.0 - math.exp(-t) * (1.0 + t + t * t)


def txeb_expectation(F: float, t: float) -> float:
    """Expected tXEB for the mixture F p + (1-F)/D under Porter-Thomas."""
    e = math.exp(-t)
    return F + 1.0 - e * (1.0 + t + (1.0 + t + t * t) * F)


def txeb_variance_f0(t: float) -> float:
    """Single-sample variance of the F estimator in the F -> 0 limit."""
    e = math.exp(-t)
    num = 1.0 - e * t * t - e * e * (1.0 + 2.0 * t + t * t)
    return num / txeb_denominator(t) ** 2


def txeb_fidelity(txeb_value: float, t: float) -> float:
    return (txeb_value - 1.0 + math.exp(-t) * (1.0 + t)) / txeb_denominator(t)


def truncated_xeb(samples: SampleSet, params: TxebParams) -> tuple[float, float, float]:
    """(F estimate, per-sample variance at F = 0, variance of the estimate)."""
    x = _dp(samples)
    f = np.where(x <= params.t, x, 0.0)
    F = txeb_fidelity(float(f.mean()), params.t)
    v = txeb_variance_f0(params.t)
    return F, v, v / x.size


# ---------------------------------------------------------------- collisions

@dataclass
class MultiplicityStats:
    beta: float
    D: float
    b: float
    M: dict = field(default_factory=dict)  # c -> expected count of strings seen exactly c times
    A: dict = field(default_factory=dict)  # c -> expected ideal probability of those strings
    M_unique: float = 0.0

    def check_budget(self, rtol: float = 1e-6) -> bool:
        """sum_c c M_c approaches beta as c_max grows (first order in 1/D)."""
        tot = sum(c * m for c, m in self.M.items())
        return abs(tot - self.beta) <= rtol * self.beta + self.M[max(self.M)] * max(self.M) * 10


def collision_stats(beta: float, D: float, c_max: Optional[int] = None) -> MultiplicityStats:
    """M_c = D b^c / (1+b)^(c+1), A_c = (c+1) / (D (1+b)), M_unique = D beta / (D + beta)."""
    if beta <= 0 or D <= 0:
        raise ValueError("beta and D must be positive")
    b = beta / D
    out = MultiplicityStats(beta=float(beta), D=float(D), b=b, M_unique=D * beta / (D + beta))
    c = 1
    while True:
        m = D * b**c / (1.0 + b) ** (c + 1)
        out.M[c] = m
        out.A[c] = (c + 1) / (D * (1.0 + b))
        if (c_max is not None and c >= c_max) or (c_max is None and m < 1e-3):
            break
        c += 1
    return out


def unique_sample_xeb_shift(beta: float, D: float) -> float:
    """Expected XEB of an ideal sample after removing repeats: 1/(1+b)."""
    return 1.0 / (1.0 + beta / D)


def postselection_gain(s: float, q: float, D: float) -> float:
    """XEB contribution of strings seen twice when oversampling by s: 6 s^2 q / D."""
    return 6.0 * s * s * q / D


def multiplicity_counts(bitstrings: np.ndarray) -> dict:
    """Observed number of distinct strings per multiplicity."""
    _, counts = np.unique(bitstrings, return_counts=True)
    vals, freq = np.unique(counts, return_counts=True)
    return {int(v): int(f) for v, f in zip(vals, freq)}


def dedupe(samples: SampleSet) -> SampleSet:
    _, idx = np.unique(samples.bitstrings, return_index=True)
    return samples.subset(np.sort(idx))


# ---------------------------------------------------------------- Hamming filter

@dataclass(frozen=True)
class HammingFilterParams:
    threshold: int
    e01: float = 0.0
    e10: float = 0.0
    bootstrap_rounds: int = 100

    def __post_init__(self):
        if not (0 <= self.e01 <= 1 and 0 <= self.e10 <= 1):
            raise ValueError("readout error rates must lie in [0, 1]")
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")

    @property
    def bias(self) -> float:
        return self.e01 - self.e10


def collision_probability(n: int, threshold: int, bias: float = 0.0) -> float:
    """P(h <= threshold) for two independent strings with P(bit = 1) = (1 - bias)/2."""
    pb = (1.0 - bias) / 2.0
    mismatch = 2.0 * pb * (1.0 - pb)
    return float(stats.binom.cdf(threshold, n, mismatch))


def hamming_distance(a, b) -> np.ndarray:
    return np.bitwise_count(np.bitwise_xor(np.asarray(a, dtype=np.uint64), np.asarray(b, dtype=np.uint64)))


def greedy_filter(bitstrings: np.ndarray, threshold: int, order: np.ndarray) -> np.ndarray:
    """Indices kept when walking ``order`` and dropping everything within ``threshold`` of a keeper."""
    bs = np.asarray(bitstrings, dtype=np.uint64)[order]
    alive = np.ones(bs.size, dtype=bool)
    keep = []
    for i in range(bs.size):
        if not alive[i]:
            continue
        keep.append(order[i])
        rest = slice(i + 1, None)
        close = hamming_distance(bs[rest], bs[i]) <= threshold
        alive[rest] &= ~close
    return np.array(keep, dtype=np.int64)


def hamming_filter(samples: SampleSet, params: HammingFilterParams, seed: int = 0):
    """Bootstrap rounds of the greedy filter; returns (subsets, mean XEB over rounds or nan)."""
    if params.threshold > samples.n:
        raise ValueError("threshold exceeds the string length")
    gen = rng.stream(seed, "hamming-filter")
    subsets, xebs = [], []
    for _ in range(params.bootstrap_rounds):
        order = gen.permutation(len(samples))
        keep = greedy_filter(samples.bitstrings, params.threshold, order)
        if keep.size == 0:
            raise ValueError("filter left no bitstrings")
        sub = samples.subset(np.sort(keep))
        subsets.append(sub)
        if sub.probs is not None:
            xebs.append(linear_xeb(sub).value)
    return subsets, (float(np.mean(xebs)) if xebs else float("nan"))


def min_pairwise_distance(bitstrings: np.ndarray) -> int:
    bs = np.asarray(bitstrings, dtype=np.uint64)
    if bs.size < 2:
        return 1 << 30
    best = 1 << 30
    for i in range(bs.size - 1):
        best = min(best, int(hamming_distance(bs[i + 1:], bs[i]).min()))
    return best


# ---------------------------------------------------------------- Porter-Thomas

def porter_thomas_checks(samples: SampleSet, bins: int = 20) -> dict:
    """KS test of D p against Exp(1), plus the mean of D p and a histogram.

    The KS null is the exponential law of the ideal probabilities of uniformly
    chosen strings; pass uniformly drawn strings (or the whole distribution)
    to test Porter-Thomas statistics.
    """
    x = _dp(samples)
    ks = stats.kstest(x, "expon")
    hist, edges = np.histogram(x, bins=bins, range=(0.0, max(8.0, float(x.max()))))
    return {
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "mean_dp": float(x.mean()),
        "histogram": hist.tolist(),
        "edges": edges.tolist(),
    }


def porter_thomas_distribution(n: int, seed: int) -> np.ndarray:
    """Synthetic Porter-Thomas distribution: normalized i.i.d. exponentials."""
    w = rng.stream(seed, "porter-thomas", n).exponential(size=2**n)
    return w / w.sum()


def mixture_sample(dist: np.ndarray, phi: float, count: int, seed: int) -> SampleSet:
    """Draws from phi * dist + (1 - phi) * uniform, tagged with ideal probabilities."""
    if not 0 <= phi <= 1:
        raise ValueError("phi must lie in [0, 1]")
    D = dist.size
    n = D.bit_length() - 1
    gen = rng.stream(seed, "mixture")
    ideal = gen.random(count) < phi
    idx = gen.integers(0, D, size=count)
    k = int(ideal.sum())
    if k:
        idx[ideal] = gen.choice(D, size=k, p=dist)
    return SampleSet(n, idx, dist[idx], {"sampler": "mixture", "phi": phi})
