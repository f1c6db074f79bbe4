"""Min-entropy budgets for randomness drawn from a noisy sampler.

The device is modelled as emitting, with probability F, a string from the
ideal Porter-Thomas distribution and otherwise a deterministic string. All
logs below are natural unless a function says otherwise; reports carry
both units.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy import special

from . import xeb

GAMMA = 0.5772156649015329
LOG2E = 1.0 / math.log(2.0)
UNITS = ("nats", "bits")


def _unit(x_nats: float, unit: str) -> float:
    if unit not in UNITS:
        raise ValueError(f"unit must be one of {UNITS}")
    return x_nats if unit == "nats" else x_nats * LOG2E


@dataclass(frozen=True)
class EntropyParams:
    F: float
    k: int
    D: float
    c1: float = 5.0
    c2: float = 5.0
    s: float = 1.0
    unit: str = "bits"

    def __post_init__(self):
        if not 0 <= self.F <= 1:
            raise ValueError("F must lie in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.D < 2:
            raise ValueError("D must be >= 2")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("confidence multipliers must be >= 0")
        if self.s < 1:
            raise ValueError("oversampling factor s must be >= 1")
        if self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}")

    @property
    def n_bits(self) -> float:
        return math.log2(self.D)


def honest_min_entropy(p: EntropyParams) -> float:
    """-k log(1 - F); at F = 1 the bound saturates at k log D."""
    if p.F >= 1.0:
        return _unit(p.k * math.log(p.D), p.unit)
    return _unit(-p.k * math.log1p(-p.F), p.unit)


def ideal_count(p: EntropyParams) -> float:
    """q = kF - c1 sqrt(kF(1-F)), the guaranteed number of ideal strings."""
    kf = p.k * p.F
    return kf - p.c1 * math.sqrt(kf * (1.0 - p.F))


def smoothing_epsilon(c1: float) -> float:
    """Probability of fewer than q ideal strings, taken as erfc(c1)."""
    return float(special.erfc(c1))


def pt_entropy_per_string(D: float) -> float:
    """-<ln p> over Porter-Thomas samples: ln D - 1 + gamma (nats)."""
    return math.log(D) - 1.0 + GAMMA


def smooth_min_entropy(p: EntropyParams) -> tuple[float, float, float]:
    """(q, q (ln D - 1 + gamma) - c2 sqrt(q pi^2 / 6), epsilon) with the bound in p.unit."""
    q = ideal_count(p)
    if q <= 0:
        raise ValueError(f"q = {q:.3g} <= 0: fidelity too low for confidence c1={p.c1}")
    bound = q * pt_entropy_per_string(p.D) - p.c2 * math.sqrt(q * math.pi**2 / 6.0)
    return q, _unit(bound, p.unit), smoothing_epsilon(p.c1)


def log_falling_factorial(x: float, q: float) -> float:
    """ln (x)_q = ln x (x-1) ... (x-q+1) via log-gamma."""
    if q < 0 or x - q + 1 <= 0:
        raise ValueError("need 0 <= q <= x")
    return float(special.gammaln(x + 1.0) - special.gammaln(x - q + 1.0))


def log_falling_factorial_stirling(x: float, q: float) -> float:
    """Leading Stirling form of ln (x)_q."""
    rest = x - q
    tail = rest * math.log(rest) if rest > 0 else 0.0
    return x * math.log(x) - tail - q


def multiset_correction(p: EntropyParams, asymptotic: bool = False) -> float:
    """Smooth bound minus ln (sq)_q, in p.unit."""
    q, bare, _ = smooth_min_entropy(EntropyParams(**{**asdict(p), "unit": "nats"}))
    x = p.s * q
    corr = log_falling_factorial_stirling(x, q) if asymptotic else log_falling_factorial(x, q)
    return _unit(bare - corr, p.unit)


def multiset_bound_plain(q: float, D: float, s: float) -> float:
    """q ln D - ln (sq)_q in nats (no smoothing terms)."""
    return q * math.log(D) - log_falling_factorial(s * q, q)


def report(p: EntropyParams) -> dict:
    """JSON-ready summary in both units."""
    bits = EntropyParams(**{**asdict(p), "unit": "bits"})
    out = {"params": asdict(p), "honest_bits": honest_min_entropy(bits)}
    try:
        q, sm, eps = smooth_min_entropy(bits)
        out.update(q=q, epsilon=eps, smooth_bits=sm, corrected_bits=multiset_correction(bits))
    except ValueError as exc:
        out.update(q=ideal_count(p), epsilon=smoothing_epsilon(p.c1), smooth_bits=0.0,
                   corrected_bits=0.0, note=str(exc))
    return out


def params_from_samples(samples, **kw) -> EntropyParams:
    """EntropyParams with F taken as the linear XEB of the samples, clipped to [0, 1]."""
    F = min(1.0, max(0.0, xeb.linear_xeb(samples).value))
    return EntropyParams(F=F, k=len(samples), D=float(samples.dim), **kw)
