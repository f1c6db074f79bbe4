"""Upper bounds on the XEB a classical spoofer can collect.

The spoofer splits the system into left and right halves, simulates each
exactly (which keeps a fraction lambda^d of the correlations with the ideal
state) and returns the most likely strings of each half.  Picking the top k
of D Porter-Thomas weights raises the mean of D w - 1 to about ln(D/k).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from . import stabilizer

ASYMPTOTIC_K = 100


@dataclass(frozen=True)
class SpoofScenario:
    D_L: float
    D_R: float
    k_L: float = 1.0
    k_R: float = 1.0
    nu: int = 0
    lambda_decay: float = math.exp(-1.95)
    d: int = 0
    N_superposition: float = 1.0

    def __post_init__(self):
        if self.D_L < 1 or self.D_R < 1:
            raise ValueError("subsystem dimensions must be >= 1")
        if self.k_L < 1 or self.k_R < 1:
            raise ValueError("selected counts must be >= 1")
        if self.k_L > self.D_L or self.k_R > self.D_R:
            raise ValueError("cannot select more strings than a subsystem has")

    @property
    def D(self) -> float:
        return self.D_L * self.D_R

    @property
    def k(self) -> float:
        return self.k_L * self.k_R

    @classmethod
    def from_qubits(cls, n_left: int, n_right: int, **kw) -> "SpoofScenario":
        return cls(D_L=2.0**n_left, D_R=2.0**n_right, **kw)


# ---------------------------------------------------------------- order statistics

def order_statistic_mean(D: float, k: float, method: str = "auto") -> float:
    """Mean of D w - 1 over the k largest of D Porter-Thomas weights.

    The k'-th largest has E[D w] = H_D - H_{k'-1}, so the top-k average of
    D w - 1 is exactly H_D - H_k = psi(D+1) - psi(k+1), which tends to
    ln(D/k) for k >> 1.  ``method='auto'`` switches to the logarithm for
    k >= 100.
    """
    if k < 1 or k > D:
        raise ValueError("need 1 <= k <= D")
    if method == "asymptotic" or (method == "auto" and k >= ASYMPTOTIC_K):
        return math.log(D / k)
    if method not in ("exact", "auto"):
        raise ValueError(f"unknown method {method!r}")
    return float(special.digamma(D + 1.0) - special.digamma(k + 1.0))


def log_order_density(x, D: int, k: int):
    """ln of the density of x = D w for the k-th largest of D exponentials."""
    x = np.asarray(x, dtype=float)
    logc = special.gammaln(D + 1.0) - special.gammaln(k) - special.gammaln(D - k + 1.0)
    with np.errstate(divide="ignore"):
        return logc - k * x + (D - k) * np.log1p(-np.exp(-x))


def kth_expectation_quad(D: int, k: int) -> float:
    """E[D w] of the k-th largest by numerical quadrature of the density."""
    mode = math.log(D / k) if k < D else 1.0 / D
    hi = mode + 60.0 / math.sqrt(k) + 40.0

    def f(x):
        return x * math.exp(float(log_order_density(x, D, k)))

    val, _ = integrate.quad(f, 0.0, hi, points=[mode], limit=400, epsabs=1e-13, epsrel=1e-11)
    return val


def top_k_mean_quad(D: int, k: int) -> float:
    """Quadrature oracle for the top-k average of D w - 1."""
    return float(np.mean([kth_expectation_quad(D, j) for j in range(1, k + 1)])) - 1.0


# ---------------------------------------------------------------- bounds

@dataclass
class LinearBound:
    value: float
    prefactor: float
    k_L_opt: float
    k_R_opt: float
    value_opt: float


def optimal_split(D_L: float, D_R: float, k: float) -> tuple[float, float]:
    """k_L k_R = k maximizing ln(D_L/k_L) ln(D_R/k_R): both logs equal when feasible."""
    a, b, lk = math.log(D_L), math.log(D_R), math.log(k)
    u = min(max((a - b + lk) / 2.0, 0.0), lk)
    u = min(u, a)
    return math.exp(u), math.exp(lk - u)


def spoof_linear_bound(sc: SpoofScenario, k: Optional[float] = None) -> LinearBound:
    """ln(D_L/k_L) ln(D_R/k_R) lambda^d as stated, plus the best split of k."""
    if k is not None and abs(sc.k_L * sc.k_R - k) > 1e-9 * k:
        raise ValueError(f"k_L * k_R = {sc.k_L * sc.k_R} differs from k = {k}")
    decay = sc.lambda_decay**sc.d
    pref = math.log(sc.D_L / sc.k_L) * math.log(sc.D_R / sc.k_R)
    kl, kr = optimal_split(sc.D_L, sc.D_R, sc.k)
    pref_opt = math.log(sc.D_L / kl) * math.log(sc.D_R / kr)
    return LinearBound(pref * decay, pref, kl, kr, pref_opt * decay)


def spoof_log_bound(sc: SpoofScenario) -> float:
    """ln[1 + ln(D_L/k_L) ln(D_R/k_R) / N]."""
    pref = math.log(sc.D_L / sc.k_L) * math.log(sc.D_R / sc.k_R)
    return math.log1p(pref / sc.N_superposition)


def cut_contribution(nu: int, d: int) -> float:
    """Overlap kept with the ideal state after dropping nu cut gates per cycle: 4^-(nu d)."""
    return 4.0 ** (-nu * d)


# ---------------------------------------------------------------- lambda from Clifford runs

def fit_lambda_from_clifford(table, floor: Optional[float] = None, d_min: int = 1) -> tuple[float, float]:
    """ln(lambda) and its standard error from Clifford XEB decay data.

    ``table`` is a DecayResult, a list of them (common slope, free intercepts)
    or a pair (depths, excess) of arrays together with ``floor``.
    """
    if isinstance(table, stabilizer.DecayResult):
        table = [table]
    if isinstance(table, (list, tuple)) and table and isinstance(table[0], stabilizer.DecayResult):
        if len(table) == 1:
            r = table[0]
            sel = r.depths >= d_min
            s, e, _ = stabilizer.fit_ln_lambda(r.depths[sel], r.excess()[sel], r.floor)
            return s, e
        return stabilizer.pooled_ln_lambda(table)
    depths, excess = (np.asarray(v, dtype=float) for v in table)
    if floor is None:
        raise ValueError("floor is required for raw arrays")
    s, e, _ = stabilizer.fit_ln_lambda(depths, excess, floor)
    return s, e


def with_lambda(sc: SpoofScenario, ln_lambda: float) -> SpoofScenario:
    return dataclasses.replace(sc, lambda_decay=math.exp(ln_lambda))


def is_monotone_decreasing(values: Sequence[float]) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= 1e-15 * np.abs(v[:-1]).max()))
