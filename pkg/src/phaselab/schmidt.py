"""Schmidt spectra, Marchenko-Pastur analytics and bond-dimension bounds.

Normalized singular values s = sqrt(D1) S of a Haar state in C^D1 x C^D2
(D1 <= D2, aspect lambda = D1/D2) follow the Marchenko-Pastur law

    p(s) = sqrt((l+^2 - s^2)(s^2 - l-^2)) / (pi lambda s),   l+- = 1 +- sqrt(lambda).

In x = s^2 this is the usual MP density sqrt((b-x)(x-a)) / (2 pi lambda x)
on [a, b] = [l-^2, l+^2], which has elementary antiderivatives; both the
tail count C(s) and the kept weight F(r) below use them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from . import rng
from .samples import SampleSet

NORM_TOL = 1e-10


@dataclass(frozen=True)
class SchmidtSpectrum:
    singular_values: np.ndarray
    D1: int
    D2: int

    def __post_init__(self):
        s = np.asarray(self.singular_values, dtype=float)
        if s.size != self.D1 or self.D1 > self.D2:
            raise ValueError("spectrum length must equal the smaller dimension D1")
        if abs(float(np.sum(s**2)) - 1.0) > NORM_TOL:
            raise ValueError("squared singular values must sum to 1")

    @property
    def aspect_ratio(self) -> float:
        return self.D1 / self.D2

    @property
    def lambda_plus(self) -> float:
        return 1.0 + math.sqrt(self.aspect_ratio)

    @property
    def lambda_minus(self) -> float:
        return 1.0 - math.sqrt(self.aspect_ratio)

    @property
    def purity(self) -> float:
        return float(np.sum(self.singular_values**4))

    def truncation_fidelity(self, chi: int) -> float:
        return float(np.sum(self.singular_values[:chi] ** 2))

    def normalized(self) -> np.ndarray:
        return math.sqrt(self.D1) * self.singular_values


def _as_matrix(amplitudes: np.ndarray, cut) -> tuple[np.ndarray, list, list]:
    psi = np.asarray(amplitudes)
    n = psi.size.bit_length() - 1
    if isinstance(cut, (int, np.integer)):
        left = list(range(int(cut)))
    else:
        left = sorted(int(q) for q in cut)
    if not left or len(left) >= n or any(not 0 <= q < n for q in left):
        raise ValueError(f"cut {cut!r} must name a proper nonempty subset of {n} qubits")
    right = [q for q in range(n) if q not in left]
    t = psi.reshape((2,) * n).transpose(left + right)
    return t.reshape(2 ** len(left), 2 ** len(right)), left, right


def _svd(amplitudes, cut):
    m, left, right = _as_matrix(amplitudes, cut)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return u, s, vh, left, right


def schmidt_decompose(state, cut) -> SchmidtSpectrum:
    """Spectrum across ``cut`` (number of leading qubits, or a list of qubits on one side)."""
    amps = getattr(state, "amplitudes", state)
    _, s, _, left, right = _svd(amps, cut)
    s = s / np.linalg.norm(s)
    d1, d2 = sorted((2 ** len(left), 2 ** len(right)))
    return SchmidtSpectrum(s, d1, d2)


def truncate(state, cut, chi: int) -> tuple[np.ndarray, float]:
    """(normalized chi-term approximation, fidelity |<psi|psi_chi>|^2)."""
    amps = np.asarray(getattr(state, "amplitudes", state))
    u, s, vh, left, right = _svd(amps, cut)
    if chi < 1:
        raise ValueError("chi must be >= 1")
    chi = min(chi, s.size)
    m = (u[:, :chi] * s[:chi]) @ vh[:chi]
    n = len(left) + len(right)
    t = m.reshape((2,) * n).transpose(np.argsort(left + right)).reshape(-1)
    F = float(np.sum(s[:chi] ** 2) / np.sum(s**2))
    return t / np.linalg.norm(t), F


# ---------------------------------------------------------------- Marchenko-Pastur

def _edges(lam: float) -> tuple[float, float]:
    if not 0 < lam <= 1:
        raise ValueError("aspect ratio must lie in (0, 1]")
    r = math.sqrt(lam)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


def mp_density(s, lam: float):
    """p_lambda(s) on [l-, l+], zero outside."""
    a, b = _edges(lam)
    s = np.asarray(s, dtype=float)
    x = s * s
    inside = (x > a) & (x < b)
    out = np.zeros_like(s)
    out[inside] = np.sqrt((b - x[inside]) * (x[inside] - a)) / (math.pi * lam * s[inside])
    return out


def _antider_count(x: float, a: float, b: float) -> float:
    """Antiderivative of sqrt((b-x)(x-a)) / x."""
    c, R = (a + b) / 2.0, (b - a) / 2.0
    root = math.sqrt(max((b - x) * (x - a), 0.0))
    v = c * math.asin(min(1.0, max(-1.0, (x - c) / R))) + root
    if a > 0:
        w = ((a + b) * x - 2.0 * a * b) / ((b - a) * x)
        v -= math.sqrt(a * b) * math.asin(min(1.0, max(-1.0, w)))
    return v


def _antider_weight(x: float, a: float, b: float) -> float:
    """Antiderivative of sqrt((b-x)(x-a))."""
    c, R = (a + b) / 2.0, (b - a) / 2.0
    u = min(R, max(-R, x - c))
    return 0.5 * (u * math.sqrt(R * R - u * u) + R * R * math.asin(u / R))


def mp_tail(s: float, lam: float) -> float:
    """C_lambda(s): fraction of normalized singular values above s."""
    a, b = _edges(lam)
    x = min(max(s * s, a), b)
    return (_antider_count(b, a, b) - _antider_count(x, a, b)) / (2.0 * math.pi * lam)


def _arc_inverse(y: float) -> float:
    """theta in [0, 2 pi] with theta - sin(theta) = y."""
    if y <= 0:
        return 0.0
    if y >= 2 * math.pi:
        return 2 * math.pi
    return optimize.brentq(lambda t: t - math.sin(t) - y, 0.0, 2 * math.pi, xtol=1e-15)


def mp_singular_value(r: float, lam: float = 1.0) -> float:
    """s_lambda(r) = C_lambda^{-1}(r); closed form at lambda = 1."""
    if not 0 <= r <= 1:
        raise ValueError("r must lie in [0, 1]")
    a, b = _edges(lam)
    if lam == 1.0:
        return 2.0 * math.cos(0.5 * _arc_inverse(math.pi * r))
    if r == 0:
        return math.sqrt(b)
    if r == 1:
        return math.sqrt(a)
    return optimize.brentq(lambda s: mp_tail(s, lam) - r, math.sqrt(a), math.sqrt(b), xtol=1e-15)


def mp_weight_above(s: float, lam: float) -> float:
    """Kept weight int_s^{l+} s'^2 p(s') ds'."""
    a, b = _edges(lam)
    x = min(max(s * s, a), b)
    return (_antider_weight(b, a, b) - _antider_weight(x, a, b)) / (2.0 * math.pi * lam)


def mp_fidelity(r: float, lam: float = 1.0) -> float:
    """Haar truncation fidelity F_lambda(r) at kept fraction r = chi / D1."""
    if not 0 <= r <= 1:
        raise ValueError("r must lie in [0, 1]")
    return mp_weight_above(mp_singular_value(r, lam), lam)


def mp_fidelity_inverse(f: float, lam: float = 1.0) -> float:
    if not 0 <= f <= 1:
        raise ValueError("target fidelity must lie in [0, 1]")
    if f in (0.0, 1.0):
        return f
    return optimize.brentq(lambda r: mp_fidelity(r, lam) - f, 0.0, 1.0, xtol=1e-15)


def mp_moment(k: int, lam: float = 1.0) -> float:
    """E[s^(2k)] under the MP law (Narayana polynomial)."""
    if k == 0:
        return 1.0
    return float(sum(math.comb(k, j) * math.comb(k, j - 1) / k * lam ** (j - 1) for j in range(1, k + 1)))


def mp_cdf(s, lam: float = 1.0):
    """Ordinary CDF P(S <= s) of normalized singular values."""
    return 1.0 - np.vectorize(lambda v: mp_tail(float(v), lam))(s)


# ---------------------------------------------------------------- bounds

@dataclass(frozen=True)
class FidelityBounds:
    jensen: float
    numeric: float


def fidelity_bound(spectrum: SchmidtSpectrum, chi: int) -> FidelityBounds:
    """sqrt(chi * purity) and F_lambda(min(1, chi * purity))."""
    x = chi * spectrum.purity
    return FidelityBounds(math.sqrt(x), mp_fidelity(min(1.0, x), spectrum.aspect_ratio))


def chi_requirement(target_F: float, purity: float, lam: float = 1.0) -> tuple[float, float]:
    """(chi_an, chi_nm) = (F / purity, F_lambda^{-1}(sqrt F) / purity)."""
    if not 0 < target_F <= 1:
        raise ValueError("target fidelity must lie in (0, 1]")
    if purity <= 0:
        raise ValueError("purity must be positive")
    return target_F / purity, mp_fidelity_inverse(math.sqrt(target_F), lam) / purity


def haar_purity(D1: int, D2: int) -> float:
    """Limit purity E[s^4] / D1 = (1 + D1/D2) / D1."""
    return mp_moment(2, D1 / D2) / D1


def purity_std(D1: int, D2: int) -> float:
    """sqrt(Var(s^4) / D1^3)."""
    lam = D1 / D2
    var = mp_moment(4, lam) - mp_moment(2, lam) ** 2
    return math.sqrt(var / D1**3)


def purity_distance(spectrum: SchmidtSpectrum) -> float:
    """(purity - limit) / std; O(1) once the state is typical."""
    return (spectrum.purity - haar_purity(spectrum.D1, spectrum.D2)) / purity_std(spectrum.D1, spectrum.D2)


def mp_ks_pvalue(spectrum: SchmidtSpectrum) -> float:
    lam = spectrum.aspect_ratio
    return float(stats.kstest(spectrum.normalized(), lambda v: mp_cdf(v, lam)).pvalue)


# ---------------------------------------------------------------- XEB of truncated states

def truncated_state_xeb(state, chi: int, samples: Optional[int] = None, cut=None,
                        seed: int = 0) -> tuple[float, float]:
    """(true F, XEB of the chi-truncated state scored against the ideal one).

    Without ``samples`` the XEB is the exact expectation D sum_j p~_j p_j - 1;
    otherwise it is estimated from that many strings drawn from p~.
    """
    amps = np.asarray(getattr(state, "amplitudes", state))
    n = amps.size.bit_length() - 1
    cut = n // 2 if cut is None else cut
    approx, F = truncate(amps, cut, chi)
    p = np.abs(amps) ** 2
    pt = np.abs(approx) ** 2
    D = amps.size
    if samples is None:
        return F, float(D * np.dot(pt, p) - 1.0)
    gen = rng.stream(seed, "truncated-xeb", chi)
    idx = gen.choice(D, size=samples, p=pt / pt.sum())
    return F, float(D * p[idx].mean() - 1.0)


def slope_through_origin(F: Sequence[float], xeb: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of xeb on F with no intercept, and its standard error."""
    x = np.asarray(F, dtype=float)
    y = np.asarray(xeb, dtype=float)
    k = float(x @ y / (x @ x))
    res = y - k * x
    se = math.sqrt(float(res @ res) / max(1, x.size - 1) / float(x @ x))
    return k, se


def spectrum_table_row(n: int, d: int, chi: int, spectrum: SchmidtSpectrum, true_F: float, xeb: float) -> dict:
    return {
        "n": n, "d": d, "chi": chi, "purity": spectrum.purity,
        "bound": fidelity_bound(spectrum, chi).numeric, "true_F": true_F, "xeb": xeb,
    }


def samples_from_state(state, count: int, seed: int) -> SampleSet:
    amps = np.asarray(getattr(state, "amplitudes", state))
    p = np.abs(amps) ** 2
    idx = rng.stream(seed, "schmidt-samples").choice(p.size, size=count, p=p / p.sum())
    return SampleSet(p.size.bit_length() - 1, idx, p[idx], {"sampler": "state"})
