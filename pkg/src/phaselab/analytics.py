"""Closed-form XEB predictions on the phase diagram.

Covers the weak-link model, the 1D transfer-matrix solution, the 2D dilute
expansion (optionally with a boundary term), the critical lines and the
scaling variables f = eps n, alpha = d / log_b n (b = 2 in 1D, 4 in 2D).
Everything that can overflow is evaluated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

LN2 = math.log(2.0)
LN4 = math.log(4.0)

BOUNDARY_R = {"none": None, "regular": 3, "sycamore": 2}
DEFAULT_CR = 4.0  # perimeter constant of a square patch, c_r sqrt(n)


@dataclass(frozen=True)
class PhasePoint:
    n: int
    d: float
    epsilon: float
    T: Optional[int] = None
    dimension: int = 1
    kappa: int = 4
    boundary: str = "none"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.boundary not in BOUNDARY_R:
            raise ValueError(f"unknown boundary {self.boundary!r}")


@dataclass(frozen=True)
class ScalingPoint:
    f: float
    alpha: float
    theta: float = float("nan")

    def __post_init__(self):
        if self.f < 0:
            raise ValueError("f must be >= 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")


def scaling(n: int, d: float, epsilon: float, dimension: int = 1) -> tuple[float, float]:
    """(f, alpha) with the dimension-dependent log base."""
    base = 2.0 if dimension == 1 else 4.0
    return epsilon * n, d / math.log(n, base)


def depth_from_alpha(n: int, alpha: float, dimension: int = 1) -> float:
    return alpha * math.log(n, 2.0 if dimension == 1 else 4.0)


# ------------------------------------------------------------ weak link

def weak_link_xeb(F, T: int, m):
    """XEB(mT) = F^{mT} + 2 (F^{T/2} / 4)^m, F the fidelity per layer."""
    F = np.asarray(F, dtype=float)
    if np.any(F <= 0) or np.any(F > 1):
        raise ValueError("F must lie in (0, 1]")
    m = np.asarray(m, dtype=float)
    return F ** (m * T) + 2.0 * (F ** (T / 2) / 4.0) ** m


def weak_link_split_xeb(F_left, F_right, T: int, d, lam: float = 0.25):
    """Left/right split: lam^{d/T} (F_L^d + F_R^d) + (F_L F_R)^d."""
    FL = np.asarray(F_left, dtype=float)
    FR = np.asarray(F_right, dtype=float)
    if np.any(FL <= 0) or np.any(FL > 1) or np.any(FR < 0) or np.any(FR > 1):
        raise ValueError("fidelities must lie in (0, 1]")
    d = np.asarray(d, dtype=float)
    g = lam ** (d / T)
    return g * FL**d + g * FR**d + (FL * FR) ** d


# ------------------------------------------------------------ 1D chain

def log_xeb1_1d(n, d, epsilon):
    """ln(XEB + 1) of the continuum transfer-matrix solution."""
    n = np.asarray(n, dtype=float)
    d = np.asarray(d, dtype=float)
    eps = np.asarray(epsilon, dtype=float)
    w = 2.0 ** (-d)
    delta = np.sqrt(eps**2 * d**2 / 4.0 + w**2)
    x = n * delta
    e2 = np.exp(-2.0 * x)
    # cosh x + (w/delta) sinh x = e^x [(1 + e2) + (w/delta)(1 - e2)] / 2
    inner = 0.5 * ((1.0 + e2) + (w / delta) * (1.0 - e2))
    return LN2 - eps * n * d / 2.0 + x + np.log(inner)


def xeb_1d(n, d, epsilon):
    """2 e^{-eps n d/2} (cosh n delta + 2^{-d}/delta sinh n delta) - 1."""
    return np.expm1(log_xeb1_1d(n, d, epsilon))


def xeb_1d_scaling(n, alpha, f):
    """Same solution written in the scaling variables (alpha, f)."""
    d = alpha * np.log2(n)
    return xeb_1d(n, d, np.asarray(f, dtype=float) / n)


def xeb_1d_low_alpha(n, alpha, f):
    """alpha < 1 branch: n^{-f alpha / ln4} 2 e^{n^{1-alpha}} - 1."""
    n = np.asarray(n, dtype=float)
    return np.exp(-f * alpha / LN4 * np.log(n) + LN2 + n ** (1.0 - alpha)) - 1.0


def xeb_1d_high_alpha(n, alpha, f):
    """alpha > 1 branch: n^{-f alpha/ln2} + 2 n^{1-alpha} / (f alpha log2 n)."""
    n = np.asarray(n, dtype=float)
    return n ** (-f * alpha / LN2) + 2.0 * n ** (1.0 - alpha) / (f * alpha * np.log2(n))


def log_high_alpha_terms(log_n, alpha, f):
    """Logs of the fidelity and correlation terms of the alpha > 1 branch.

    Takes ln n so that very large systems can be probed without forming n.
    """
    fid = -f * alpha / LN2 * log_n
    corr = LN2 + (1.0 - alpha) * log_n - math.log(f * alpha) - math.log(log_n / LN2)
    return fid, corr


# ------------------------------------------------------------ 2D lattice

def log_xeb1_2d(n, d, epsilon, boundary: str = "none", c_r: float = DEFAULT_CR):
    """ln(XEB + 1) of the dilute flipped-spin expansion.

    The boundary term multiplies the whole expression by
    exp(c_r sqrt(n) e^{-eps d} 4^{-d r/4}).
    """
    if boundary not in BOUNDARY_R:
        raise ValueError(f"unknown boundary {boundary!r}")
    n = float(n)
    d = np.asarray(d, dtype=float)
    eps = np.asarray(epsilon, dtype=float)
    dil = n * 4.0 ** (-d)
    a = np.exp(-eps * d) * dil
    b = -eps * n * d + np.exp(eps * d) * dil
    out = np.logaddexp(a, b)
    r = BOUNDARY_R[boundary]
    if r is not None:
        out = out + c_r * math.sqrt(n) * np.exp(-eps * d) * 4.0 ** (-d * r / 4.0)
    return out


def xeb_2d(n, d, epsilon, boundary: str = "none", c_r: float = DEFAULT_CR):
    return np.expm1(log_xeb1_2d(n, d, epsilon, boundary, c_r))


# ------------------------------------------------------------ phase diagram

def critical_line(alpha, dimension: int = 1, boundary: str = "none"):
    """f_c(alpha) = (alpha - 1)/alpha * ln b.

    b = 2 in 1D and for a 2D lattice with a boundary, b = 4 for the 2D bulk.
    The line ends at alpha = 1.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(a <= 1):
        raise ValueError("critical line only exists for alpha > 1")
    if boundary not in BOUNDARY_R:
        raise ValueError(f"unknown boundary {boundary!r}")
    scale = LN4 if (dimension == 2 and boundary == "none") else LN2
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(a), scale, (a - 1.0) / a * scale)
    return out if out.ndim else float(out)


def model_xeb(point: PhasePoint) -> float:
    if point.dimension == 1:
        return float(xeb_1d(point.n, point.d, point.epsilon))
    return float(xeb_2d(point.n, point.d, point.epsilon, point.boundary))


def phase_classify(point: PhasePoint) -> tuple[str, ScalingPoint]:
    f, alpha = scaling(point.n, point.d, point.epsilon, point.dimension)
    x = model_xeb(point)
    theta = math.exp(-point.epsilon * point.n * point.d) / x if x > 0 else float("nan")
    sp = ScalingPoint(f, alpha, theta)
    if alpha <= 1:
        return "pre_anticoncentration", sp
    fc = critical_line(alpha, point.dimension, point.boundary)
    return ("weak_noise" if f < fc else "strong_noise"), sp
