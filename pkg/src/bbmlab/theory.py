"""Closed-form and series evaluators for the model's limit laws.

Everything here is deterministic: principal Dirichlet eigenvalues of
-(1/2) Laplacian on the unit ball, exact one-dimensional confinement
and displacement probabilities, the geometric law of dyadic branching
counts, the decay-rate prediction for atypically small confined mass,
and the quenched growth exponent among mild obstacles.

Values that are only asymptotically valid carry an explicit
``asymptotic`` flag so no caller can silently treat them as exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as _gamma
from scipy.special import jv, ndtr

_SERIES_TOL = 1e-16
_MAX_DIM = 10


class TheoryValue(NamedTuple):
    """A numeric result plus whether it is asymptotic-only."""

    value: float
    asymptotic: bool


class ClearingScale(NamedTuple):
    r0: float
    r_ell: float
    clamped: bool


class ExtinctionBound(NamedTuple):
    rate: float        # exponent per unit r(t) in the extinction lower bound
    k_opt: float       # optimizing time scale multiple of r(t)


class GrowthPrediction(NamedTuple):
    exponent: float    # predicted (log N_t)/t at finite t
    limit_value: float # limit of the rescaled quantity, = -c(d, nu)


@dataclass(frozen=True)
class TheoryConstants:
    """The dimension/intensity constants used across predictions."""

    dim: int
    nu: float
    lambda_d: float
    omega_d: float
    r0: float
    c_d_nu: float


@dataclass(frozen=True)
class LDRatePrediction:
    """Decay rate of P(n_t < e^{-kappa r(t)} p_t e^{beta t}) per unit r(t).

    regime "exact" carries a single value; regime "band" carries the
    unresolved interval [-min(kappa, sqrt(2 beta)), -sqrt(beta/2)].
    """

    kappa: float
    beta: float
    regime: str                      # "exact" | "band"
    value: float | None = None
    band: tuple[float, float] | None = None


def unit_ball_volume(dim: int) -> float:
    return float(math.pi ** (dim / 2.0) / _gamma(dim / 2.0 + 1.0))


@lru_cache(maxsize=None)
def bessel_first_zero(order: float) -> float:
    """First positive zero of J_order via bracketed root finding."""
    f = lambda x: jv(order, x)
    x = 0.05
    # J_order is positive just right of 0 for order > -1
    while f(x) <= 0 and x < 1.0:
        x += 0.01
    step = 0.05
    while f(x) > 0:
        x += step
        if x > 60.0:
            raise RuntimeError(f"no sign change found for J_{order}")
    return float(brentq(f, x - step, x, xtol=1e-14, rtol=8.9e-16))


@lru_cache(maxsize=None)
def lambda_d(dim: int) -> float:
    """Principal Dirichlet eigenvalue of -(1/2) Laplacian on the unit d-ball.

    Equals (first zero of J_{d/2-1})^2 / 2; scales as lambda_d / r^2 on
    the r-ball.
    """
    if not 1 <= dim <= _MAX_DIM:
        raise ValueError(f"dim must be in 1..{_MAX_DIM}, got {dim}")
    z = bessel_first_zero(dim / 2.0 - 1.0)
    return z * z / 2.0


def constants_for(dim: int, nu: float) -> TheoryConstants:
    if nu <= 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    lam = lambda_d(dim)
    om = unit_ball_volume(dim)
    r0 = (dim / (nu * om)) ** (1.0 / dim)
    c = lam * (dim / (nu * om)) ** (-2.0 / dim)
    return TheoryConstants(dim=dim, nu=nu, lambda_d=lam, omega_d=om, r0=r0, c_d_nu=c)


def _interval_series(x: float, r: float, t: float) -> float:
    """Eigenexpansion of P_x(no exit of (-r, r) before t), start x."""
    L = 2.0 * r
    y = x + r
    tot, n = 0.0, 1
    while True:
        decay = math.exp(-n * n * math.pi ** 2 * t / (2.0 * L * L))
        tot += (4.0 / (n * math.pi)) * math.sin(n * math.pi * y / L) * decay
        if decay < _SERIES_TOL and n >= 5:
            return tot
        n += 2


def _images_shell(x, r: float, s: float, k: int):
    """One image shell (offset 4kr) of the two-barrier survival sum."""
    off = 4.0 * k * r
    return (
        ndtr((r - x - off) / s)
        - ndtr((-r - x - off) / s)
        - ndtr((3.0 * r + x - off) / s)
        + ndtr((r + x - off) / s)
    )


def _interval_images(x: float, r: float, t: float) -> float:
    """Reflection form of the same probability; fast for small t/r^2.

    Survival of BM from x in (-r, r) with absorption at both ends,
    via the image expansion of the absorbing transition density
    integrated over the interval; image shells at spacing 4r.
    """
    s = math.sqrt(t)
    tot = float(_images_shell(x, r, s, 0))
    k = 1
    while True:
        term = float(_images_shell(x, r, s, k) + _images_shell(x, r, s, -k))
        tot += term
        if abs(term) < _SERIES_TOL or k > 200:
            return min(1.0, max(0.0, tot))
        k += 1


def interval_confinement(x: float, r: float, t: float) -> float:
    """P_x(Brownian motion stays in (-r, r) up to t), exact in d=1."""
    if r <= 0 or t < 0:
        raise ValueError("need r > 0 and t >= 0")
    if abs(x) >= r:
        return 0.0
    if t == 0:
        return 1.0
    if t / (r * r) >= 0.25:
        return _interval_series(x, r, t)
    return _interval_images(x, r, t)


def interval_confinement_many(x: np.ndarray, r: float, t: float) -> np.ndarray:
    """Vectorized exact d=1 confinement from many starting points.

    Used by the engine to evaluate conditional expected final mass; for
    the long remaining horizons it is called with, the eigenexpansion
    needs only a handful of terms.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    inside = np.abs(x) < r
    xi = x[inside]
    if t / (r * r) >= 0.25:
        L = 2.0 * r
        y = xi + r
        tot = np.zeros_like(y)
        n = 1
        while True:
            decay = math.exp(-n * n * math.pi ** 2 * t / (2.0 * L * L))
            tot += (4.0 / (n * math.pi)) * np.sin(n * math.pi * y / L) * decay
            if decay < _SERIES_TOL and n >= 5:
                break
            n += 2
        out[inside] = tot
    else:
        s = math.sqrt(t)
        tot = _images_shell(xi, r, s, 0)
        k = 1
        while True:
            term = _images_shell(xi, r, s, k) + _images_shell(xi, r, s, -k)
            tot = tot + term
            if (len(xi) == 0 or float(np.max(np.abs(term))) < _SERIES_TOL) or k > 200:
                break
            k += 1
        out[inside] = np.clip(tot, 0.0, 1.0)
    return out


def confinement_probability_series(r: float, t: float, dim: int = 1) -> TheoryValue:
    """Probability p_t of Brownian confinement to the r-ball over [0, t].

    d=1 is exact: the alternating eigenexpansion
    (4/pi) sum_n ((-1)^n / (2n+1)) exp(-(2n+1)^2 pi^2 t / (8 r^2)),
    truncated when terms drop below 1e-16 (reflection form is used in
    the short-time regime where the eigenexpansion converges slowly).
    For d >= 2 only the leading order exp(-lambda_d t / r^2) is
    returned, flagged asymptotic.
    """
    if r <= 0 or t < 0:
        raise ValueError("need r > 0 and t >= 0")
    if dim == 1:
        return TheoryValue(interval_confinement(0.0, r, t), asymptotic=False)
    return TheoryValue(math.exp(-lambda_d(dim) * t / (r * r)), asymptotic=True)


def log_confinement_probability(r: float, t: float, dim: int = 1) -> TheoryValue:
    """log p_t without underflow for large t (d=1 exact, else leading order)."""
    if dim != 1:
        return TheoryValue(-lambda_d(dim) * t / (r * r), asymptotic=True)
    lam1 = math.pi ** 2 / (8.0 * r * r)
    if t * lam1 < 600.0:
        return TheoryValue(math.log(interval_confinement(0.0, r, t)), asymptotic=False)
    # beyond float range only the first term survives at 1e-16 accuracy
    return TheoryValue(math.log(4.0 / math.pi) - lam1 * t, asymptotic=False)


def displacement_tail(k: float, t: float, dim: int = 1) -> TheoryValue:
    """P(sup_{s<=t} |X(s)| > k t): exact complement-series in d=1.

    For d >= 2 returns the leading-order exp(-k^2 t / 2), flagged.
    """
    if k <= 0 or t <= 0:
        raise ValueError("need k > 0 and t > 0")
    if dim == 1:
        return TheoryValue(1.0 - interval_confinement(0.0, k * t, t), asymptotic=False)
    return TheoryValue(math.exp(-k * k * t / 2.0), asymptotic=True)


def yule_pmf(beta: float, t: float, k) -> float | np.ndarray:
    """P(N_t = k) = e^{-bt} (1 - e^{-bt})^{k-1} for the dyadic count."""
    karr = np.asarray(k)
    if np.any(karr < 1):
        raise ValueError("k must be >= 1")
    p = math.exp(-beta * t)
    out = p * (1.0 - p) ** (karr - 1)
    return float(out) if np.isscalar(k) else out


def yule_tail(beta: float, t: float, k) -> float | np.ndarray:
    """P(N_t > k) = (1 - e^{-bt})^k."""
    karr = np.asarray(k)
    if np.any(karr < 0):
        raise ValueError("k must be >= 0")
    out = (1.0 - math.exp(-beta * t)) ** karr
    return float(out) if np.isscalar(k) else out


def ld_rate_prediction(kappa: float, beta: float) -> LDRatePrediction:
    """Predicted limit of (1/r(t)) log P(n_t < e^{-kappa r(t)} p_t e^{bt}).

    Exactly -kappa when 0 < kappa <= sqrt(beta/2); otherwise the limit
    is only known to lie in [-(kappa ^ sqrt(2 beta)), -sqrt(beta/2)].
    """
    if kappa <= 0 or beta <= 0:
        raise ValueError("need kappa > 0 and beta > 0")
    lo_rate = math.sqrt(beta / 2.0)
    if kappa <= lo_rate:
        return LDRatePrediction(kappa=kappa, beta=beta, regime="exact", value=-kappa)
    return LDRatePrediction(
        kappa=kappa,
        beta=beta,
        regime="band",
        band=(-min(kappa, math.sqrt(2.0 * beta)), -lo_rate),
    )


def extinction_rate_lower_bound(beta: float) -> ExtinctionBound:
    """Exponent of P(n_t = 0) >= exp[-sqrt(2 beta) r(t) (1 + o(1))].

    The joint suppress-and-exit strategy costs beta k r(t) + r(t)/(2k);
    the optimum is k = 1/sqrt(2 beta), giving rate sqrt(2 beta).
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return ExtinctionBound(rate=math.sqrt(2.0 * beta), k_opt=1.0 / math.sqrt(2.0 * beta))


def quenched_growth_exponent(dim: int, nu: float, beta: float, t: float) -> GrowthPrediction:
    """Predicted (log N_t)/t among mild obstacles, and its rescaled limit.

    The prediction beta - c(d, nu) / (log t)^{2/d} does not involve the
    in-trap rate at all.
    """
    if t <= math.e:
        raise ValueError(f"need t > e for the log log scale, got {t}")
    c = constants_for(dim, nu).c_d_nu
    return GrowthPrediction(
        exponent=beta - c / (math.log(t)) ** (2.0 / dim),
        limit_value=-c,
    )


def lemma2_radius(dim: int, nu: float, t: float) -> float:
    """Clearing radius scale (R0/3) (1/(6d))^{1/d} (log t)^{1/d}."""
    if t <= 1:
        raise ValueError(f"need t > 1, got {t}")
    r0 = constants_for(dim, nu).r0
    return (r0 / 3.0) * (1.0 / (6.0 * dim)) ** (1.0 / dim) * math.log(t) ** (1.0 / dim)
