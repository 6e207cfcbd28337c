"""Estimators with honest intervals for the replication harness.

Proportions get Wilson intervals; means get normal intervals.  The
large-deviation rate fit regresses log P-hat on r(t) and propagates the
per-point Wilson intervals to a conservative slope band by refitting
through every corner assignment.  Horizons with zero observed events
never produce log(0): they contribute one-sided upper bounds, flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need n >= 1")
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k} n={n}")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def mean_interval(values: np.ndarray, z: float = Z95) -> tuple[float, float, float]:
    """(mean, lo, hi) via the normal approximation."""
    v = np.asarray(values, dtype=np.float64)
    m = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return m, m - z * se, m + z * se


@dataclass(frozen=True)
class HorizonStat:
    """Event statistics of one horizon in an LD ladder."""

    t: float
    r: float
    events: int
    n: int

    @property
    def p_hat(self) -> float:
        return self.events / self.n

    def wilson(self) -> tuple[float, float]:
        return wilson_interval(self.events, self.n)


@dataclass(frozen=True)
class LDRateFit:
    slope: float | None
    band: tuple[float, float]
    intercept: float | None
    one_sided: bool
    points: tuple          # (t, r, p_hat, lo, hi) per horizon used
    upper_bounds: tuple    # (t, r, log(hi)/r) for zero-event horizons


def estimate_ld_rate(stats: list[HorizonStat]) -> LDRateFit:
    """Least-squares slope of log P-hat against r(t) with a corner band.

    Needs >= 3 horizons, each with at least one event occurrence or a
    reported one-sided bound; all-zero event counts yield a flagged
    one-sided result with no point slope.
    """
    if len(stats) < 3:
        raise ValueError("need at least 3 horizons for a rate fit")
    with_events = [s for s in stats if s.events > 0]
    zeroes = [s for s in stats if s.events == 0]
    ub = tuple(
        (s.t, s.r, math.log(s.wilson()[1]) / s.r) for s in zeroes
    )
    if len(with_events) < 2:
        return LDRateFit(
            slope=None,
            band=(-math.inf, max(u[2] for u in ub) if ub else math.inf),
            intercept=None,
            one_sided=True,
            points=tuple(
                (s.t, s.r, s.p_hat, *s.wilson()) for s in with_events
            ),
            upper_bounds=ub,
        )

    rs = np.array([s.r for s in with_events])
    ys = np.array([math.log(s.p_hat) for s in with_events])
    A = np.vstack([rs, np.ones_like(rs)]).T
    slope, icept = np.linalg.lstsq(A, ys, rcond=None)[0]

    # corner band: refit through every low/high CI assignment
    bounds = []
    for s in with_events:
        lo, hi = s.wilson()
        bounds.append((math.log(max(lo, 1e-300)), math.log(hi)))
    slopes = []
    for mask in range(2 ** len(bounds)):
        yy = np.array(
            [bounds[i][1] if (mask >> i) & 1 else bounds[i][0] for i in range(len(bounds))]
        )
        s_, _ = np.linalg.lstsq(A, yy, rcond=None)[0]
        slopes.append(float(s_))
    return LDRateFit(
        slope=float(slope),
        band=(min(slopes), max(slopes)),
        intercept=float(icept),
        one_sided=bool(zeroes),
        points=tuple((s.t, s.r, s.p_hat, *s.wilson()) for s in with_events),
        upper_bounds=ub,
    )


@dataclass(frozen=True)
class GrowthRow:
    t: float
    mean_log_growth: float          # mean over replicas of (log N_t)/t
    lo: float
    hi: float
    mean_rescaled: float            # (log t)^{2/d} ((log N_t)/t - beta)
    rescaled_lo: float
    rescaled_hi: float
    n_used: int
    n_censored: int


def estimate_growth_exponent(
    times: np.ndarray,
    counts: np.ndarray,
    censored: np.ndarray,
    beta: float,
    dim: int,
) -> list[GrowthRow]:
    """Per-time growth exponent trace from obstacle-mode outcomes.

    counts has shape (replicas, n_times); censored replicas are
    excluded from estimates and counted.
    """
    times = np.asarray(times, dtype=np.float64)
    counts = np.asarray(counts)
    censored = np.asarray(censored, dtype=bool)
    rows = []
    ok = ~censored
    for j, t in enumerate(times):
        vals = counts[ok, j].astype(np.float64)
        g = np.log(np.maximum(vals, 1.0)) / t
        m, lo, hi = mean_interval(g)
        scale = math.log(t) ** (2.0 / dim) if t > 1.0 else 0.0
        rm, rlo, rhi = (scale * (x - beta) for x in (m, lo, hi))
        rows.append(
            GrowthRow(
                t=float(t),
                mean_log_growth=m,
                lo=lo,
                hi=hi,
                mean_rescaled=rm,
                rescaled_lo=min(rlo, rhi),
                rescaled_hi=max(rlo, rhi),
                n_used=int(ok.sum()),
                n_censored=int(censored.sum()),
            )
        )
    return rows
