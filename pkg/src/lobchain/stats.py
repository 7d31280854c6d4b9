"""Statistics of simulated price paths: increments, autocovariances, the
asymptotic variance, diffusive-scaling fits and stationary estimators.

Prices are in half ticks and time is event count unless stated otherwise.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .flow import Trace


def increments(trace: Trace) -> np.ndarray:
    """Mid-price increments per event, in half ticks."""
    return np.diff(trace.mid_path)


def autocovariance(etas: np.ndarray, max_lag: int) -> np.ndarray:
    """Centered autocovariances gamma_0..gamma_max_lag (divisor n)."""
    x = np.asarray(etas, dtype=float)
    n = len(x)
    if max_lag < 0 or n < 50 * max(max_lag, 1):
        raise ValueError(f"need at least {50 * max(max_lag, 1)} samples for max_lag={max_lag}, got {n}")
    x = x - x.mean()
    size = 1 << int(2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:max_lag + 1] / n
    # the fft route loses a few ulps; lag 0 is cheap to do exactly
    acov[0] = math.fsum(x * x) / n
    return acov


@dataclass(frozen=True)
class CutoffRule:
    """Truncate at the lag before ``run`` consecutive |rho_k| < threshold/sqrt(n)."""

    run: int = 3
    threshold: float = 2.0

    def lag(self, gammas: np.ndarray, n: int) -> int:
        if gammas[0] <= 0:
            return 0
        small = np.abs(gammas / gammas[0]) < self.threshold / math.sqrt(n)
        for k in range(1, len(gammas) - self.run + 1):
            if small[k:k + self.run].all():
                return k - 1
        warnings.warn("autocovariances never fell below the noise floor; using every lag")
        return len(gammas) - 1


class VarianceEstimate(NamedTuple):
    sigma2: float
    lag: int


def asymptotic_variance(gammas: np.ndarray, n: int, rule: CutoffRule = CutoffRule()) -> VarianceEstimate:
    """gamma_0 + 2 sum_{k=1}^{L*} gamma_k, clipped at zero."""
    gammas = np.asarray(gammas, dtype=float)
    L = rule.lag(gammas, n)
    s2 = gammas[0] + 2 * math.fsum(gammas[1:L + 1])
    if s2 < 0:
        warnings.warn(f"negative asymptotic variance estimate {s2:.3g} clipped to 0")
        s2 = 0.0
    return VarianceEstimate(float(s2), L)


def batch_means(etas: np.ndarray, batch_size: int | None = None) -> float:
    """Non-overlapping batch-means estimate of the asymptotic variance."""
    x = np.asarray(etas, dtype=float)
    n = len(x)
    m = batch_size or int(math.sqrt(n))
    b = n // m
    if b < 2:
        raise ValueError("need at least two batches")
    sums = x[:b * m].reshape(b, m).sum(axis=1)
    return float(sums.var(ddof=1) / m)


class ScalingFit(NamedTuple):
    slope: float
    intercept: float
    r2: float
    grid: np.ndarray
    variances: np.ndarray
    windows: np.ndarray


def _weighted_line(x, y, w) -> tuple[float, float, float]:
    sw = np.sqrt(w)
    A = np.column_stack([x, np.ones_like(x)]) * sw[:, None]
    (slope, intercept), *_ = np.linalg.lstsq(A, y * sw, rcond=None)
    fitted = slope * x + intercept
    ybar = np.average(y, weights=w)
    ss_tot = np.sum(w * (y - ybar) ** 2)
    r2 = 1.0 - np.sum(w * (y - fitted) ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(min(max(r2, 0.0), 1.0))


def window_variance_fit(path: np.ndarray, grid: Sequence[int], min_windows: int = 30) -> ScalingFit:
    """Regress Var[P_{k+m} - P_k] on m over disjoint windows.

    Each point is weighted by windows/m^2, the inverse of the approximate
    sampling variance of its variance estimate (up to a constant).
    """
    path = np.asarray(path, dtype=float)
    n = len(path) - 1
    grid = np.asarray(sorted(grid), dtype=np.int64)
    if n // grid[-1] < min_windows:
        raise ValueError(f"only {n // grid[-1]} windows of length {grid[-1]}; need {min_windows}")
    var = np.empty(len(grid))
    win = np.empty(len(grid), dtype=np.int64)
    for j, m in enumerate(grid):
        d = np.diff(path[::m])
        var[j] = d.var(ddof=1)
        win[j] = len(d)
    x = grid.astype(float)
    if np.all(var == 0):
        return ScalingFit(0.0, 0.0, 1.0, grid, var, win)
    slope, intercept, r2 = _weighted_line(x, var, win / x ** 2)
    return ScalingFit(slope, intercept, r2, grid, var, win)


def variance_scaling(trace: Trace, grid: Sequence[int], min_windows: int = 30) -> ScalingFit:
    """Event-time variance growth; the slope estimates sigma^2 in half-ticks^2 per event."""
    return window_variance_fit(trace.mid_path, grid, min_windows)


DEFAULT_GRID = (1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000)


class MixingFit(NamedTuple):
    rho: float
    scale: float
    r2: float
    lags: int


def mixing_rate(gammas: np.ndarray, n: int, threshold: float = 2.0) -> MixingFit:
    """Fit |gamma_k| ~ c rho^k on the leading lags whose |rho_k| exceeds the noise floor."""
    g = np.asarray(gammas, dtype=float)
    floor = threshold / math.sqrt(n) * g[0]
    k = 1
    while k < len(g) and abs(g[k]) > floor:
        k += 1
    lags = np.arange(1, k)
    if len(lags) < 3:
        return MixingFit(float("nan"), float("nan"), float("nan"), len(lags))
    y = np.log(np.abs(g[lags]))
    slope, intercept, r2 = _weighted_line(lags.astype(float), y, np.ones(len(lags)))
    return MixingFit(math.exp(slope), math.exp(intercept), r2, len(lags))


def rescaled_path(trace: Trace, n: int, t_max: float = 1.0, points: int = 101,
                  drift: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Centered diffusive rescaling t -> (P_{floor(nt)} - P_0 - floor(nt) drift) / sqrt(n).

    ``drift`` defaults to the trace's mean increment.
    """
    path = trace.mid_path
    if len(path) - 1 < int(n * t_max):
        raise ValueError(f"trace has {len(path) - 1} events, need {int(n * t_max)}")
    if drift is None:
        drift = float(np.mean(np.diff(path))) if len(path) > 1 else 0.0
    t = np.linspace(0.0, t_max, points)
    k = np.floor(n * t).astype(np.int64)
    return t, (path[k] - path[0] - k * drift) / math.sqrt(n)


class StationaryEstimates(NamedTuple):
    ask_depth: np.ndarray
    bid_depth: np.ndarray
    ask_se: np.ndarray
    bid_se: np.ndarray
    spread_hist: np.ndarray


def _batch_se(x: np.ndarray, w: np.ndarray, batches: int = 20) -> np.ndarray:
    n = len(x) // batches * batches
    if n < batches:
        return np.full(x.shape[1], np.nan)
    xb = x[:n].reshape(batches, -1, x.shape[1])
    wb = w[:n].reshape(batches, -1)
    means = (xb * wb[..., None]).sum(1) / wb.sum(1)[:, None]
    return means.std(axis=0, ddof=1) / math.sqrt(batches)


def spread_histogram(trace: Trace, weighting: str = "time") -> np.ndarray:
    """Frequencies of spread 1..N+1; ``time`` weights each state by its holding time."""
    N = trace.params.N
    spreads = np.concatenate(([trace.spread0], trace.spreads))[:-1]
    if weighting == "time":
        w = np.diff(np.concatenate(([0.0], trace.times)))
    elif weighting == "event":
        w = np.ones(len(spreads))
    else:
        raise ValueError("weighting must be 'time' or 'event'")
    hist = np.bincount(spreads - 1, weights=w, minlength=N + 1)[:N + 1]
    return hist / hist.sum()


def stationary_estimators(trace: Trace, weighting: str = "time") -> StationaryEstimates:
    """Mean depth per level (shares) and spread frequencies after burn-in.

    Snapshots are weighted by how long the book stayed in them.
    """
    if len(trace) < 2:
        raise ValueError("trace too short")
    N, q = trace.params.N, trace.params.q
    spread = spread_histogram(trace, weighting)
    snaps = trace.snapshots
    if len(snaps) == 0:
        nan = np.full(N, np.nan)
        return StationaryEstimates(nan, nan, nan, nan, spread)
    idx = np.arange(len(snaps)) * trace.stride
    keep = idx + 1 < len(trace)
    snaps, idx = snaps[keep], idx[keep]
    if weighting == "time":
        w = trace.times[idx + 1] - trace.times[idx]
    else:
        w = np.ones(len(idx))
    vol = snaps[:, 1:].astype(float) * q
    mean = (vol * w[:, None]).sum(0) / w.sum()
    se = _batch_se(vol, w)
    return StationaryEstimates(mean[:N], mean[N:], se[:N], se[N:], spread)


def normality_diagnostics(etas: np.ndarray, aggregation: int = 1) -> tuple[float, float]:
    """Skewness and excess kurtosis of sums over disjoint blocks of ``aggregation`` increments."""
    if aggregation < 1:
        raise ValueError("aggregation must be >= 1")
    x = np.asarray(etas, dtype=float)
    b = len(x) // aggregation
    sums = x[:b * aggregation].reshape(b, aggregation).sum(axis=1)
    return float(sps.skew(sums)), float(sps.kurtosis(sums))


def physical_price_path(trace: Trace, times: np.ndarray) -> np.ndarray:
    """Mid (half ticks) at the given model times."""
    k = np.searchsorted(trace.times, times, side="right")
    return trace.mid_path[k]


def mean_event_rate(trace: Trace) -> float:
    """Recorded events per unit model time."""
    if len(trace) == 0 or trace.times[-1] <= 0:
        raise ValueError("trace has no events")
    return len(trace) / float(trace.times[-1])


def physical_time_variance(trace: Trace, grid: Sequence[float] | None = None,
                           min_windows: int = 30) -> ScalingFit:
    """Variance growth of the price in model time (half-ticks^2 per unit time).

    Only defined for constant cancellation rates. The slope should be the
    long-run event rate times the event-time slope; that rate equals the
    nominal rate except for the time market orders are switched off by an
    empty side. The default grid is the event-time default divided by the
    observed event rate.
    """
    params = trace.params
    if params.proportional:
        raise ValueError("physical-time scaling needs constant cancellation rates")
    if grid is None:
        grid = np.asarray(DEFAULT_GRID, dtype=float) / mean_event_rate(trace)
    grid = np.asarray(sorted(grid), dtype=float)
    horizon = trace.times[-1]
    if horizon / grid[-1] < min_windows:
        raise ValueError(f"only {horizon / grid[-1]:.0f} windows of length {grid[-1]}; need {min_windows}")
    var = np.empty(len(grid))
    win = np.empty(len(grid), dtype=np.int64)
    for j, tau in enumerate(grid):
        ts = np.arange(0.0, horizon, tau)
        d = np.diff(physical_price_path(trace, ts).astype(float))
        var[j] = d.var(ddof=1)
        win[j] = len(d)
    slope, intercept, r2 = _weighted_line(grid, var, win / grid ** 2)
    return ScalingFit(slope, intercept, r2, grid, var, win)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    p, q = np.asarray(p, float), np.asarray(q, float)
    size = max(len(p), len(q))
    p = np.pad(p, (0, size - len(p)))
    q = np.pad(q, (0, size - len(q)))
    return 0.5 * float(np.abs(p - q).sum())


@dataclass
class StatsReport:
    depth_ask: np.ndarray
    depth_bid: np.ndarray
    spread_hist: np.ndarray
    autocov: np.ndarray
    sigma2_series: float
    cutoff_lag: int
    sigma2_batch: float
    scaling: ScalingFit
    skewness: dict
    excess_kurtosis: dict
    mixing: MixingFit
    increment_values: np.ndarray
    increment_freq: np.ndarray
    physical: ScalingFit | None = None
    nominal_rate: float | None = None
    event_rate: float | None = None

    def summary(self) -> dict:
        out = {
            "sigma2_series_half_ticks2_per_event": self.sigma2_series,
            "sigma2_cutoff_lag_events": self.cutoff_lag,
            "sigma2_batch_half_ticks2_per_event": self.sigma2_batch,
            "variance_slope_half_ticks2_per_event": self.scaling.slope,
            "variance_intercept_half_ticks2": self.scaling.intercept,
            "variance_r2": self.scaling.r2,
            "mixing_rate_per_event": self.mixing.rho,
            "mixing_fit_r2": self.mixing.r2,
            "mixing_fit_lags": self.mixing.lags,
            "gamma0_half_ticks2": float(self.autocov[0]),
            "skewness": {str(k): v for k, v in self.skewness.items()},
            "excess_kurtosis": {str(k): v for k, v in self.excess_kurtosis.items()},
        }
        if self.physical is not None:
            out["physical_time_sigma2_half_ticks2_per_time"] = self.physical.slope
            out["physical_time_r2"] = self.physical.r2
            out["nominal_event_rate_per_time"] = self.nominal_rate
            out["observed_event_rate_per_time"] = self.event_rate
        return out


def compute_report(trace: Trace, max_lag: int = 200, rule: CutoffRule = CutoffRule(),
                   grid: Sequence[int] = DEFAULT_GRID, aggregation: Sequence[int] = (1, 100),
                   batch_size: int | None = None) -> StatsReport:
    """All estimators for one trace."""
    if len(trace) == 0:
        raise ValueError("trace has no events after burn-in")
    eta = increments(trace)
    n = len(eta)
    max_lag = min(max_lag, n // 50)
    g = autocovariance(eta, max_lag)
    s2 = asymptotic_variance(g, n, rule)
    st = stationary_estimators(trace)
    values, counts = np.unique(eta, return_counts=True)
    phys = rate = nominal = None
    if not trace.params.proportional:
        rate = mean_event_rate(trace)
        nominal = trace.params.nominal_rate
        phys = physical_time_variance(trace, np.asarray(grid, float) / rate)
    return StatsReport(
        depth_ask=st.ask_depth, depth_bid=st.bid_depth, spread_hist=st.spread_hist, autocov=g,
        sigma2_series=s2.sigma2, cutoff_lag=s2.lag, sigma2_batch=batch_means(eta, batch_size),
        scaling=variance_scaling(trace, grid),
        skewness={w: normality_diagnostics(eta, w)[0] for w in aggregation},
        excess_kurtosis={w: normality_diagnostics(eta, w)[1] for w in aggregation},
        mixing=mixing_rate(g, n, rule.threshold), increment_values=values,
        increment_freq=counts / n, physical=phys, nominal_rate=nominal,
        event_rate=rate)
