"""Constant-spread ("perfect market making") price model.

Market orders arrive as two Poisson streams; after each one the price moves
one tick in the order's direction with probability ``u`` and stays put
otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class ToyParams:
    lam_plus: float = 1.0
    lam_minus: float = 1.0
    u: float = 1.0
    tick: float = 1.0
    seed: int = 0
    n_events: int = 100_000

    def __post_init__(self):
        if self.lam_plus < 0 or self.lam_minus < 0:
            raise ValueError("market-order intensities must be non-negative")
        if not 0.0 <= self.u <= 1.0:
            raise ValueError("u must lie in [0, 1]")
        if not self.tick > 0:
            raise ValueError("tick must be positive")

    @property
    def rate(self) -> float:
        return self.lam_plus + self.lam_minus


class ToyPath(NamedTuple):
    times: np.ndarray   # event times
    moves: np.ndarray   # -1, 0 or +1 ticks at each event
    prices: np.ndarray  # price after each event, starting value prepended

    def price_at(self, t) -> np.ndarray:
        return self.prices[np.searchsorted(self.times, t, side="right")]


def _draw(params: ToyParams, rng: np.random.Generator, n: int):
    dt = rng.exponential(1.0 / params.rate, n)
    side = np.where(rng.random(n) < params.lam_plus / params.rate, 1, -1)
    z = rng.random(n) < params.u
    return dt, (side * z).astype(np.int8)


def simulate_toy(params: ToyParams, horizon: float | None = None,
                 rng: np.random.Generator | None = None, p0: float = 0.0) -> ToyPath:
    """Event-driven path: ``params.n_events`` events, or every event up to ``horizon``."""
    if not params.rate > 0:
        raise ValueError("need lam_plus + lam_minus > 0")
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    if horizon is None:
        dt, moves = _draw(params, rng, params.n_events)
        times = np.cumsum(dt)
    else:
        chunk = int(params.rate * horizon + 6 * math.sqrt(params.rate * horizon) + 16)
        ts, ms, t_end = [], [], 0.0
        while t_end <= horizon:
            dt, mv = _draw(params, rng, chunk)
            t = t_end + np.cumsum(dt)
            ts.append(t)
            ms.append(mv)
            t_end = t[-1]
        times = np.concatenate(ts)
        moves = np.concatenate(ms)
        keep = times <= horizon
        times, moves = times[keep], moves[keep]
    prices = p0 + params.tick * np.concatenate(([0], np.cumsum(moves, dtype=np.int64)))
    return ToyPath(times, moves, prices)


def theoretical_moments(params: ToyParams) -> tuple[float, float]:
    """Drift and volatility of the diffusive limit, per unit time."""
    mu = params.tick * (params.lam_plus - params.lam_minus) * params.u
    sigma = params.tick * math.sqrt((params.lam_plus + params.lam_minus) * params.u)
    return mu, sigma


def toy_generator(f: Callable[[float], float], p: float, params: ToyParams) -> float:
    d = params.tick
    return params.u * (params.lam_plus * (f(p + d) - f(p)) + params.lam_minus * (f(p - d) - f(p)))


def short_time_prices(params: ToyParams, p0: float, horizon: float, copies: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Price after ``horizon`` for independent copies, via Poisson thinning of each stream."""
    up = rng.poisson(params.lam_plus * params.u * horizon, copies)
    down = rng.poisson(params.lam_minus * params.u * horizon, copies)
    return p0 + params.tick * (up - down)


def empirical_moments(path: ToyPath, horizon: float | None = None) -> tuple[float, float]:
    """Drift and quadratic-variation rate per unit time.

    The observation window defaults to the time of the last event; pass the
    simulation horizon for paths generated with one.
    """
    T = horizon if horizon is not None else path.times[-1]
    dp = np.diff(path.prices)
    return float((path.prices[-1] - path.prices[0]) / T), float(np.sum(dp * dp) / T)


@dataclass
class FcltReport:
    n: int
    replicas: int
    t: tuple
    mean: np.ndarray
    var: np.ndarray
    mean_se: np.ndarray
    increment_corr: float
    corr_se: float

    def summary(self) -> dict:
        return {"n": self.n, "replicas": self.replicas, "t": list(self.t),
                "mean": self.mean.tolist(), "var": self.var.tolist(),
                "mean_se": self.mean_se.tolist(), "increment_corr": self.increment_corr,
                "increment_corr_se": self.corr_se}


def fclt_check(params: ToyParams, n: int, replicas: int, t: Sequence[float] = (0.25, 0.5, 1.0),
               rng: np.random.Generator | None = None) -> FcltReport:
    """Moments across replicas of (P(nt) - n mu t) / (sqrt(n) sigma).

    Also reports the correlation of the increments over [0, t_mid] and
    [t_mid, t_max], where t_mid is the middle entry of ``t``.
    """
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    mu, sigma = theoretical_moments(params)
    t = tuple(sorted(t))
    if sigma <= 0:
        raise ValueError("degenerate model: sigma = 0")
    x = np.empty((replicas, len(t)))
    for r in range(replicas):
        path = simulate_toy(params, horizon=n * t[-1], rng=rng)
        x[r] = path.price_at(np.array(t) * n)
    x = (x - n * mu * np.array(t)) / (math.sqrt(n) * sigma)
    mid = len(t) // 2
    first, second = x[:, mid], x[:, -1] - x[:, mid]
    corr = float(np.corrcoef(first, second)[0, 1])
    return FcltReport(n, replicas, t, x.mean(0), x.var(0, ddof=1),
                      x.std(0, ddof=1) / math.sqrt(replicas), corr, 1 / math.sqrt(replicas))
