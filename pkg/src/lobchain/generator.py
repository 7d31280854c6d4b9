"""Generator and drift computations on single states, stability checks,
and an exact stationary law for small truncated books."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .book import (BookState, Kind, ModelParams, enumerate_transitions, event_rates,
                   inverse_depth)
from .flow import simulate, total_rate


def apply_generator(f: Callable[[BookState], float], state: BookState, params: ModelParams) -> float:
    """Exact generator value: sum over transitions of rate * (f(x') - f(x))."""
    fx = f(state)
    return math.fsum(t.rate * (f(t.state) - fx) for t in enumerate_transitions(state, params))


def lyapunov_linear(state: BookState, params: ModelParams) -> float:
    """Total shares in the book plus one order size."""
    return float(params.q * (state.total_orders + 1))


def lyapunov_exp(state: BookState, z: float, q: int = 1) -> float:
    if not z > 1:
        raise ValueError("z must be > 1")
    return float(z) ** (q * state.total_orders)


def state_digest(state: BookState) -> str:
    key = ",".join(map(str, state.ask)) + "|" + ",".join(map(str, state.bid))
    return hashlib.sha1(key.encode()).hexdigest()[:12]


@dataclass
class DriftReport:
    kind: str
    states: list[BookState]
    phi: np.ndarray
    V: np.ndarray
    drift: np.ndarray
    beta: float
    gamma: float
    threshold: float
    sublevel_size: int
    passed: bool
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> np.ndarray:
        return self.drift / self.V

    def holds(self) -> bool:
        """The recorded inequality at every sampled state."""
        if self.kind == "continuous":
            bound = -self.beta * self.V + self.gamma
        else:
            bound = -self.beta * self.V + self.gamma * (self.phi <= self.threshold)
        return bool(np.all(self.drift <= bound + 1e-9 * np.abs(bound)))

    def summary(self) -> dict:
        return {"kind": self.kind, "beta": self.beta, "gamma": self.gamma,
                "threshold_shares": self.threshold, "sublevel_size": self.sublevel_size,
                "n_states": len(self.states), "verdict": "pass" if self.passed else "fail",
                **self.extra}

    def write_csv(self, path: str | Path):
        label = "LV" if self.kind == "continuous" else "DV"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state_digest", "phi_shares", "V", label, f"{label}_over_V"])
            for s, p, v, d in zip(self.states, self.phi.tolist(), self.V.tolist(), self.drift.tolist()):
                w.writerow([state_digest(s), p, repr(v), repr(d), repr(d / v)])

    def write_json(self, path: str | Path):
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def _require_proportional(params: ModelParams):
    if not params.proportional:
        raise ValueError("constant cancellation mode: use stability_condition instead")


def _fit_threshold(phi, ratio, beta):
    bad = ratio > -beta
    threshold = float(phi[bad].max()) if bad.any() else 0.0
    above = int(np.sum(phi > threshold))
    return threshold, above


def drift_check_continuous(params: ModelParams, states: Sequence[BookState]) -> DriftReport:
    """Check LV <= -beta V + gamma for the linear test function.

    beta is fixed at half the smallest cancel rate; gamma is the least value
    that makes the inequality hold on the sample. The verdict also requires
    LV/V <= -beta on every sampled state above some sublevel threshold, with
    at least one sampled state above it.
    """
    _require_proportional(params)
    states = list(states)
    beta = params.min_cancel / 2
    V = np.array([lyapunov_linear(s, params) for s in states])
    LV = np.array([apply_generator(lambda x: lyapunov_linear(x, params), s, params) for s in states])
    phi = np.array([params.q * s.total_orders for s in states], dtype=float)
    gamma = max(0.0, float(np.max(LV + beta * V)))
    threshold, above = _fit_threshold(phi, LV / V, beta)
    sub = int(np.sum(phi <= threshold))
    return DriftReport("continuous", states, phi, V, LV, beta, gamma, threshold, sub,
                       passed=bool(np.isfinite(gamma) and above > 0))


def embedded_drift_ratio(state: BookState, params: ModelParams, z: float) -> float:
    """DV(x)/V(x) for V = z^phi under the jump chain, computed without overflow."""
    lam = total_rate(state, params)
    if lam <= 0:
        raise ValueError("total event rate is zero")
    phi = state.total_orders
    return math.fsum(t.rate / lam * (z ** (params.q * (t.state.total_orders - phi)) - 1.0)
                     for t in enumerate_transitions(state, params))


def drift_check_embedded(params: ModelParams, z: float, states: Sequence[BookState]) -> DriftReport:
    """Check DV <= -beta V + gamma 1_C for V = z^phi on the jump chain.

    beta = min_cancel (1 - z^-q) / (2 max_cancel). The sublevel set C is
    {phi <= A} with A the largest sampled phi where DV/V > -beta.
    """
    if not z > 1:
        raise ValueError("z must be > 1")
    _require_proportional(params)
    states = list(states)
    q = params.q
    beta = params.min_cancel * (1 - z ** -q) / (2 * params.max_cancel)
    ratio = np.array([embedded_drift_ratio(s, params, z) for s in states])
    phi = np.array([q * s.total_orders for s in states], dtype=float)
    with np.errstate(over="ignore"):
        V = np.power(float(z), phi)
    DV = ratio * V
    threshold, above = _fit_threshold(phi, ratio, beta)
    inside = phi <= threshold
    gamma = max(0.0, float(np.max((DV + beta * V)[inside]))) if inside.any() else 0.0
    limit = params.min_cancel * (z ** -q - 1) / params.max_cancel
    return DriftReport("embedded", states, phi, V, DV, beta, gamma, threshold, int(inside.sum()),
                       passed=bool(np.isfinite(gamma) and above > 0),
                       extra={"z": z, "limit_ratio": limit})


@dataclass(frozen=True)
class StabilityResult:
    holds: bool
    margin: float
    lhs: float
    rhs: float
    symmetric_margin: float | None
    exact_margin: Fraction = Fraction(0)

    def to_dict(self) -> dict:
        return {"holds": self.holds, "margin": self.margin, "margin_exact": str(self.exact_margin),
                "lhs": self.lhs, "rhs": self.rhs, "symmetric_margin": self.symmetric_margin}


def _exact(x) -> Fraction:
    return Fraction(repr(float(x)))


def stability_condition(params: ModelParams) -> StabilityResult:
    """Sufficient ergodicity condition for constant cancellation rates.

    markets + total cancels > total limits * (1 + N d_inf / q), evaluated in
    exact rational arithmetic on the decimal rate values. For flat symmetric
    rates with q = 1 the per-side form lambda_M + N lambda_C - N lambda_L
    (1 + N d_inf) is reported too (it is half the margin).
    """
    if params.proportional:
        raise ValueError("proportional cancellation: ergodic whenever every cancel rate is > 0")
    N, q = params.N, params.q
    lhs = (_exact(params.rate_market_buy) + _exact(params.rate_market_sell)
           + sum(map(_exact, params.rate_cancel_ask + params.rate_cancel_bid)))
    limits = sum(map(_exact, params.rate_limit_ask + params.rate_limit_bid))
    rhs = limits * (1 + Fraction(N * params.d_inf, q))
    sym = None
    flat = (len(set(params.rate_limit_ask + params.rate_limit_bid)) == 1
            and len(set(params.rate_cancel_ask + params.rate_cancel_bid)) == 1
            and params.rate_market_buy == params.rate_market_sell)
    if flat and q == 1:
        lm, lc, ll = (_exact(params.rate_market_buy), _exact(params.rate_cancel_ask[0]),
                      _exact(params.rate_limit_ask[0]))
        sym = float(lm + N * lc - N * ll * (1 + N * params.d_inf))
    margin = lhs - rhs
    return StabilityResult(margin > 0, float(margin), float(lhs), float(rhs), sym, margin)


def conditional_drifts(state: BookState, params: ModelParams) -> tuple[float, float]:
    """Instantaneous expected drift of (mid, spread), in price units per unit time.

    Closed form in terms of the inverse depth profile; the spread drift uses
    the bid-side inverse for bid limit orders (equal to the ask-side value
    whenever the state is consistent).
    """
    N, q = params.N, params.q
    i_a = inverse_depth(state, params, "ask", 0)
    i_b = inverse_depth(state, params, "bid", 0)
    gap_a = inverse_depth(state, params, "ask", q) - i_a
    gap_b = inverse_depth(state, params, "bid", q) - i_b
    m_buy = params.rate_market_buy if i_a <= N else 0.0
    m_sell = params.rate_market_sell if i_b <= N else 0.0
    in_a = sum(max(i_a - i, 0) * lam for i, lam in enumerate(params.rate_limit_ask, 1))
    in_b = sum(max(i_b - i, 0) * lam for i, lam in enumerate(params.rate_limit_bid, 1))
    c_a = c_b = 0.0
    if i_a <= N:
        c_a = params.rate_cancel_ask[i_a - 1] * (state.ask[i_a - 1] if params.proportional else 1)
    if i_b <= N:
        c_b = params.rate_cancel_bid[i_b - 1] * (state.bid[i_b - 1] if params.proportional else 1)
    dp = params.tick / 2 * (gap_a * m_buy - gap_b * m_sell - in_a + in_b + gap_a * c_a - gap_b * c_b)
    ds = params.tick * (gap_a * m_buy + gap_b * m_sell - in_a - in_b + gap_a * c_a + gap_b * c_b)
    return dp, ds


def enumerated_drifts(state: BookState, params: ModelParams) -> tuple[float, float, float]:
    """Reference drifts from explicit transitions: (dP, dS, scale).

    ``scale`` is the sum of absolute contributions, for relative comparisons.
    """
    mid, spr = state.mid_half, state.spread
    terms_p = [t.rate * (t.state.mid_half - mid) for t in enumerate_transitions(state, params)]
    terms_s = [t.rate * (t.state.spread - spr) for t in enumerate_transitions(state, params)]
    scale = math.fsum(map(abs, terms_p)) * params.tick / 2 + math.fsum(map(abs, terms_s)) * params.tick
    return (params.tick / 2 * math.fsum(terms_p), params.tick * math.fsum(terms_s), scale)


# -- state samples -----------------------------------------------------------

def random_states(params: ModelParams, rng: np.random.Generator, n: int,
                  max_count: int = 10) -> list[BookState]:
    """Consistent states with uniform spread and queue counts up to ``max_count``."""
    N = params.N
    out = []
    for _ in range(n):
        spread = int(rng.integers(1, N + 2))
        ask = rng.integers(0, max_count + 1, N)
        bid = rng.integers(0, max_count + 1, N)
        ask[:spread - 1] = 0
        bid[:spread - 1] = 0
        if spread <= N:
            ask[spread - 1] = max(ask[spread - 1], 1)
            bid[spread - 1] = max(bid[spread - 1], 1)
        out.append(BookState(tuple(ask), tuple(bid), int(rng.integers(-50, 51))))
    return out


def large_states(params: ModelParams, rng: np.random.Generator, n: int,
                 phi_max: int) -> list[BookState]:
    """Consistent states with total volume spread log-uniformly up to ``phi_max`` shares."""
    N, q = params.N, params.q
    out = []
    for total in np.geomspace(10 * N, phi_max // q, n).astype(int):
        spread = int(rng.integers(1, N + 2)) if total < 2 * N else int(rng.integers(1, N + 1))
        levels = np.arange(spread, N + 1)
        weights = rng.dirichlet(np.ones(2 * len(levels)))
        counts = np.floor(weights * total).astype(int)
        ask = np.zeros(N, int)
        bid = np.zeros(N, int)
        ask[levels - 1] = counts[:len(levels)]
        bid[levels - 1] = counts[len(levels):]
        ask[spread - 1] = max(ask[spread - 1], 1)
        bid[spread - 1] = max(bid[spread - 1], 1)
        out.append(BookState(tuple(ask), tuple(bid)))
    return out


def sampled_states(params: ModelParams, seed: int, n: int, burn_in: int = 10_000,
                   stride: int = 7) -> list[BookState]:
    """``n`` states visited by a simulated path (one every ``stride`` events)."""
    tr = simulate(params, seed, n * stride, burn_in=burn_in, snapshot_stride=stride)
    return tr.snapshot_states()[:n]


# -- truncated stationary oracle --------------------------------------------

@dataclass
class StationaryResult:
    params: ModelParams
    cap: int
    states: list[BookState]
    probs: np.ndarray
    boundary_mass: float

    def spread_marginal(self) -> np.ndarray:
        """Probabilities of spread 1..N+1 (index 0 is spread 1)."""
        out = np.zeros(self.params.N + 1)
        for s, p in zip(self.states, self.probs):
            out[s.spread - 1] += p
        return out

    def level_marginal(self, side: str, level: int) -> np.ndarray:
        out = np.zeros(self.cap + 1)
        for s, p in zip(self.states, self.probs):
            out[(s.ask if side == "ask" else s.bid)[level - 1]] += p
        return out

    def write_csv(self, path: str | Path):
        N = self.params.N
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state_digest"] + [f"ask_{i}_orders" for i in range(1, N + 1)]
                       + [f"bid_{i}_orders" for i in range(1, N + 1)] + ["spread_ticks", "probability"])
            for s, p in zip(self.states, self.probs.tolist()):
                w.writerow([state_digest(s), *s.ask, *s.bid, s.spread, repr(p)])


def solve_stationary(Q: sp.spmatrix) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 for an irreducible generator matrix."""
    n = Q.shape[0]
    A = sp.lil_matrix(Q.T)
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[n - 1] = 1.0
    pi = spla.spsolve(sp.csc_matrix(A), b)
    if not np.all(np.isfinite(pi)):
        raise RuntimeError("stationary solve failed")
    if pi.min() < -1e-9:
        raise RuntimeError(f"stationary solve produced negative mass {pi.min():.3g}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def truncated_stationary(params: ModelParams, cap: int, max_states: int = 10**6) -> StationaryResult:
    """Exact stationary law of the book with every queue capped at ``cap`` orders.

    The state space is everything reachable from the full book; limit orders
    that would push a queue above the cap are dropped. Meant for N <= 3.
    ``boundary_mass`` is the probability of states with some queue at the cap.
    """
    N = params.N
    ca, cb = params.boundary_counts
    if max(ca, cb) > cap:
        raise ValueError("boundary volume exceeds the cap")
    if (cap + 1) ** (2 * N) > max_states:
        raise ValueError(f"state space up to {(cap + 1) ** (2 * N)} states exceeds {max_states}")
    start = BookState.full(params)
    index = {start: 0}
    order = [start]
    rows, cols, vals = [], [], []
    queue = deque([start])
    while queue:
        x = queue.popleft()
        i = index[x]
        for t in enumerate_transitions(x, params):
            y = BookState(t.state.ask, t.state.bid, 0)
            if max(y.ask + y.bid) > cap:
                continue
            j = index.get(y)
            if j is None:
                j = index[y] = len(order)
                order.append(y)
                queue.append(y)
            rows.append(i)
            cols.append(j)
            vals.append(t.rate)
    n = len(order)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    Q = Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())
    pi = solve_stationary(Q)
    at_cap = np.array([max(s.ask + s.bid) == cap for s in order])
    return StationaryResult(params, cap, order, pi, float(pi[at_cap].sum()))


def level_queue_stationary(params: ModelParams, side: str, level: int, cap: int) -> np.ndarray:
    """Stationary law of one queue in isolation (arrivals and cancels only, no shifts).

    With proportional cancels this is a truncated Poisson law.
    """
    lam_l = (params.rate_limit_ask if side == "ask" else params.rate_limit_bid)[level - 1]
    lam_c = (params.rate_cancel_ask if side == "ask" else params.rate_cancel_bid)[level - 1]
    k = np.arange(cap + 1)
    up = np.full(cap, lam_l)
    down = lam_c * (k[1:] if params.proportional else np.ones(cap))
    Q = sp.diags([up, down], [1, -1], shape=(cap + 1, cap + 1)).tocsr()
    Q = Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())
    return solve_stationary(Q)
