"""Order-book state machine in the moving frame.

Ask levels are counted in ticks above the best bid and bid levels in ticks
below the best ask, so the first occupied level on either side is the spread.
Bid volumes are stored as non-negative magnitudes.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Literal, NamedTuple, Sequence

import numpy as np

from . import _kernel

Side = Literal["ask", "bid"]
CANCEL_MODES = ("proportional", "constant")


def _rate_vector(name: str, value, n: int) -> tuple[float, ...]:
    if np.isscalar(value):
        value = [value] * n
    out = tuple(float(v) for v in value)
    if len(out) != n:
        raise ValueError(f"{name}: expected {n} rates, got {len(out)}")
    if any(not np.isfinite(v) or v < 0 for v in out):
        raise ValueError(f"{name}: rates must be finite and non-negative")
    return out


@dataclass(frozen=True)
class ModelParams:
    """Poisson order-flow intensities and frame geometry.

    Volumes (``q``, ``boundary_ask``, ``boundary_bid``) are in shares;
    boundary volumes must be multiples of ``q``. In ``proportional`` mode the
    cancel rates are per resting order, in ``constant`` mode per level.
    """

    N: int
    q: int = 1
    tick: float = 1.0
    rate_market_buy: float = 1.0
    rate_market_sell: float = 1.0
    rate_limit_ask: Sequence[float] | float = 1.0
    rate_limit_bid: Sequence[float] | float = 1.0
    rate_cancel_ask: Sequence[float] | float = 1.0
    rate_cancel_bid: Sequence[float] | float = 1.0
    boundary_ask: int = 1
    boundary_bid: int = 1
    cancel_mode: str = "proportional"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N: frame size must be an integer >= 1")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("q: order size must be a positive integer")
        if not self.tick > 0:
            raise ValueError("tick: must be positive")
        for name in ("rate_market_buy", "rate_market_sell"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name}: rate must be finite and non-negative")
            object.__setattr__(self, name, float(v))
        for name in ("rate_limit_ask", "rate_limit_bid", "rate_cancel_ask", "rate_cancel_bid"):
            object.__setattr__(self, name, _rate_vector(name, getattr(self, name), self.N))
        for name in ("boundary_ask", "boundary_bid"):
            v = getattr(self, name)
            if int(v) != v or v <= 0 or v % self.q:
                raise ValueError(f"{name}: must be a positive multiple of q={self.q}")
            object.__setattr__(self, name, int(v))
        if self.cancel_mode not in CANCEL_MODES:
            raise ValueError(f"cancel_mode: must be one of {CANCEL_MODES}")
        if self.proportional and self.min_cancel <= 0:
            raise ValueError("rate_cancel_ask/rate_cancel_bid: proportional mode needs every cancel rate > 0")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "q", int(self.q))

    @classmethod
    def uniform(cls, N: int, market=1.0, limit=1.0, cancel=1.0, **kw) -> "ModelParams":
        return cls(N=N, rate_market_buy=market, rate_market_sell=market,
                   rate_limit_ask=limit, rate_limit_bid=limit,
                   rate_cancel_ask=cancel, rate_cancel_bid=cancel, **kw)

    @property
    def proportional(self) -> bool:
        return self.cancel_mode == "proportional"

    @property
    def d_inf(self) -> int:
        return max(self.boundary_ask, self.boundary_bid)

    @property
    def min_cancel(self) -> float:
        return min(self.rate_cancel_ask + self.rate_cancel_bid)

    @property
    def max_cancel(self) -> float:
        return max(self.rate_cancel_ask + self.rate_cancel_bid)

    @property
    def n_events(self) -> int:
        return 4 * self.N + 2

    @cached_property
    def base_rates(self) -> np.ndarray:
        """Rates in event-code order (see ``Event.code``)."""
        v = np.array([self.rate_market_buy, self.rate_market_sell, *self.rate_limit_ask,
                      *self.rate_limit_bid, *self.rate_cancel_ask, *self.rate_cancel_bid])
        v.flags.writeable = False
        return v

    @property
    def nominal_rate(self) -> float:
        """Sum of all base intensities: the total event rate in constant
        cancellation mode whenever both sides hold orders in the frame."""
        return math.fsum(self.base_rates)

    @property
    def boundary_counts(self) -> tuple[int, int]:
        return self.boundary_ask // self.q, self.boundary_bid // self.q

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class Kind(enum.IntEnum):
    MARKET_BUY = 0
    MARKET_SELL = 1
    LIMIT_ASK = 2
    LIMIT_BID = 3
    CANCEL_ASK = 4
    CANCEL_BID = 5


class Event(NamedTuple):
    kind: Kind
    level: int = 0

    def code(self, N: int) -> int:
        if self.kind <= Kind.MARKET_SELL:
            return int(self.kind)
        if not 1 <= self.level <= N:
            raise ValueError(f"level {self.level} outside 1..{N}")
        return 2 + (self.kind - 2) * N + self.level - 1

    @classmethod
    def from_code(cls, code: int, N: int) -> "Event":
        code = int(code)
        if not 0 <= code < 4 * N + 2:
            raise ValueError(f"event code {code} outside 0..{4 * N + 1}")
        if code < 2:
            return cls(Kind(code))
        kind, level = divmod(code - 2, N)
        return cls(Kind(kind + 2), level + 1)

    def __str__(self):
        tag = ("M+", "M-", "L+", "L-", "C+", "C-")[self.kind]
        return tag if self.kind < 2 else f"{tag}{self.level}"


def MarketBuy() -> Event:
    return Event(Kind.MARKET_BUY)


def MarketSell() -> Event:
    return Event(Kind.MARKET_SELL)


def LimitAsk(i: int) -> Event:
    return Event(Kind.LIMIT_ASK, i)


def LimitBid(i: int) -> Event:
    return Event(Kind.LIMIT_BID, i)


def CancelAsk(i: int) -> Event:
    return Event(Kind.CANCEL_ASK, i)


def CancelBid(i: int) -> Event:
    return Event(Kind.CANCEL_BID, i)


def all_events(N: int) -> list[Event]:
    return [Event.from_code(c, N) for c in range(4 * N + 2)]


@dataclass(frozen=True)
class BookState:
    ask: tuple[int, ...]
    bid: tuple[int, ...]
    ask_price: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ask", tuple(int(x) for x in self.ask))
        object.__setattr__(self, "bid", tuple(int(x) for x in self.bid))
        object.__setattr__(self, "ask_price", int(self.ask_price))
        if len(self.ask) != len(self.bid):
            raise ValueError("ask and bid frames must have the same length")
        if min(self.ask + self.bid, default=0) < 0:
            raise ValueError("queue counts must be non-negative")

    @classmethod
    def full(cls, params: ModelParams, ask_price: int = 0) -> "BookState":
        """Every level at its boundary volume; spread one tick."""
        ca, cb = params.boundary_counts
        return cls((ca,) * params.N, (cb,) * params.N, ask_price)

    @classmethod
    def from_array(cls, s) -> "BookState":
        n = (len(s) - 1) // 2
        return cls(tuple(s[1:n + 1]), tuple(s[n + 1:]), int(s[0]))

    def to_array(self) -> np.ndarray:
        return np.array((self.ask_price, *self.ask, *self.bid), dtype=np.int64)

    @property
    def N(self) -> int:
        return len(self.ask)

    @property
    def spread(self) -> int:
        """Spread in ticks, i.e. the first occupied ask level (N+1 if none)."""
        return next((i for i, x in enumerate(self.ask, 1) if x > 0), self.N + 1)

    @property
    def bid_spread(self) -> int:
        return next((i for i, x in enumerate(self.bid, 1) if x > 0), self.N + 1)

    @property
    def bid_price(self) -> int:
        return self.ask_price - self.spread

    @property
    def mid_half(self) -> int:
        """Mid-price in half ticks."""
        return 2 * self.ask_price - self.spread

    @property
    def total_orders(self) -> int:
        return sum(self.ask) + sum(self.bid)

    def is_consistent(self) -> bool:
        return self.spread == self.bid_spread

    def mirror(self) -> "BookState":
        """Swap sides (the ask anchor is not meaningful after mirroring)."""
        return BookState(self.bid, self.ask, -self.ask_price)

    def signed_bid(self) -> tuple[int, ...]:
        return tuple(-x for x in self.bid)


class Impact(NamedTuple):
    d_mid_half: int
    d_spread: int


class Transition(NamedTuple):
    event: Event
    rate: float
    state: BookState
    impact: Impact


def _side_shares(state: BookState, params: ModelParams, side: Side) -> tuple[tuple[int, ...], int]:
    if side == "ask":
        return state.ask, params.boundary_ask
    if side == "bid":
        return state.bid, params.boundary_bid
    raise ValueError(f"side must be 'ask' or 'bid', got {side!r}")


def depth(state: BookState, params: ModelParams, side: Side, i: int) -> int:
    """Cumulative shares on ``side`` within ``i`` ticks, boundary included past N."""
    counts, boundary = _side_shares(state, params, side)
    if i < 0:
        raise ValueError("level must be >= 0")
    inside = sum(counts[:i]) * params.q
    return inside + max(i - params.N, 0) * boundary


def inverse_depth(state: BookState, params: ModelParams, side: Side, qty: int) -> int:
    """Smallest level p with depth(p) > qty."""
    if qty < 0:
        raise ValueError("quantity must be >= 0")
    counts, boundary = _side_shares(state, params, side)
    acc = 0
    for p, c in enumerate(counts, 1):
        acc += c * params.q
        if acc > qty:
            return p
    return params.N + (qty - acc) // boundary + 1


def _check_shape(state: BookState, params: ModelParams):
    if state.N != params.N:
        raise ValueError(f"state has {state.N} levels, params expect {params.N}")


def apply_event(state: BookState, params: ModelParams, event: Event) -> BookState:
    """State after ``event``; cancels at empty levels return the state unchanged."""
    _check_shape(state, params)
    s = state.to_array()
    ca, cb = params.boundary_counts
    status = _kernel.apply_inplace(s, event.code(params.N), params.N, ca, cb)
    if status == _kernel.REJECTED:
        raise ValueError(f"{event}: market order against an empty in-frame side")
    if status == _kernel.NOOP:
        return state
    return BookState.from_array(s)


def price_impact(state: BookState, params: ModelParams, event: Event) -> Impact:
    """Mid (half ticks) and spread (ticks) change read off the depth profile."""
    _check_shape(state, params)
    q = params.q
    kind, i = event
    ask_gap = inverse_depth(state, params, "ask", q) - inverse_depth(state, params, "ask", 0)
    bid_gap = inverse_depth(state, params, "bid", q) - inverse_depth(state, params, "bid", 0)
    if kind == Kind.MARKET_BUY:
        if not any(state.ask):
            raise ValueError("market buy against an empty in-frame ask side")
        return Impact(ask_gap, ask_gap)
    if kind == Kind.MARKET_SELL:
        if not any(state.bid):
            raise ValueError("market sell against an empty in-frame bid side")
        return Impact(-bid_gap, bid_gap)
    event.code(params.N)
    if kind == Kind.LIMIT_ASK:
        m = max(inverse_depth(state, params, "ask", 0) - i, 0)
        return Impact(-m, -m)
    if kind == Kind.LIMIT_BID:
        m = max(inverse_depth(state, params, "bid", 0) - i, 0)
        return Impact(m, -m)
    if kind == Kind.CANCEL_ASK:
        if state.ask[i - 1] == 0 or i != inverse_depth(state, params, "ask", 0):
            return Impact(0, 0)
        return Impact(ask_gap, ask_gap)
    if state.bid[i - 1] == 0 or i != inverse_depth(state, params, "bid", 0):
        return Impact(0, 0)
    return Impact(-bid_gap, bid_gap)


def event_rates(state: BookState, params: ModelParams) -> np.ndarray:
    """Intensity of every event code at ``state`` (no-op cancels keep their rate)."""
    out = np.empty(params.n_events)
    _kernel.fill_rates(state.to_array(), params.N, params.base_rates, params.proportional, out)
    return out


def is_noop(state: BookState, event: Event) -> bool:
    if event.kind == Kind.CANCEL_ASK:
        return state.ask[event.level - 1] == 0
    if event.kind == Kind.CANCEL_BID:
        return state.bid[event.level - 1] == 0
    return False


def enumerate_transitions(state: BookState, params: ModelParams) -> list[Transition]:
    """Every event with positive rate that changes the state."""
    _check_shape(state, params)
    rates = event_rates(state, params)
    out = []
    for code, rate in enumerate(rates):
        if rate <= 0:
            continue
        ev = Event.from_code(code, params.N)
        if is_noop(state, ev):
            continue
        out.append(Transition(ev, float(rate), apply_event(state, params, ev),
                              price_impact(state, params, ev)))
    return out
