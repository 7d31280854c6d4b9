"""Markovian limit order book: simulation, generator/drift analysis and price statistics."""
from .book import (BookState, CancelAsk, CancelBid, Event, Impact, Kind, LimitAsk, LimitBid,
                   MarketBuy, MarketSell, ModelParams, apply_event, depth,
                   enumerate_transitions, inverse_depth, price_impact)
from .flow import (Trace, embedded_probabilities, simulate, simulate_replicas, step, total_rate)

__all__ = [
    "BookState", "CancelAsk", "CancelBid", "Event", "Impact", "Kind", "LimitAsk", "LimitBid",
    "MarketBuy", "MarketSell", "ModelParams", "Trace", "apply_event", "depth",
    "embedded_probabilities", "enumerate_transitions", "inverse_depth", "price_impact",
    "simulate", "simulate_replicas", "step", "total_rate",
]
