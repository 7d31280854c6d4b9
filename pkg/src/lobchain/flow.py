"""Exact event-driven simulation of the order book chain.

Each step draws an exponential holding time with the current total
intensity and then one event in proportion to its intensity (the jump-chain
construction of a continuous-time Markov chain). Random streams are numpy
``PCG64`` generators seeded through ``SeedSequence``; a replica index, when
given, is mixed into the seed entropy.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernel
from .book import BookState, Event, ModelParams, apply_event, event_rates, is_noop

DEFAULT_BURN_IN = 100_000


def make_rng(seed: int, replica: int | None = None) -> np.random.Generator:
    entropy = seed if replica is None else [seed, replica]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def replica_seeds(master: int, n: int) -> list[int]:
    """``n`` distinct 63-bit seeds derived from ``master``."""
    seeds = []
    for child in np.random.SeedSequence(master).spawn(n):
        seeds.append(int(child.generate_state(2, np.uint32).view(np.uint64)[0] >> np.uint64(1)))
    if len(set(seeds)) != n:
        raise RuntimeError("seed collision")  # pragma: no cover
    return seeds


def total_rate(state: BookState, params: ModelParams) -> float:
    return math.fsum(event_rates(state, params))


def embedded_probabilities(state: BookState, params: ModelParams) -> dict[Event, float]:
    """Jump-chain law of the next event (no-op cancels included in constant mode)."""
    rates = event_rates(state, params)
    total = math.fsum(rates)
    if total <= 0:
        raise ValueError("total event rate is zero; the chain is absorbed")
    return {Event.from_code(c, params.N): r / total for c, r in enumerate(rates) if r > 0}


def step(state: BookState, params: ModelParams, rng: np.random.Generator):
    """One jump: returns (holding time, event, next state).

    Consumes the stream exactly as the compiled simulator does, so repeated
    calls reproduce ``simulate`` draw for draw.
    """
    rates = np.empty(params.n_events)
    # same summation order as the kernel, so the event pick agrees bit for bit
    total = _kernel.fill_rates(state.to_array(), params.N, params.base_rates,
                               params.proportional, rates)
    if total <= 0:
        raise ValueError("total event rate is zero; the chain is absorbed")
    dt = rng.exponential() / total
    code = _kernel._pick(rates, rng.random() * total)
    ev = Event.from_code(code, params.N)
    nxt = state if is_noop(state, ev) else apply_event(state, params, ev)
    return dt, ev, nxt


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Trace:
    """Recorded sample path after burn-in.

    ``times``/``codes``/``mids``/``spreads`` hold one row per event: the time
    of the event, its code and the mid (half ticks) and spread (ticks) right
    after it. ``mid0``/``spread0``/``state0`` describe the book when
    recording started (time 0). Snapshots are full state vectors taken after
    every ``stride``-th event, in ``_kernel`` layout.
    """

    params: ModelParams
    seed: int
    times: np.ndarray
    codes: np.ndarray
    mids: np.ndarray
    spreads: np.ndarray
    mid0: int
    spread0: int
    state0: BookState
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    snapshots: np.ndarray = field(default_factory=lambda: np.empty((0, 0), dtype=np.int64))
    stride: int = 0
    halted: bool = False
    replica: int | None = None

    def __post_init__(self):
        for name in ("times", "codes", "mids", "spreads", "snapshot_times", "snapshots"):
            _frozen(getattr(self, name))

    def __len__(self):
        return len(self.times)

    @property
    def params_digest(self) -> str:
        return self.params.digest()

    @property
    def events(self) -> list[Event]:
        return [Event.from_code(c, self.params.N) for c in self.codes]

    @property
    def mid_path(self) -> np.ndarray:
        """Mid in half ticks including the starting value (length n+1)."""
        return np.concatenate(([self.mid0], self.mids))

    def snapshot_states(self) -> list[BookState]:
        return [BookState.from_array(s) for s in self.snapshots]

    def write_csv(self, path: str | Path):
        write_trace_csv(self, path)


def simulate(params: ModelParams, seed: int, n_events: int, burn_in: int = DEFAULT_BURN_IN,
             snapshot_stride: int = 0, initial: BookState | None = None,
             replica: int | None = None) -> Trace:
    """Simulate ``burn_in`` unrecorded events, then record ``n_events``.

    The default start is the full book (every level at the boundary volume,
    spread one tick).
    """
    if n_events < 0 or burn_in < 0 or snapshot_stride < 0:
        raise ValueError("n_events, burn_in and snapshot_stride must be >= 0")
    state = initial if initial is not None else BookState.full(params)
    if state.N != params.N or not state.is_consistent():
        raise ValueError("initial state is not a valid book for these params")
    s = state.to_array()
    rng = make_rng(seed, replica)
    n = params.N
    times = np.empty(n_events)
    codes = np.empty(n_events, dtype=np.int32)
    mids = np.empty(n_events, dtype=np.int64)
    spreads = np.empty(n_events, dtype=np.int32)
    n_snap = (n_events + snapshot_stride - 1) // snapshot_stride if snapshot_stride else 0
    snaps = np.empty((n_snap, 2 * n + 1), dtype=np.int64)
    snap_times = np.empty(n_snap)
    ca, cb = params.boundary_counts
    e = np.empty(0)
    _, halted, _, _ = _kernel.run(
        s, n, params.base_rates, params.proportional, ca, cb, rng, burn_in, 0, 0,
        e, np.empty(0, np.int32), np.empty(0, np.int64), np.empty(0, np.int32),
        np.empty((0, 2 * n + 1), np.int64), e)
    state0 = BookState.from_array(s)
    done = 0
    mid0, spread0 = state0.mid_half, state0.spread
    if not halted:
        done, halted, _, _ = _kernel.run(
            s, n, params.base_rates, params.proportional, ca, cb, rng, 0, n_events,
            snapshot_stride, times, codes, mids, spreads, snaps, snap_times)
    k_snap = (done + snapshot_stride - 1) // snapshot_stride if snapshot_stride else 0
    return Trace(params=params, seed=seed, times=times[:done], codes=codes[:done],
                 mids=mids[:done], spreads=spreads[:done], mid0=int(mid0), spread0=int(spread0),
                 state0=state0, snapshot_times=snap_times[:k_snap], snapshots=snaps[:k_snap],
                 stride=snapshot_stride, halted=bool(halted), replica=replica)


def simulate_replicas(params: ModelParams, seeds: Sequence[int], n_events: int,
                      burn_in: int = DEFAULT_BURN_IN, snapshot_stride: int = 0,
                      workers: int = 1) -> list[Trace]:
    """Independent runs, one per seed, returned in seed order."""
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise ValueError("replica seeds must be distinct")

    def one(seed):
        return simulate(params, seed, n_events, burn_in, snapshot_stride)

    if workers <= 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))


def short_time_states(state: BookState, params: ModelParams, horizon: float, n_copies: int,
                      rng: np.random.Generator) -> np.ndarray:
    """End states (kernel layout) of ``n_copies`` runs of length ``horizon`` from ``state``."""
    out = np.empty((n_copies, 2 * params.N + 1), dtype=np.int64)
    ca, cb = params.boundary_counts
    _kernel.short_time(state.to_array(), params.N, params.base_rates, params.proportional,
                       ca, cb, rng, horizon, out)
    return out


TRACE_HEADER = ["t_model_time", "event_code", "mid_half_ticks", "spread_ticks"]


def snapshot_header(N: int) -> list[str]:
    return (["t_model_time", "ask_price_ticks"] + [f"ask_{i}_orders" for i in range(1, N + 1)]
            + [f"bid_{i}_orders" for i in range(1, N + 1)])


def write_trace_csv(trace: Trace, path: str | Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t, c, m, s in zip(trace.times.tolist(), trace.codes.tolist(),
                              trace.mids.tolist(), trace.spreads.tolist()):
            w.writerow((repr(t), c, m, s))


def write_snapshots_csv(trace: Trace, path: str | Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(snapshot_header(trace.params.N))
        for t, row in zip(trace.snapshot_times.tolist(), trace.snapshots.tolist()):
            w.writerow((repr(t), *row))


def _load_rows(path) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # header-only files are legitimate
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def read_trace_csv(path: str | Path, params: ModelParams, seed: int, mid0: int, spread0: int,
                   state0: BookState, snapshots_path: str | Path | None = None,
                   stride: int = 0) -> Trace:
    data = _load_rows(path)
    if data.size == 0:
        data = np.empty((0, 4))
    snap_t, snaps = np.empty(0), np.empty((0, 2 * params.N + 1), dtype=np.int64)
    if snapshots_path is not None and Path(snapshots_path).exists():
        sd = _load_rows(snapshots_path)
        if sd.size:
            snap_t, snaps = sd[:, 0].copy(), sd[:, 1:].astype(np.int64)
    return Trace(params=params, seed=seed, times=data[:, 0].copy(),
                 codes=data[:, 1].astype(np.int32), mids=data[:, 2].astype(np.int64),
                 spreads=data[:, 3].astype(np.int32), mid0=mid0, spread0=spread0, state0=state0,
                 snapshot_times=snap_t, snapshots=snaps, stride=stride)
