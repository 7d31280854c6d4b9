"""Jitted order-book mechanics shared by the public API and the simulators.

State layout (int64 vector of length 2N+1)::

    s[0]          absolute tick index of the best ask
    s[1:N+1]      ask queue counts, level i at s[i]
    s[N+1:2N+1]   bid queue counts (magnitudes), level i at s[N+i]

Counts are in units of the order size q. Event codes::

    0           market buy
    1           market sell
    1+i         limit ask at level i      (i = 1..N)
    N+1+i       limit bid at level i
    2N+1+i      cancel ask at level i
    3N+1+i      cancel bid at level i
"""
import numpy as np
from numba import njit

APPLIED = 0
NOOP = 1
REJECTED = -1


@njit(cache=True)
def first_nonzero(s, off, n):
    for j in range(n):
        if s[off + j] > 0:
            return j + 1
    return n + 1


@njit(cache=True)
def _shift_away(s, off, n, k):
    # opposite quote moved away by k ticks: levels renumber upward, zeros enter
    for j in range(n, 0, -1):
        if j > k:
            s[off + j - 1] = s[off + j - 1 - k]
        else:
            s[off + j - 1] = 0


@njit(cache=True)
def _shift_closer(s, off, n, m, fill):
    # opposite quote moved closer by m ticks: far levels re-enter at boundary volume
    for j in range(1, n + 1):
        src = j + m
        if src <= n:
            s[off + j - 1] = s[off + src - 1]
        else:
            s[off + j - 1] = fill


@njit(cache=True)
def _execute(s, off, n, units):
    # generic depletion: a_i <- [a_i - (units - A(i-1))_+]_+
    left = units
    for j in range(n):
        if left <= 0:
            break
        take = min(s[off + j], left)
        s[off + j] -= take
        left -= take


@njit(cache=True)
def apply_inplace(s, code, n, ainf, binf):
    """Apply event ``code`` to ``s`` in place; returns APPLIED, NOOP or REJECTED."""
    aoff = 1
    boff = n + 1
    if code == 0:
        i_s = first_nonzero(s, aoff, n)
        if i_s > n:
            return REJECTED
        _execute(s, aoff, n, 1)
        k = first_nonzero(s, aoff, n) - i_s
        if k > 0:
            s[0] += k
            _shift_away(s, boff, n, k)
        return APPLIED
    if code == 1:
        i_s = first_nonzero(s, boff, n)
        if i_s > n:
            return REJECTED
        _execute(s, boff, n, 1)
        k = first_nonzero(s, boff, n) - i_s
        if k > 0:
            _shift_away(s, aoff, n, k)
        return APPLIED
    if code <= n + 1:
        i = code - 1
        i_s = first_nonzero(s, aoff, n)
        s[aoff + i - 1] += 1
        if i < i_s:
            s[0] -= i_s - i
            _shift_closer(s, boff, n, i_s - i, binf)
        return APPLIED
    if code <= 2 * n + 1:
        i = code - n - 1
        i_s = first_nonzero(s, boff, n)
        s[boff + i - 1] += 1
        if i < i_s:
            _shift_closer(s, aoff, n, i_s - i, ainf)
        return APPLIED
    if code <= 3 * n + 1:
        i = code - 2 * n - 1
        if s[aoff + i - 1] == 0:
            return NOOP
        i_s = first_nonzero(s, aoff, n)
        s[aoff + i - 1] -= 1
        if i == i_s and s[aoff + i - 1] == 0:
            k = first_nonzero(s, aoff, n) - i_s
            s[0] += k
            _shift_away(s, boff, n, k)
        return APPLIED
    i = code - 3 * n - 1
    if s[boff + i - 1] == 0:
        return NOOP
    i_s = first_nonzero(s, boff, n)
    s[boff + i - 1] -= 1
    if i == i_s and s[boff + i - 1] == 0:
        k = first_nonzero(s, boff, n) - i_s
        _shift_away(s, aoff, n, k)
    return APPLIED


@njit(cache=True)
def fill_rates(s, n, base, proportional, out):
    """Event intensities at state ``s``; returns their sum.

    In constant mode a cancel at an empty level keeps its base rate and acts
    as a no-op, so the total stays state independent.
    """
    total = 0.0
    out[0] = base[0] if first_nonzero(s, 1, n) <= n else 0.0
    out[1] = base[1] if first_nonzero(s, n + 1, n) <= n else 0.0
    for c in range(2, 2 * n + 2):
        out[c] = base[c]
    for j in range(2 * n):
        c = 2 * n + 2 + j
        if proportional:
            out[c] = base[c] * s[1 + j]
        else:
            out[c] = base[c]
    for c in range(4 * n + 2):
        total += out[c]
    return total


@njit(cache=True)
def _pick(rates, target):
    acc = 0.0
    last = 0
    for c in range(rates.shape[0]):
        if rates[c] > 0.0:
            acc += rates[c]
            last = c
            if target < acc:
                return c
    return last


@njit(cache=True)
def mid_half(s, n):
    return 2 * s[0] - first_nonzero(s, 1, n)


@njit(cache=True, nogil=True)
def run(s, n, base, proportional, ainf, binf, rng, n_burn, n_events, stride,
        times, codes, mids, spreads, snaps, snap_times):
    """Exact jump-chain simulation; returns (recorded, halted, mid0, spread0).

    One exponential draw then one uniform draw per step, in that order.
    """
    rates = np.empty(4 * n + 2)
    for _ in range(n_burn):
        total = fill_rates(s, n, base, proportional, rates)
        if total <= 0.0:
            return 0, True, mid_half(s, n), first_nonzero(s, 1, n)
        rng.exponential()
        code = _pick(rates, rng.random() * total)
        apply_inplace(s, code, n, ainf, binf)
    mid0 = mid_half(s, n)
    spread0 = first_nonzero(s, 1, n)
    t = 0.0
    k_snap = 0
    for k in range(n_events):
        total = fill_rates(s, n, base, proportional, rates)
        if total <= 0.0:
            return k, True, mid0, spread0
        t += rng.exponential() / total
        code = _pick(rates, rng.random() * total)
        apply_inplace(s, code, n, ainf, binf)
        times[k] = t
        codes[k] = code
        spreads[k] = first_nonzero(s, 1, n)
        mids[k] = 2 * s[0] - spreads[k]
        if stride > 0 and k % stride == 0:
            snap_times[k_snap] = t
            snaps[k_snap, :] = s
            k_snap += 1
    return n_events, False, mid0, spread0


@njit(cache=True, nogil=True)
def short_time(s0, n, base, proportional, ainf, binf, rng, horizon, out):
    """Run ``out.shape[0]`` independent copies from ``s0`` up to time ``horizon``."""
    rates = np.empty(4 * n + 2)
    for r in range(out.shape[0]):
        s = s0.copy()
        t = 0.0
        while True:
            total = fill_rates(s, n, base, proportional, rates)
            if total <= 0.0:
                break
            t += rng.exponential() / total
            if t > horizon:
                break
            code = _pick(rates, rng.random() * total)
            apply_inplace(s, code, n, ainf, binf)
        out[r, :] = s
