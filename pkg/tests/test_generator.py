import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lobchain.book import BookState, ModelParams, enumerate_transitions
from lobchain.flow import make_rng, short_time_states, total_rate
from lobchain.generator import (apply_generator, conditional_drifts, drift_check_continuous,
                                drift_check_embedded, embedded_drift_ratio, enumerated_drifts,
                                large_states, level_queue_stationary, lyapunov_exp,
                                lyapunov_linear, random_states, sampled_states,
                                stability_condition, truncated_stationary)

from .conftest import book_states, model_params


def _brute_LV(x, p):
    """Independent enumeration: rebuild every event's effect on total shares by hand."""
    N, q = p.N, p.q
    ca, cb = p.boundary_counts
    i_s = x.spread
    total = 0.0
    # market orders remove one order from the best queue, unless that side is empty
    if i_s <= N:
        total += (p.rate_market_buy + p.rate_market_sell) * -q
    for i in range(1, N + 1):
        # a limit order inside the spread pulls the opposite frame closer by m
        # ticks; the vacated levels were empty and m far levels refill
        m = max(i_s - i, 0)
        total += p.rate_limit_ask[i - 1] * q * (1 + m * cb)
        total += p.rate_limit_bid[i - 1] * q * (1 + m * ca)
        # cancels behind or at best: -1 order, plus shifts when the best level empties
        for side, lam in (("a", p.rate_cancel_ask[i - 1]), ("b", p.rate_cancel_bid[i - 1])):
            own = x.ask if side == "a" else x.bid
            if own[i - 1] == 0:
                continue
            r = lam * own[i - 1]
            total += r * -q
            if i == i_s and own[i - 1] == 1:
                nxt = next((j for j in range(i + 1, N + 1) if own[j - 1] > 0), N + 1)
                k = nxt - i
                opp = x.bid if side == "a" else x.ask
                # opposite vector shifts away by k: its top k levels leave the frame
                total += r * -q * sum(opp[N - k:])
    # market order that empties the best queue shifts the opposite side away too
    for lam, own, opp in ((p.rate_market_buy, x.ask, x.bid), (p.rate_market_sell, x.bid, x.ask)):
        if i_s <= N and own[i_s - 1] == 1:
            nxt = next((j for j in range(i_s + 1, N + 1) if own[j - 1] > 0), N + 1)
            k = nxt - i_s
            total += lam * -q * sum(opp[N - k:])
    return total


def test_constants_in_kernel(rng):
    p = ModelParams.uniform(4)
    for x in random_states(p, rng, 100):
        assert apply_generator(lambda s: 3.0, x, p) == 0.0


def test_lyapunov_values(x0, golden_params):
    assert lyapunov_linear(x0, golden_params) == 29
    assert lyapunov_linear(BookState((0,) * 9, (0,) * 9), golden_params) == 1
    shifted = BookState(x0.ask, x0.bid, 17)
    assert lyapunov_linear(shifted, golden_params) == 29
    assert lyapunov_exp(x0, 1.01) == 1.01 ** 28
    assert lyapunov_exp(BookState((0, 0), (0, 0)), 1.3) == 1.0
    with pytest.raises(ValueError):
        lyapunov_exp(x0, 1.0)


def test_LV_golden_matches_hand_enumeration(x0):
    p = ModelParams.uniform(9, boundary_ask=1, boundary_bid=1)
    lv = apply_generator(lambda s: lyapunov_linear(s, p), x0, p)
    by_hand = math.fsum(t.rate * (t.state.total_orders - x0.total_orders)
                        for t in enumerate_transitions(x0, p))
    assert lv == by_hand
    assert len(enumerate_transitions(x0, p)) == 29


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_LV_matches_brute_force(data):
    N = data.draw(st.integers(1, 5))
    p = ModelParams.uniform(N, market=data.draw(st.floats(0.1, 3)),
                            limit=data.draw(st.floats(0.1, 3)), cancel=data.draw(st.floats(0.1, 3)),
                            boundary_ask=data.draw(st.integers(1, 3)),
                            boundary_bid=data.draw(st.integers(1, 3)))
    x = data.draw(book_states(N))
    lv = apply_generator(lambda s: lyapunov_linear(s, p), x, p)
    assert math.isclose(lv, _brute_LV(x, p), rel_tol=1e-12, abs_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(data=st.data(), alpha=st.floats(-5, 5))
def test_generator_is_linear(data, alpha):
    p = data.draw(model_params())
    x = data.draw(book_states(p.N))
    f = lambda s: float(s.spread)
    g = lambda s: float(s.mid_half) ** 2
    lhs = apply_generator(lambda s: alpha * f(s) + g(s), x, p)
    rhs = alpha * apply_generator(f, x, p) + apply_generator(g, x, p)
    assert math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-9)


def test_generator_against_short_time_simulation():
    p = ModelParams.uniform(4)
    x = BookState((0, 2, 1, 3), (0, 1, 0, 2))
    lam = total_rate(x, p)
    delta = 0.05 / lam
    ends = short_time_states(x, p, delta, 200_000, make_rng(3))
    dv = p.q * (ends[:, 1:].sum(1) - x.total_orders)
    est, se = dv.mean() / delta, dv.std(ddof=1) / math.sqrt(len(dv)) / delta
    exact = apply_generator(lambda s: lyapunov_linear(s, p), x, p)
    # O(delta) bias is well below the standard error at this horizon
    assert abs(est - exact) < 4 * se


def test_large_state_has_negative_LV():
    p = ModelParams.uniform(5)
    x = BookState((100,) * 5, (100,) * 5)
    assert x.total_orders == 1000
    assert apply_generator(lambda s: lyapunov_linear(s, p), x, p) < 0


def test_continuous_check_constant_mode_rejected():
    p = ModelParams.uniform(3, cancel_mode="constant")
    with pytest.raises(ValueError, match="stability_condition"):
        drift_check_continuous(p, [BookState.full(p)])
    with pytest.raises(ValueError):
        drift_check_embedded(p, 1.05, [BookState.full(p)])


@pytest.mark.parametrize("params", [
    ModelParams.uniform(3),
    ModelParams.uniform(4, market=3.0, limit=2.0, cancel=0.2),
    ModelParams(N=3, q=2, rate_limit_ask=[2, 1, 0.5], rate_cancel_bid=[0.1, 1, 4],
                boundary_ask=2, boundary_bid=6),
    ModelParams.uniform(2, market=0.1, limit=5.0, cancel=0.05, boundary_ask=3, boundary_bid=1),
])
def test_continuous_drift_passes_matrix(params):
    rng = make_rng(8)
    states = random_states(params, rng, 300) + large_states(params, rng, 40, 5000)
    rep = drift_check_continuous(params, states)
    assert rep.passed and rep.holds()
    assert rep.beta == params.min_cancel / 2


def test_embedded_limit_sequence():
    p = ModelParams.uniform(5)
    z = 1.05
    limit = p.min_cancel * (z ** -1 - 1) / p.max_cancel
    ratios = []
    for phi in (10**2, 10**3, 10**4):
        x = BookState((phi // 10,) * 5, (phi // 10,) * 5)
        ratios.append(embedded_drift_ratio(x, p, z))
    assert ratios[0] > ratios[1] > ratios[2] > limit
    assert abs(ratios[2] - limit) < 0.01 * abs(limit)
    rep = drift_check_embedded(p, z, [BookState((k,) * 5, (k,) * 5) for k in (1, 10, 100, 1000)])
    assert rep.extra["limit_ratio"] == limit
    # beta is half the magnitude of the limit
    assert math.isclose(rep.beta, -limit / 2)


def test_embedded_drift_mirror_symmetry(rng):
    p = ModelParams.uniform(4)
    for x in random_states(p, rng, 100):
        assert math.isclose(embedded_drift_ratio(x, p, 1.1), embedded_drift_ratio(x.mirror(), p, 1.1),
                            rel_tol=1e-12, abs_tol=1e-15)


def test_embedded_ratio_no_overflow():
    p = ModelParams.uniform(2)
    x = BookState((30000, 30000), (30000, 30000))
    r = embedded_drift_ratio(x, p, 1.05)
    assert np.isfinite(r) and r < 0
    rep = drift_check_embedded(p, 1.05, [x, BookState.full(p)])
    assert rep.passed


def test_drift_reports_export(tmp_path):
    p = ModelParams.uniform(3)
    states = sampled_states(p, 1, 50, burn_in=100)
    rep = drift_check_continuous(p, states)
    rep.write_csv(tmp_path / "d.csv")
    rep.write_json(tmp_path / "d.json")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "state_digest,phi_shares,V,LV,LV_over_V" and len(lines) == 51
    assert '"verdict"' in (tmp_path / "d.json").read_text()


def test_stability_worked_example():
    p = ModelParams.uniform(2, market=1.0, limit=0.1, cancel=1.0, boundary_ask=5, boundary_bid=5,
                            cancel_mode="constant")
    res = stability_condition(p)
    assert res.holds
    assert res.exact_margin == Fraction(8, 5) and res.margin == 1.6
    assert res.lhs == 6.0 and math.isclose(res.rhs, 4.4)
    assert math.isclose(res.symmetric_margin, 0.8)


def test_stability_fails_for_large_limit_rate():
    p = ModelParams.uniform(2, market=1.0, limit=50.0, cancel=1.0, cancel_mode="constant")
    assert not stability_condition(p).holds
    with pytest.raises(ValueError):
        stability_condition(ModelParams.uniform(2))


@settings(max_examples=100, deadline=None)
@given(N=st.integers(1, 6), m=st.floats(0.01, 5), l=st.floats(0.01, 5), c=st.floats(0.01, 5),
       d=st.integers(1, 5))
def test_symmetric_form_agrees(N, m, l, c, d):
    p = ModelParams.uniform(N, market=m, limit=l, cancel=c, boundary_ask=d, boundary_bid=d,
                            cancel_mode="constant")
    res = stability_condition(p)
    assert (res.symmetric_margin > 0) == res.holds or abs(res.margin) < 1e-12
    assert math.isclose(res.margin, 2 * res.symmetric_margin, rel_tol=1e-9, abs_tol=1e-12)


@pytest.mark.parametrize("scale", [0.5, 2.0, 8.0])
def test_stability_margin_homogeneous(scale):
    kw = dict(boundary_ask=2, boundary_bid=3, cancel_mode="constant")
    base = stability_condition(ModelParams.uniform(3, market=1.0, limit=0.05, cancel=0.5, **kw))
    scaled = stability_condition(ModelParams.uniform(3, market=scale, limit=0.05 * scale,
                                                     cancel=0.5 * scale, **kw))
    assert math.isclose(scaled.margin, scale * base.margin, rel_tol=1e-12)


def test_conditional_drifts_golden(x0):
    p = ModelParams.uniform(9, boundary_ask=4, boundary_bid=4)
    dp, ds = conditional_drifts(x0, p)
    ep, es, _ = enumerated_drifts(x0, p)
    assert (dp, ds) == (ep, es)


@settings(max_examples=300, deadline=None)
@given(data=st.data())
def test_conditional_drifts_match_enumeration(data):
    p = data.draw(model_params())
    x = data.draw(book_states(p.N))
    dp, ds = conditional_drifts(x, p)
    ep, es, scale = enumerated_drifts(x, p)
    assert abs(dp - ep) <= 1e-12 * max(scale, 1e-300)
    assert abs(ds - es) <= 1e-12 * max(scale, 1e-300)


def test_conditional_drift_symmetric_state():
    p = ModelParams.uniform(4, market=0.7, limit=0.3, cancel=1.1)
    x = BookState((0, 2, 1, 3), (0, 2, 1, 3))
    assert conditional_drifts(x, p)[0] == 0.0


def test_spread_drift_at_empty_frame_without_limits():
    p = ModelParams.uniform(3, limit=0.0, cancel=1.0)
    x = BookState((0, 0, 0), (0, 0, 0))
    assert conditional_drifts(x, p) == (0.0, 0.0)
    assert enumerated_drifts(x, p)[:2] == (0.0, 0.0)


def test_birth_death_slice_is_poisson():
    p = ModelParams(N=1, rate_market_buy=0.0, rate_market_sell=0.0)
    pi = level_queue_stationary(p, "ask", 1, 20)
    k = np.arange(21)
    poisson = np.exp(-1.0) / np.array([math.factorial(int(j)) for j in k])
    assert 0.5 * np.abs(pi - poisson).sum() < 1e-6


@pytest.mark.parametrize("params", [
    ModelParams.uniform(1),
    ModelParams.uniform(2, market=2.0, limit=0.5, cancel=1.5),
    ModelParams.uniform(2, cancel_mode="constant", limit=0.2),
])
def test_oracle_is_probability_vector(params):
    res = truncated_stationary(params, 4)
    assert res.probs.min() >= 0
    assert abs(res.probs.sum() - 1) < 1e-10
    assert abs(res.spread_marginal().sum() - 1) < 1e-10
    for x in res.states:
        assert x.is_consistent()


def test_oracle_boundary_mass_decreases():
    p = ModelParams.uniform(2)
    masses = [truncated_stationary(p, k).boundary_mass for k in (4, 6, 8)]
    assert masses[0] > masses[1] > masses[2]


def test_oracle_rejects_large_space():
    with pytest.raises(ValueError):
        truncated_stationary(ModelParams.uniform(5), 9)
    with pytest.raises(ValueError):
        truncated_stationary(ModelParams.uniform(2, boundary_ask=6), 5)
