"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line
that is printed in the terminal summary. All random streams use seed 42."""
import json
import math
from fractions import Fraction

import numpy as np

from lobchain.book import (BookState, CancelAsk, LimitBid, MarketSell, ModelParams, all_events,
                           apply_event)
from lobchain.cli import main
from lobchain.flow import make_rng, short_time_states, simulate, total_rate
from lobchain.generator import (apply_generator, conditional_drifts, drift_check_continuous,
                                drift_check_embedded, enumerated_drifts, large_states,
                                lyapunov_linear, random_states, sampled_states,
                                stability_condition, truncated_stationary)
from lobchain.stats import (DEFAULT_GRID, asymptotic_variance, autocovariance, batch_means,
                            increments, mean_event_rate, mixing_rate, physical_time_variance,
                            spread_histogram, total_variation, variance_scaling)
from lobchain.toy import ToyParams, fclt_check

from .conftest import GOLDEN_ASK, GOLDEN_BID, record_criterion

SEED = 42


def _consistent(snaps: np.ndarray, N: int) -> np.ndarray:
    """Row-wise first-nonzero equality and spread bound for kernel-layout states."""
    def first(block):
        nz = block > 0
        return np.where(nz.any(1), nz.argmax(1) + 1, N + 1)
    a, b = first(snaps[:, 1:N + 1]), first(snaps[:, N + 1:])
    return (a == b) & (a <= N + 1) & (snaps[:, 1:] >= 0).all(1)


def test_c01_golden_vectors():
    p = ModelParams.uniform(9, boundary_ask=4, boundary_bid=4)
    x = BookState(GOLDEN_ASK, GOLDEN_BID)
    want = {
        MarketSell(): ((0, 0, 0, 0, 0, 0, 1, 3, 5), (0, 0, 0, 0, 0, 0, 4, 5, 3), 7),
        LimitBid(1): ((1, 3, 5, 4, 2, 4, 4, 4, 4), (1, 0, 0, 0, 1, 0, 4, 5, 3), 1),
        CancelAsk(5): ((0, 0, 0, 0, 0, 3, 5, 4, 2), (0, 0, 0, 0, 0, 1, 0, 4, 5), 6),
    }
    got = {e: (y.ask, y.bid, y.spread) for e in want for y in [apply_event(x, p, e)]}
    ok = got == want and x.spread == 5
    record_criterion(1, ok, "golden transitions: spreads 5->7, 5->1, 5->6 with exact vectors")
    assert ok


def test_c02_invariants():
    configs = [
        ModelParams.uniform(5),
        ModelParams.uniform(10, market=3.0, limit=0.3, cancel=0.5),
        ModelParams(N=4, q=2, rate_limit_ask=[0.1, 2, 0.5, 1], rate_cancel_ask=[3, 0.2, 1, 1],
                    boundary_ask=2, boundary_bid=6),
        ModelParams.uniform(3, limit=0.1, cancel=1.0, cancel_mode="constant"),
    ]
    total = bad = 0
    for k, p in enumerate(configs):
        tr = simulate(p, SEED, 25_000, burn_in=0, snapshot_stride=1, replica=k)
        ok = _consistent(np.asarray(tr.snapshots), p.N)
        bad += int((~ok).sum()) + int((tr.spreads > p.N + 1).sum())
        total += len(tr)
    # every event type from adversarial starting states, through the public API
    rng = make_rng(SEED, 99)
    p = ModelParams.uniform(6, boundary_ask=3, boundary_bid=2)
    events = all_events(6)
    for x in random_states(p, rng, 2000, max_count=3):
        for e in events:
            try:
                y = apply_event(x, p, e)
            except ValueError:
                continue
            total += 1
            bad += not (y.is_consistent() and y.spread <= p.N + 1)
    record_criterion(2, bad == 0 and total >= 10**5, f"{total} events, {bad} violations")
    assert total >= 10**5 and bad == 0


def test_c03_generator_fidelity():
    p = ModelParams.uniform(5)
    rng = make_rng(SEED)
    worst = 0.0
    for x in random_states(p, rng, 20, max_count=5):
        delta = 1e-3 / total_rate(x, p)
        ends = short_time_states(x, p, delta, 10**5, rng)
        dv = p.q * (ends[:, 1:].sum(1) - x.total_orders)
        est = dv.mean() / delta
        se = dv.std(ddof=1) / math.sqrt(len(dv)) / delta
        exact = apply_generator(lambda s: lyapunov_linear(s, p), x, p)
        worst = max(worst, abs(est - exact) / se)
    ok = worst < 3
    record_criterion(3, ok, f"20 states x 1e5 replicas, worst |z| = {worst:.2f} (< 3)")
    assert ok


def test_c04_drift_conditions():
    p = ModelParams.uniform(5)
    states = sampled_states(p, SEED, 10**4) + large_states(p, make_rng(SEED, 1), 100, 1000)
    cont = drift_check_continuous(p, states)
    emb = drift_check_embedded(p, 1.05, states)
    ok = cont.passed and cont.holds() and emb.passed and emb.holds()
    record_criterion(4, ok, f"continuous beta={cont.beta} gamma={cont.gamma:.3g} A={cont.threshold:.0f}; "
                            f"embedded z=1.05 beta={emb.beta:.4g} A={emb.threshold:.0f}")
    assert ok


def test_c05_stability_inequality():
    ex = stability_condition(ModelParams.uniform(2, market=1.0, limit=0.1, cancel=1.0, boundary_ask=5,
                                                 boundary_bid=5, cancel_mode="constant"))
    ok = ex.holds and ex.exact_margin == Fraction(8, 5) and ex.margin == 1.6
    agree = 0
    grid = [(N, m, l, c, d) for N in (1, 2, 5) for m in (0.5, 1.0, 3.0) for l in (0.01, 0.1, 1.0)
            for c in (0.2, 1.0) for d in (1, 5)]
    for N, m, l, c, d in grid:
        r = stability_condition(ModelParams.uniform(N, market=m, limit=l, cancel=c, boundary_ask=d,
                                                    boundary_bid=d, cancel_mode="constant"))
        direct = m + N * c > N * l * (1 + N * d)
        agree += (r.holds == direct) and (r.symmetric_margin > 0) == direct
    ok = ok and agree == len(grid)
    record_criterion(5, ok, f"worked example margin {ex.exact_margin} = {ex.margin}; symmetric form agrees on {agree}/{len(grid)}")
    assert ok


def test_c06_stationary_oracle():
    p = ModelParams.uniform(2)
    res = truncated_stationary(p, 5)
    tr = simulate(p, SEED, 10**7)
    tv = total_variation(res.spread_marginal(), spread_histogram(tr))
    ok_tv, ok_mass = tv < 0.02, res.boundary_mass < 1e-3
    record_criterion(6, ok_tv and ok_mass,
                     f"TV {tv:.5f} (< 0.02: {'ok' if ok_tv else 'no'}); boundary mass "
                     f"{res.boundary_mass:.5f} (< 1e-3: {'ok' if ok_mass else 'no'})")
    assert ok_tv, tv
    assert ok_mass, f"cap-5 boundary mass {res.boundary_mass:.5f} exceeds 1e-3"


def test_c07_conditional_drift_identity():
    rng = make_rng(SEED)
    configs = [ModelParams.uniform(5),
               ModelParams(N=4, q=2, rate_market_buy=0.7, rate_limit_ask=[0.2, 1, 2, 0.5],
                           rate_limit_bid=[1.5, 0.3, 0.3, 1], rate_cancel_ask=[1, 2, 0.1, 1],
                           boundary_ask=4, boundary_bid=2),
               ModelParams.uniform(3, limit=0.4, cancel=0.9, cancel_mode="constant")]
    worst, n = 0.0, 0
    for p in configs:
        for x in random_states(p, rng, 334, max_count=6):
            dp, ds = conditional_drifts(x, p)
            ep, es, scale = enumerated_drifts(x, p)
            err = max(abs(dp - ep), abs(ds - es))
            worst = max(worst, err / scale if scale else err)
            n += 1
    ok = worst <= 1e-12
    record_criterion(7, ok, f"{n} states, worst relative error {worst:.2e}")
    assert ok


def test_c08_toy_fclt():
    rep = fclt_check(ToyParams(1.0, 1.0, 1.0, 1.0), 10**4, 1000, rng=make_rng(SEED))
    ok = abs(rep.var[-1] - 1) < 0.05
    record_criterion(8, ok, f"rescaled variance at t=1: {rep.var[-1]:.4f} (sigma = sqrt 2)")
    assert ok


def test_c09_diffusive_limit():
    tr = simulate(ModelParams.uniform(10), SEED, 10**7)
    eta = increments(tr)
    g = autocovariance(eta, 200)
    s_series = asymptotic_variance(g, len(eta)).sigma2
    s_batch = batch_means(eta)
    fit = variance_scaling(tr, DEFAULT_GRID)
    mix = mixing_rate(g, len(eta))
    est = [s_series, s_batch, fit.slope]
    spread = max(est) / min(est) - 1
    ok = fit.r2 >= 0.99 and spread <= 0.10 and mix.rho < 1
    record_criterion(9, ok, f"R2 {fit.r2:.4f}; sigma2 series/batch/slope {s_series:.4f}/"
                            f"{s_batch:.4f}/{fit.slope:.4f}; rho {mix.rho:.3f}")
    assert ok


def test_c10_physical_time_scaling():
    p = ModelParams.uniform(5, market=1.0, limit=0.1, cancel=1.0, cancel_mode="constant")
    assert stability_condition(p).holds
    tr = simulate(p, SEED, 10**7)
    ev = variance_scaling(tr, DEFAULT_GRID)
    ph = physical_time_variance(tr)
    lam = p.nominal_rate
    ratio = ph.slope / ev.slope
    ok = abs(ratio / lam - 1) <= 0.10
    record_criterion(10, ok, f"slope ratio {ratio:.3f} vs rate {lam:g} ({ratio / lam - 1:+.1%}); "
                             f"observed event rate {mean_event_rate(tr):.3f}")
    assert ok


def test_c11_reproducibility(tmp_path):
    cfg = {"model": {"N": 5, "cancel_mode": "constant", "rate_limit_ask": 0.5, "rate_limit_bid": 0.5},
           "simulation": {"seed": SEED, "n_events": 200000, "burn_in": 10000, "snapshot_stride": 100},
           "analysis": {"variance_grid": [100, 200, 500, 1000, 2000]}}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    dirs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["simulate", "--config", str(path), "--out", str(out)]) == 0
        assert main(["stats", "--config", str(path), "--out", str(out), "--svg"]) == 0
        dirs.append(out)
    names = sorted(f.name for f in dirs[0].iterdir())
    same = names == sorted(f.name for f in dirs[1].iterdir()) and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names)
    record_criterion(11, same, f"{len(names)} files byte-identical across two runs")
    assert same
