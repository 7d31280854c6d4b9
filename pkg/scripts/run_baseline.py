"""Simulate the all-1-rates book and print every price statistic.

    python3 scripts/run_baseline.py --N 10 --events 10000000 --out out/baseline
"""
import argparse
import json
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lobchain.book import ModelParams
from lobchain.flow import simulate
from lobchain.stats import compute_report, rescaled_path


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=10)
    ap.add_argument("--events", type=int, default=10**7)
    ap.add_argument("--burn-in", type=int, default=10**5)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out", type=Path, default=Path("out/baseline"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    p = ModelParams.uniform(args.N)
    t0 = time.perf_counter()
    tr = simulate(p, args.seed, args.events, args.burn_in, snapshot_stride=100)
    t1 = time.perf_counter()
    rep = compute_report(tr)
    print(f"simulated {len(tr)} events in {t1 - t0:.1f}s, analysed in {time.perf_counter() - t1:.1f}s")
    summary = rep.summary()
    print(json.dumps(summary, indent=2))
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    fig, axes = plt.subplots(2, 3, figsize=(13, 7))
    lv = np.arange(1, args.N + 1)
    axes[0, 0].bar(lv, rep.depth_ask, color="tab:red", label="ask")
    axes[0, 0].bar(-lv, rep.depth_bid, color="tab:blue", label="bid")
    axes[0, 0].set(title="mean depth (shares)", xlabel="level (ticks)")
    axes[0, 0].legend()
    axes[0, 1].bar(np.arange(1, args.N + 2), rep.spread_hist)
    axes[0, 1].set(title="spread (time-weighted)", xlabel="ticks")
    axes[0, 2].bar(rep.increment_values, rep.increment_freq)
    axes[0, 2].set(title="increments", xlabel="half ticks", yscale="log")
    axes[1, 0].bar(np.arange(len(rep.autocov)), rep.autocov / rep.autocov[0])
    axes[1, 0].set(title="increment autocorrelation", xlabel="lag (events)")
    g = rep.scaling
    axes[1, 1].plot(g.grid, g.variances, "o")
    axes[1, 1].plot(g.grid, g.slope * g.grid + g.intercept, "--")
    axes[1, 1].set(title=f"variance in event time, R2={g.r2:.4f}", xlabel="window (events)")
    for n in (10**3, 10**5, 10**6):
        t, x = rescaled_path(tr, n, points=501)
        axes[1, 2].plot(t, x, lw=0.8, label=f"n={n:.0e}")
    axes[1, 2].set(title="rescaled mid path", xlabel="t")
    axes[1, 2].legend()
    fig.tight_layout()
    fig.savefig(args.out / "baseline.png", dpi=120)
    print(f"figure written to {args.out / 'baseline.png'}")


if __name__ == "__main__":
    main()
