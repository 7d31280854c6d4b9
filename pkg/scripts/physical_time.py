"""Event-time versus model-time variance slopes under constant cancellation.

For each limit-order rate prints the nominal event rate, the observed
events per unit time, and the ratio of the two variance slopes. The ratio
follows the observed rate, which drops below the nominal one when the book
is often empty on one side (market orders are then switched off).
"""
import argparse

from lobchain.book import ModelParams
from lobchain.flow import simulate
from lobchain.generator import stability_condition
from lobchain.stats import DEFAULT_GRID, mean_event_rate, physical_time_variance, variance_scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=5)
    ap.add_argument("--limits", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.5])
    ap.add_argument("--events", type=int, default=10**7)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    print(f"{'limit':>6} {'stable':>6} {'nominal':>8} {'observed':>9} {'ratio':>8} {'empty frac':>10}")
    for lim in args.limits:
        p = ModelParams.uniform(args.N, market=1.0, limit=lim, cancel=1.0, cancel_mode="constant")
        tr = simulate(p, args.seed, args.events)
        ratio = physical_time_variance(tr).slope / variance_scaling(tr, DEFAULT_GRID).slope
        empty = float((tr.spreads == args.N + 1).mean())
        print(f"{lim:6.2f} {str(stability_condition(p).holds):>6} {p.nominal_rate:8.2f} "
              f"{mean_event_rate(tr):9.3f} {ratio:8.3f} {empty:10.3f}")


if __name__ == "__main__":
    main()
