"""Truncated stationary law of the N=2 book for a range of queue caps.

Shows how the boundary mass falls with the cap while the spread marginal
settles, and compares against a long simulation.
"""
import argparse

from lobchain.book import ModelParams
from lobchain.flow import simulate
from lobchain.generator import truncated_stationary
from lobchain.stats import spread_histogram, total_variation


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--caps", type=int, nargs="+", default=[3, 4, 5, 6, 7, 8])
    ap.add_argument("--events", type=int, default=10**7)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    p = ModelParams.uniform(2)
    sim = spread_histogram(simulate(p, args.seed, args.events))
    print("simulated spread law:", " ".join(f"{x:.5f}" for x in sim))
    print(f"{'cap':>4} {'states':>7} {'boundary':>10} {'TV to sim':>10}  spread marginal")
    for cap in args.caps:
        res = truncated_stationary(p, cap)
        m = res.spread_marginal()
        print(f"{cap:4d} {len(res.states):7d} {res.boundary_mass:10.2e} "
              f"{total_variation(m, sim):10.5f}  " + " ".join(f"{x:.5f}" for x in m))


if __name__ == "__main__":
    main()
