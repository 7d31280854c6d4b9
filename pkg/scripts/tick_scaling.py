"""Constant-spread model as the tick shrinks with u (lam+ + lam-) tick^2 held fixed.

Prints the empirical quadratic-variation rate and the rescaled variance at
t = 1 for each tick size; both should stay at the target sigma^2.
"""
import argparse
import math

from lobchain.flow import make_rng
from lobchain.toy import ToyParams, empirical_moments, simulate_toy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma2", type=float, default=2.0)
    ap.add_argument("--u", type=float, default=0.5)
    ap.add_argument("--horizon", type=float, default=1.0)
    ap.add_argument("--replicas", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    rng = make_rng(args.seed)
    print(f"{'tick':>8} {'rate':>10} {'qv_rate':>10} {'var(P(T))/T':>12}")
    for tick in (1.0, 0.3, 0.1, 0.03):
        lam = args.sigma2 / (args.u * tick ** 2) / 2
        prm = ToyParams(lam, lam, args.u, tick)
        ends, qv = [], []
        for _ in range(args.replicas):
            path = simulate_toy(prm, horizon=args.horizon, rng=rng)
            ends.append(path.prices[-1])
            qv.append(empirical_moments(path, args.horizon)[1])
        mean = sum(ends) / len(ends)
        var = sum((e - mean) ** 2 for e in ends) / (len(ends) - 1) / args.horizon
        print(f"{tick:8.3f} {2 * lam:10.1f} {sum(qv) / len(qv):10.4f} {var:12.4f}"
              f"   (se {var * math.sqrt(2 / (len(ends) - 1)):.3f})")


if __name__ == "__main__":
    main()
