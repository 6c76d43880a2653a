"""Compare Monte Carlo survival curves P(N > n) with the certified gaps.

Reads a ladder manifest (from `bernfactory build` or build_catalog.py) and
prints, for each p and rung, the exact gap next to a 3-sigma Wilson band.
"""

import argparse
import json
from fractions import Fraction

from bernfactory.envelope import ladder_from_json
from bernfactory.simulator import exact_acceptance, monte_carlo_tails


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("manifest")
    ap.add_argument("--p", default="0.1,0.3,0.5,0.7,0.9")
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    with open(args.manifest) as fh:
        ladder = ladder_from_json(json.load(fh))
    ps = [float(x) for x in args.p.split(",")]
    stats = monte_carlo_tails(ladder, ps, args.reps, seed=args.seed, threads=args.threads)
    print("p      n       exact_gap   mc_low      mc_high     inside")
    for curve in stats.curves:
        exact = exact_acceptance(ladder.pairs, Fraction(curve.p))
        for n, (_, gap), (lo, hi) in zip(curve.levels, exact, curve.survival_bounds(3.0)):
            print(f"{curve.p:<6} {n:<7} {float(gap):<11.5g} {lo:<11.5g} {hi:<11.5g} {lo <= gap <= hi}")
        lo, hi = curve.output_interval(3.0)
        print(f"  output-1 frequency {curve.output_frequency():.4f} in [{lo:.4f}, {hi:.4f}], timeouts {curve.timeouts}")


if __name__ == "__main__":
    main()
