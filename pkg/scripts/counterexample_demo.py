"""Scaled-error sweep and Hölder probe quotients for the theta-series target."""

import argparse
from fractions import Fraction

from bernfactory.counterexample import build_counterexample, divergence_report, rate_ratio, rate_sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", default="1/2")
    ap.add_argument("--log-m-max", type=int, default=76)
    ap.add_argument("--points", type=int, default=257)
    args = ap.parse_args()
    cx = build_counterexample(Fraction(args.alpha), 1 << args.log_m_max)
    print(f"scales 2^{cx.scales[0].bit_length() - 1} .. 2^{cx.scales[-1].bit_length() - 1}")
    rows = rate_sweep(cx, points=args.points)
    for r in rows:
        print(f"n=2^{r.n.bit_length() - 1:<4} scaled error {r.scaled:.4f}")
    print(f"last/first ratio {rate_ratio(rows):.3f}")
    report = divergence_report(cx, points=33)
    for m, q, p in zip(report.scales, report.quotients, report.predicted):
        print(f"m=2^{m.bit_length() - 1:<4} quotient {q:.4g}  predicted lower bound {p:.4g}")
    print(f"growth {report.growth():.3f}, increasing {report.increasing}")


if __name__ == "__main__":
    main()
