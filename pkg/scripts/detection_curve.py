"""Decoy detection rate against the number of decoys, as CSV.

    python scripts/detection_curve.py --trials 100000 --seed 0 > curve.csv
"""
import argparse
import sys

from bqt.security import EveStrategy, curve_to_csv, detection_curve

STRATEGIES = {
    "intercept-resend": EveStrategy.intercept_resend("random"),
    "intercept-resend-Z": EveStrategy.intercept_resend("Z"),
    "entangle-measure": EveStrategy.entangle_measure(),
    "none": EveStrategy.none(),
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-d", type=int, default=10)
    p.add_argument("--strategy", choices=tuple(STRATEGIES), nargs="*", default=list(STRATEGIES))
    args = p.parse_args()
    first = True
    for name in args.strategy:
        pts = detection_curve(STRATEGIES[name], range(0, args.max_d + 1), args.trials, args.seed)
        text = curve_to_csv(pts)
        sys.stdout.write(text if first else text.split("\n", 1)[1])
        first = False
        off = [p.d for p in pts if not p.within_3sigma]
        if off:
            print(f"{name}: outside 3 sigma at d={off}", file=sys.stderr)


if __name__ == "__main__":
    main()
