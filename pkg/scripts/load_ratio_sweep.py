"""Mean overall cost versus load ratio (busiest / quietest area) at a fixed total rate."""
import argparse
import csv
import sys

from chargernet.scenario import build_default_scenario
from chargernet.simulator import sweep_ratio

SCHEMES = ("nearest", "individual", "optimal")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--ratios", type=float, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    sc = build_default_scenario()
    seeds = [sc.seed + i for i in range(args.seeds)]
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["ratio", "scheme", "mean_overall_cost", "ci_low", "ci_high", "mean_estimated_cost"])
    for scheme in SCHEMES:
        for p in sweep_ratio(sc, scheme, args.ratios, seeds, args.workers):
            w.writerow([p.ratio, p.scheme, round(p.mean_overall_cost, 6), round(p.ci_low, 6),
                        round(p.ci_high, 6), round(p.mean_estimated_cost, 6)])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
