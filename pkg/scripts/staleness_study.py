"""How the status-report period changes each scheme's realized cost."""
import argparse

from chargernet.scenario import build_default_scenario
from chargernet.simulator import run_replications

SCHEMES = ("nearest", "individual", "optimal")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--periods", type=float, nargs="+", default=[0.0, 0.5, 1.0, 2.0, 5.0])
    args = ap.parse_args()

    print("period_min," + ",".join(SCHEMES))
    for period in args.periods:
        sc = build_default_scenario(staleness=period)
        seeds = [sc.seed + i for i in range(args.seeds)]
        means = [run_replications(sc, s, seeds).summary.mean for s in SCHEMES]
        print(f"{period}," + ",".join(f"{m:.3f}" for m in means))


if __name__ == "__main__":
    main()
