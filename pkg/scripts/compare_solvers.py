"""Linear solves and wall time of PTO versus ratio bisection (Bitcoin, gamma=0)."""
import argparse
import sys

from arrmdp.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", default="0.4")
    ap.add_argument("--forks", default="10,20,40,60,80,95")
    ap.add_argument("--outdir", default="results")
    a = ap.parse_args()
    sys.exit(main(["compare", "--alpha", a.alpha, "--gamma", "0", "--max-fork-list", a.forks,
                   "--horizon", "1e6", "--out", f"{a.outdir}/compare_alpha{a.alpha}.csv"]))
