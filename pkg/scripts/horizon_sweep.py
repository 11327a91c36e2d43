"""Normalized revenue versus expected horizon (Bitcoin, gamma=0.5, max_fork=50)."""
import argparse
import sys

from arrmdp.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0.35,0.4,0.45")
    ap.add_argument("--horizons", default="1e2,1e3,1e4,1e5,1e6,1e7")
    ap.add_argument("--outdir", default="results")
    a = ap.parse_args()
    status = 0
    for alpha in a.alphas.split(","):
        status |= main(["sweep", "--axis", "horizon", "--values", a.horizons, "--alpha", alpha,
                        "--gamma", "0.5", "--max-fork", "50",
                        "--out", f"{a.outdir}/horizon_alpha{alpha}.csv"])
    sys.exit(status)
