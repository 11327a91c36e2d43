"""Optimal revenue versus maximum fork length (Bitcoin, gamma=0.5, H=1e6)."""
import argparse
import sys

from arrmdp.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0.35,0.4,0.45")
    ap.add_argument("--forks", default="5,10,20,40,60,80")
    ap.add_argument("--outdir", default="results")
    a = ap.parse_args()
    status = 0
    for alpha in a.alphas.split(","):
        status |= main(["sweep", "--axis", "max_fork", "--values", a.forks, "--alpha", alpha,
                        "--gamma", "0.5", "--out", f"{a.outdir}/fork_alpha{alpha}.csv"])
    sys.exit(status)
