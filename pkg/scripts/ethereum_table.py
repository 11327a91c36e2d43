"""Ethereum optimal revenue over alpha (H=1e5, stop threshold 1e-7).

Fork 20 has about 2e5 states and takes tens of seconds per row; fork 10 is
the quick check.
"""
import argparse
import sys

from arrmdp.cli import main

ALPHAS = "0.25,0.275,0.3,0.325,0.35,0.375,0.4,0.425,0.45,0.475"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-fork", default="20")
    ap.add_argument("--alphas", default=ALPHAS)
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--outdir", default="results")
    a = ap.parse_args()
    sys.exit(main(["sweep", "--model", "ethereum", "--axis", "alpha", "--values", a.alphas,
                   "--max-fork", a.max_fork, "--horizon", "1e5", "--stop-threshold", "1e-7",
                   "--jobs", a.jobs, "--out", f"{a.outdir}/ethereum_fork{a.max_fork}.csv"]))
