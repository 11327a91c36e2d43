"""Bitcoin optimal revenue at gamma=0, max_fork=95, H=1e6 with both solvers.

Writes results/bitcoin_revenue_{pto,osm}.csv.
"""
import argparse
import sys

from arrmdp.cli import main

ALPHAS = "0.3333333333333333,0.35,0.375,0.4,0.425,0.45,0.475"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-fork", default="95")
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--outdir", default="results")
    a = ap.parse_args()
    status = 0
    for solver in ("pto", "osm"):
        status |= main(["sweep", "--axis", "alpha", "--values", ALPHAS, "--gamma", "0",
                        "--max-fork", a.max_fork, "--horizon", "1e6", "--stop-threshold", "1e-5",
                        "--solver", solver, "--jobs", a.jobs,
                        "--out", f"{a.outdir}/bitcoin_revenue_{solver}.csv"])
    sys.exit(status)
