"""Security thresholds for Bitcoin (several gamma) and Ethereum."""
import argparse
import sys

from arrmdp.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bitcoin-fork", default="95")
    ap.add_argument("--ethereum-fork", default="10")
    ap.add_argument("--ethereum-horizon", default="1e5")
    ap.add_argument("--outdir", default="results")
    a = ap.parse_args()
    status = 0
    for gamma in ("0", "0.25", "0.5", "0.75"):
        status |= main(["threshold", "--model", "bitcoin", "--gamma", gamma,
                        "--max-fork", a.bitcoin_fork, "--lo", "0.01", "--hi", "0.45",
                        "--tol", "1e-3", "--out", f"{a.outdir}/threshold_bitcoin_g{gamma}.json"])
    status |= main(["threshold", "--model", "ethereum", "--max-fork", a.ethereum_fork,
                    "--horizon", a.ethereum_horizon, "--stop-threshold", "1e-8",
                    "--lo", "0.24", "--hi", "0.26", "--tol", "1e-4",
                    "--out", f"{a.outdir}/threshold_ethereum_fork{a.ethereum_fork}.json"])
    sys.exit(status)
