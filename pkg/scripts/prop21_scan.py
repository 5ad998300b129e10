"""Lower bound for the L^p operator norm of the local-window operator across lambda.

    python scripts/prop21_scan.py [--p 4] [--kmin 6] [--kmax 10] [--restarts 4]
"""

import argparse

from twisted_riesz.operator_lab import scaling_scan


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=4.0)
    ap.add_argument("--kmin", type=int, default=6)
    ap.add_argument("--kmax", type=int, default=10)
    ap.add_argument("--restarts", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    lams = [2.0**k for k in range(args.kmin, args.kmax + 1)]
    rep = scaling_scan("prop2.1", lams, p=args.p, restarts=args.restarts, seed=args.seed, iterations=100)
    for lam, v in zip(rep.x, rep.values):
        print(f"lambda {lam:8.0f}  norm >= {v:.5e}")
    print(f"slope {rep.slope:.3f} (expected about -1)")


if __name__ == "__main__":
    main()
