"""Run the acceptance criteria and print one line per criterion.

    python scripts/run_acceptance.py [--only 1,3,5] [--seed 0]
"""

import argparse
import sys

from twisted_riesz.acceptance import gate, run_all


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", help="comma-separated criterion numbers")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    only = {int(k) for k in args.only.split(",")} if args.only else None
    results = run_all(args.seed, only, echo=print)
    return 0 if gate(results) else 2


if __name__ == "__main__":
    sys.exit(main())
