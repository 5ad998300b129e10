"""Decay of the stationary-phase remainder |E(lambda)| at a fixed pair near the sphere.

    python scripts/e_decay.py [--j 3] [--eps0 0.5] [--kmin 8] [--kmax 14]
"""

import argparse

import numpy as np

from twisted_riesz.stationary_phase import DecayCase, e_decay_scan


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--j", type=int, default=3)
    ap.add_argument("--eps0", type=float, default=0.5)
    ap.add_argument("--kmin", type=int, default=8)
    ap.add_argument("--kmax", type=int, default=14)
    args = ap.parse_args()
    lams = 2.0 ** np.arange(args.kmin, args.kmax + 1)
    rep = e_decay_scan(lams, DecayCase(j=args.j, eps0=args.eps0))
    print(f"{'lambda':>8} {'|E|':>12} {'|leading|':>12}")
    for lam, e, lead in zip(rep.x, rep.values, rep.extra["leading_abs"]):
        print(f"{lam:8.0f} {e:12.4e} {lead:12.4e}")
    print(f"log-log slope {rep.slope:.3f} (expected -1.5)")


if __name__ == "__main__":
    main()
