"""Empirical envelope constants sup |kernel| / envelope across lambda.

    python scripts/envelope_scan.py [--family b_l] [--j 8] [--l 8]
"""

import argparse

from twisted_riesz.oscillatory_kernels import KernelEnvelope, envelope_check


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=("exterior", "b_l", "K_j"), default="exterior")
    ap.add_argument("--j", type=int, default=8)
    ap.add_argument("--l", type=int, default=8)
    ap.add_argument("--ell", type=int, default=2)
    ap.add_argument("--kmin", type=int, default=6)
    ap.add_argument("--kmax", type=int, default=8)
    args = ap.parse_args()
    env = KernelEnvelope(args.family, ell=args.ell, j=args.j, l=args.l)
    rep = envelope_check(env, [2.0**k for k in range(args.kmin, args.kmax + 1)])
    for lam, c in zip(rep.x, rep.values):
        print(f"lambda {lam:6.0f}  constant {c:.4e}")
    print("stable" if rep.passed else "growing constants")


if __name__ == "__main__":
    main()
