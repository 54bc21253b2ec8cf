#!/usr/bin/env python3
"""Discrete embedding constants under mesh refinement.

Tabulates the estimated sup of |u|_ell / |grad u|_p across resolutions; for
p = ell = 2 on the interval the values approach 1/pi, the reciprocal square
root of the first Dirichlet eigenvalue.
"""

import argparse
import math

from ccpde import build_mesh, estimate_embedding_constant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=1, choices=(1, 2))
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--ell", type=float, nargs="+", default=[1.5, 2.0, 4.0])
    ap.add_argument("--resolutions", type=int, nargs="+",
                    default=[16, 32, 64, 128, 256])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    header = "n".rjust(6) + "".join(f"  ell={ell:<10g}" for ell in args.ell)
    print(header)
    for n in args.resolutions:
        mesh = build_mesh(args.dim, n)
        row = f"{n:6d}"
        for ell in args.ell:
            c = estimate_embedding_constant(mesh, args.p, ell, seed=args.seed)
            row += f"  {c:<14.10f}"
        print(row)
    if args.dim == 1 and args.p == 2.0 and 2.0 in args.ell:
        print(f"\ncontinuum reference for p = ell = 2: 1/pi = {1/math.pi:.10f}")


if __name__ == "__main__":
    main()
