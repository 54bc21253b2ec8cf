#!/usr/bin/env python3
"""Run the signed pipeline on the benchmark problem and print a summary.

Defaults reproduce the standard setup: unit interval, n=128, p=2, q=1.5,
s=4, p-Dirichlet integrand, lambda at half the truncation threshold.
"""

import argparse
import time

from ccpde import PLaplacian, ProblemSpec, SolveOptions, WeightedPLaplacian, \
    solve_signed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=1, choices=(1, 2))
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--q", type=float, default=1.5)
    ap.add_argument("--s", type=float, default=4.0)
    ap.add_argument("--fraction", type=float, default=0.5,
                    help="lambda as a fraction of the threshold")
    ap.add_argument("--family", default="p_laplacian",
                    choices=("p_laplacian", "weighted_p_laplacian"))
    ap.add_argument("--kappa", type=float, default=0.5,
                    help="weight strength of the weighted family")
    ap.add_argument("--no-mountain-pass", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.family == "p_laplacian":
        family = PLaplacian(args.p)
    else:
        family = WeightedPLaplacian(args.p, args.kappa)
    spec = ProblemSpec(dim=args.dim, n=args.n, p=args.p, q=args.q, s=args.s,
                       lam=None, family=family)
    options = SolveOptions(lambda_fraction=args.fraction, seed=args.seed,
                           enable_mountain_pass=not args.no_mountain_pass)

    t0 = time.perf_counter()
    report = solve_signed(spec, options)
    elapsed = time.perf_counter() - t0

    print(f"threshold lambda1 = {report.lam1:.8f}  "
          f"lambda = {report.spec.lam:.8f}")
    print(f"embedding constants: c_q = {report.c_q:.8f}  c_s = {report.c_s:.8f}")
    if report.h_analysis is not None:
        a = report.h_analysis
        print(f"curve: x_max = {a.x_max:.6f}  h_max = {a.h_max:.6f}  "
              f"r0 = {a.r0:.6f}  r1 = {a.r1:.6f}")
    print(f"{'kind':<14} {'sign':<9} {'energy':>15} {'residual':>10} "
          f"{'|grad u|_p':>11} {'|u|_inf':>9} {'iters':>6}")
    for s in report.solutions:
        print(f"{s.kind:<14} {s.sign:<9} {s.energy:>15.8e} {s.residual:>10.2e} "
              f"{s.seminorm:>11.5f} {s.sup_norm:>9.5f} {s.iterations:>6d}")
    for f in report.failures:
        print(f"FAILURE [{f['stage']}/{f['variant']}]: {f['message']}")
    print(f"total {elapsed:.2f}s  stage timings: "
          + "  ".join(f"{k}={v:.2f}s" for k, v in report.timings.items()))


if __name__ == "__main__":
    main()
