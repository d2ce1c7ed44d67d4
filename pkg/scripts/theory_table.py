#!/usr/bin/env python3
"""Largest guaranteed relaxation and rate for a grid of agent counts, delays and momenta.

    python3 scripts/theory_table.py --gamma 1 --mu 0.5 --L 1
"""

import argparse

from asyncfbs import ParameterError, TheoryInputs, best_delta_epsilon, theory_constants


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--mu", type=float, default=0.5)
    ap.add_argument("--L", type=float, default=1.0)
    ap.add_argument("--N", type=int, nargs="+", default=[2, 5, 10, 20, 50])
    ap.add_argument("--tau", type=int, nargs="+", default=[1, 10, 100])
    ap.add_argument("--beta", type=float, nargs="+", default=[0.0, 0.5, 0.99])
    ap.add_argument("--search", action="store_true", help="optimise delta, epsilon per row")
    args = ap.parse_args()

    print(f"{'N':>4} {'tau':>5} {'beta':>5} {'X':>12} {'eta_max':>12} {'rate(0.9 eta_max)':>19}")
    for N in args.N:
        for tau in args.tau:
            for beta in args.beta:
                try:
                    inp = TheoryInputs(N, tau, args.gamma, args.L, args.mu, beta)
                    if args.search:
                        d, e, _ = best_delta_epsilon(inp.nu, inp.X)
                        inp = TheoryInputs(N, tau, args.gamma, args.L, args.mu, beta, d, e)
                    c = theory_constants(inp)
                except ParameterError as exc:
                    print(f"{N:>4} {tau:>5} {beta:>5} {exc}")
                    continue
                eta = 0.9 * c.eta_max
                print(f"{N:>4} {tau:>5} {beta:>5} {c.X:12.4g} {c.eta_max:12.4e} {c.rate(eta):19.12f}")


if __name__ == "__main__":
    main()
