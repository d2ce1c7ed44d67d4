#!/usr/bin/env python3
"""Squared distance of an asynchronous run against its guaranteed envelope, written as CSV.

    python3 scripts/rate_envelope.py --beta 0.5 --iters 20000 --out envelope.csv
"""

import argparse
import csv

import numpy as np

from asyncfbs import AgentProfile, AsyncParams, ScheduleConfig, TheoryInputs, check_iss, make_quadratic, measure_tau
from asyncfbs import run_async, theory_constants


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--beta", type=float, default=0.0)
    ap.add_argument("--fraction", type=float, default=0.9, help="eta as a fraction of eta_max")
    ap.add_argument("--iters", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="envelope.csv")
    args = ap.parse_args()

    inst = make_quadratic(3, 2, mu=0.5, L=1.0, seed=args.seed)
    pair = inst.pair()
    x_star = inst.reference()
    profiles = [AgentProfile.of_class(i, c) for i, c in enumerate(["small", "battery", "medium"])]
    sched = ScheduleConfig(profiles, seed=args.seed, tau_epochs=100)
    _, probe = run_async(pair, AsyncParams(gamma=pair.gamma, max_iters=args.iters, stop_tol=1e-300, dense=True),
                         sched)
    tau = int(measure_tau(probe).tau_obs)
    c = theory_constants(TheoryInputs(3, tau, pair.gamma, inst.L, inst.mu, args.beta))
    eta = args.fraction * c.eta_max
    res, _ = run_async(pair, AsyncParams(gamma=pair.gamma, eta=eta, beta=args.beta, max_iters=args.iters,
                                         stop_tol=1e-300, dense=True), sched, reference=x_star)
    V = res.distances ** 2
    rep = check_iss(V, c.r(eta), c.q(eta), 6 * tau)
    env = V[0] * rep.s ** np.arange(V.size)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("k", "V", "envelope"))
        for k in range(V.size):
            w.writerow((k, repr(float(V[k])), repr(float(env[k]))))
    print(f"tau_obs={tau} eta={eta:.4e} s={rep.s:.12f} envelope_ok={rep.envelope_ok} "
          f"recursion_fraction={rep.recursion_fraction:.4f} -> {args.out}")


if __name__ == "__main__":
    main()
