#!/usr/bin/env python3
"""Final distance to the optimizer after a fixed simulated budget, per method and fleet size.

    python3 scripts/compare_dispatch.py --sizes 5 10 --budget 40 --out runs/compare
"""

import argparse
import os

from asyncfbs.cli import ALGORITHMS, cmd_run, config_from_dict


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[5])
    ap.add_argument("--budget", type=float, default=40.0, help="simulated seconds")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/compare")
    args = ap.parse_args()

    rows = []
    for n in args.sizes:
        cfg = config_from_dict({"problem": {"kind": "dispatch", "n_buildings": n}, "time_budget_s": args.budget,
                                "seed": args.seed})
        s = cmd_run(cfg, os.path.join(args.out, f"N{n}"), log=lambda *_: None)
        rows.append((n, s))

    print(f"relative distance to x* after {args.budget:g} s (simulated)")
    print("N".rjust(4) + "".join(a.rjust(18) for a in ALGORITHMS))
    for n, s in rows:
        print(str(n).rjust(4) + "".join(f"{s['algorithms'][a]['final_distance']:18.4e}" for a in ALGORITHMS))
    print("\nmean updates per agent class (async_aggregated)")
    for n, s in rows:
        cls = s["algorithms"]["async_aggregated"]["updates_by_class"]
        print(f"N={n}: " + ", ".join(f"{k} {v:.1f}" for k, v in sorted(cls.items())))


if __name__ == "__main__":
    main()
