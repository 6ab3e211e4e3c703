"""Check penalty-form and constrained-form fronts agree on random single-storage instances.

    python3 scripts/verify_equivalence.py --instances 200 --samples 41
"""

import argparse

import numpy as np

from microgrid_moia.oracle import CONSTRAINED_FORM, PENALTY_FORM, GridSpec, brute_force_front
from microgrid_moia.scenario import single_storage_problem

CURVES = [(0.01, -0.12, 0.26), (-0.01, 0.0, 0.13), (-0.01, 0.02, 0.08)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--instances", type=int, default=200)
    ap.add_argument("--samples", type=int, default=41)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    failures = 0
    for i in range(args.instances):
        secure = rng.uniform(50, 150)
        cap = (secure, secure * rng.uniform(1.5, 2.5))
        problem = single_storage_problem(
            curve=CURVES[i % 3],
            cap=cap,
            rate_limit=rng.uniform(0.0, 0.2) * cap[1],
            stored=rng.uniform(*cap),
            base=rng.uniform(30, 150),
            res=rng.uniform(1, 80),
            omega=rng.uniform(1.5, 3.5),
            cost=(rng.uniform(0, 0.05), rng.uniform(0, 1), rng.uniform(0, 2)),
        )
        grid = GridSpec.for_problem(problem, args.samples)
        pen = brute_force_front(problem, grid, PENALTY_FORM)
        con = brute_force_front(problem, grid, CONSTRAINED_FORM)
        if pen.index_set() != con.index_set():
            failures += 1
            print(f"instance {i}: penalty {len(pen)} vs constrained {len(con)} points")
    print(f"{args.instances - failures}/{args.instances} instances with identical fronts")
    raise SystemExit(1 if failures else 0)


if __name__ == "__main__":
    main()
