"""Score the immune algorithm against brute-force fronts at several grid resolutions.

    python3 scripts/front_quality.py --samples 41 201 --seeds 10

For each oracle instance and grid resolution, prints the share of archive
points that are eps-consistent with the grid front, plus the share of grid
front points covered by the archive.
"""

import argparse
import time

import numpy as np

from microgrid_moia.moia import MoiaParams, run_moia
from microgrid_moia.oracle import CONSTRAINED_FORM, GridSpec, brute_force_front, front_coverage
from microgrid_moia.scenario import oracle_instances


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--samples", type=int, nargs="+", default=[41, 201])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--eps", type=float, default=0.01)
    args = ap.parse_args()

    for name, problem in oracle_instances().items():
        archives = [run_moia(problem, MoiaParams(seed=s)) for s in range(args.seeds)]
        for n in args.samples:
            t0 = time.perf_counter()
            ref = brute_force_front(problem, GridSpec.for_problem(problem, n), CONSTRAINED_FORM)
            secs = time.perf_counter() - t0
            cons, covd = [], []
            for a in archives:
                cov = front_coverage(a.F[:, :-1], ref.F, args.eps)
                cons.append(cov.candidate_consistent)
                covd.append(cov.reference_covered)
            print(
                f"{name:12s} grid {n:4d}^2 front {len(ref):5d} ({secs:5.1f}s)  "
                f"consistent min {min(cons):.3f} mean {np.mean(cons):.3f}  "
                f"covered mean {np.mean(covd):.3f}  f-range {np.round(np.ptp(ref.F, axis=0), 3).tolist()}"
            )


if __name__ == "__main__":
    main()
