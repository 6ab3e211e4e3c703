"""Command line entry point.

    microgrid-moia simulate SCENARIO [--seed N] [--horizon K] [--out DIR] [--dump-front] [--verify]
    microgrid-moia verify SCENARIO [--seed N] [--seeds S]

``simulate`` writes ``trace.csv`` (and ``fronts/step_KKK.jsonl`` with
``--dump-front``) into the output directory. ``verify`` checks the
penalty/constrained equivalence and the solver's coverage of the brute-force
front on the scenario's first step. Exit status is 0 only if every requested
operation succeeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .model import StepProblem
from .moia import MoiaParams, run_moia
from .oracle import (
    CONSTRAINED_FORM,
    DEFAULT_BUDGET,
    DEFAULT_SAMPLES,
    PENALTY_FORM,
    GridBudgetExceeded,
    GridSpec,
    brute_force_front,
    front_coverage,
)
from .scenario import ScenarioError, config_from_dict, load_document, moia_params_from_dict
from .simulator import SimulationTrace, simulate, step_rng

log = logging.getLogger("microgrid_moia")

DEFAULT_SEED = 1
COVERAGE_EPS = 0.01
COVERAGE_MIN = 0.90


def trace_columns(n_microgrids: int, n_storage: int) -> list[str]:
    cols = ["k", "lambda"]
    for n in range(1, n_microgrids + 1):
        cols += [f"p_g{n}", f"p_d{n}", f"v{n}"]
        if n <= n_storage:
            cols.append(f"s{n}")
    return cols + ["U_d", "U_g", "U_iso", "U_c", "archive_size", "fallback"]


def _num(x) -> str:
    return repr(float(x))


def write_trace(trace: SimulationTrace, path: Path, n_storage: int) -> None:
    n = len(trace.records[0].dispatch)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(n, n_storage))
        for r in trace.records:
            row = [r.k, _num(r.price)]
            for i in range(n):
                row += [_num(r.dispatch[i]), _num(r.demand[i]), _num(r.res_output[i])]
                if i < n_storage:
                    row.append(_num(r.stored_after[i]))
            row += [_num(r.u_d), _num(r.u_g), _num(r.u_iso), _num(r.u_c), r.archive_size, int(r.fallback)]
            w.writerow(row)


def write_fronts(trace: SimulationTrace, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for r, archive in zip(trace.records, trace.archives):
        with open(directory / f"step_{r.k:03d}.jsonl", "w") as fh:
            for x, f in zip(archive.X.tolist(), archive.F.tolist()):
                rec = {"k": r.k, "price": x[0], "dispatch": x[1:], "objectives": f}
                fh.write(json.dumps(rec) + "\n")


def verify(
    config, params: MoiaParams, seeds: int = 1, samples: int = DEFAULT_SAMPLES, budget: int = DEFAULT_BUDGET
) -> tuple[bool, list[str]]:
    """Equivalence and coverage checks on step 0. Returns (ok, report lines).

    A grid larger than ``budget`` is reported as SKIP and does not fail.
    """
    problem = StepProblem(config, config.initial_state(), 0)
    grid = GridSpec.for_problem(problem, samples, budget)
    lines = []
    try:
        t0 = time.perf_counter()
        pen = brute_force_front(problem, grid, PENALTY_FORM)
        con = brute_force_front(problem, grid, CONSTRAINED_FORM)
    except GridBudgetExceeded as exc:
        return True, [f"SKIP equivalence: {exc}", f"SKIP coverage: {exc}"]
    same = pen.index_set() == con.index_set()
    lines.append(
        f"{'PASS' if same else 'FAIL'} equivalence: penalty-form {len(pen)} points, "
        f"constrained-form {len(con)} points, grid {grid.size} ({time.perf_counter() - t0:.2f}s)"
    )
    ok = same
    if len(con) == 0:
        lines.append("SKIP coverage: empty reference front")
        return ok, lines
    for s in range(seeds):
        seed = params.seed + s
        archive = run_moia(problem, replace(params, seed=seed), rng=step_rng(seed, 0))
        if archive.empty:
            lines.append(f"FAIL coverage seed={seed}: empty archive")
            ok = False
            continue
        cov = front_coverage(archive.F[:, :-1], con.F, COVERAGE_EPS)
        passed = cov.candidate_consistent >= COVERAGE_MIN
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} coverage seed={seed}: "
            f"{cov.candidate_consistent:.3f} of {len(archive)} archive points eps-consistent "
            f"(need {COVERAGE_MIN:.2f}); reference covered {cov.reference_covered:.3f}"
        )
    return ok, lines


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="microgrid-moia", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", type=Path, help="scenario YAML/JSON file")
        p.add_argument("--seed", type=int, default=None, help=f"run seed (scenario value, else {DEFAULT_SEED})")
        p.add_argument("--horizon", type=int, default=None, help="override the scenario horizon")
        p.add_argument("--n-nom", type=int, default=None)
        p.add_argument("--n-max", type=int, default=None)
        p.add_argument("--t-max", type=int, default=None)

    sim = sub.add_parser("simulate", help="run the closed-loop simulation")
    common(sim)
    sim.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    sim.add_argument("--dump-front", action="store_true", help="write every step's archive")
    sim.add_argument("--verify", action="store_true", help="also run the oracle checks")
    sim.add_argument("--seeds", type=int, default=1, help=argparse.SUPPRESS)

    ver = sub.add_parser("verify", help="oracle checks on the first step")
    common(ver)
    ver.add_argument("--seeds", type=int, default=1, help="number of solver seeds to score")
    return parser


def _load(args):
    doc = load_document(args.scenario)
    config = config_from_dict(doc, args.scenario.parent, args.horizon)
    params = moia_params_from_dict(doc)
    overrides = {k: v for k, v in (("n_nom", args.n_nom), ("n_max", args.n_max), ("t_max", args.t_max)) if v is not None}
    if args.seed is not None:
        overrides["seed"] = args.seed
    elif "seed" not in doc.get("moia", {}):
        overrides["seed"] = DEFAULT_SEED
    return config, replace(params, **overrides)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config, params = _load(args)
    except (OSError, ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    ok = True
    if args.command == "simulate":
        try:
            args.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            print(f"error: cannot create output directory: {exc}", file=sys.stderr)
            return 2
        trace = simulate(config, params, keep_archives=args.dump_front)
        write_trace(trace, args.out / "trace.csv", config.n_storage)
        if args.dump_front:
            write_fronts(trace, args.out / "fronts")
        n_fallback = sum(r.fallback for r in trace.records)
        print(f"simulated {len(trace)} steps ({n_fallback} fallback) -> {args.out / 'trace.csv'} "
              f"[fingerprint {trace.fingerprint}]")
    if args.command == "verify" or args.verify:
        ok, lines = verify(config, params, seeds=args.seeds)
        print("\n".join(lines))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
