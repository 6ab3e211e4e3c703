"""Closed-loop hourly market simulation.

Each step builds the per-step design problem, runs the immune algorithm from
a cold start, picks the knee of the archive and advances the storage levels.
If the archive comes back empty the always-feasible balancing dispatch is
used instead, so a run never stalls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import NetworkState, ScenarioConfig, StepProblem, constraint_penalty
from .moia import IterationStats, MoiaParams, ParetoArchive, knee_select, run_moia
from .scenario import fingerprint

log = logging.getLogger(__name__)

KNEE_DIMS = (0, 1, 2)


@dataclass(frozen=True, eq=False)
class StepRecord:
    k: int
    price: float
    dispatch: np.ndarray  # p_g for every microgrid
    demand: np.ndarray
    res_output: np.ndarray
    stored_before: np.ndarray
    stored_after: np.ndarray
    objectives: np.ndarray  # (-U_d, -U_g, -sum stored_after, U_c)
    archive_size: int
    fallback: bool

    @property
    def u_d(self) -> float:
        return -float(self.objectives[0])

    @property
    def u_g(self) -> float:
        return -float(self.objectives[1])

    @property
    def u_iso(self) -> float:
        return -float(self.objectives[2])

    @property
    def u_c(self) -> float:
        return float(self.objectives[3])


@dataclass
class SimulationTrace:
    records: list[StepRecord]
    fingerprint: str
    seed: int
    archives: list[ParetoArchive] = field(default_factory=list)

    def __len__(self):
        return len(self.records)


def step_rng(seed: int, k: int) -> np.random.Generator:
    """Per-step stream, independent of how many steps came before."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k])))


def simulate_step(
    state: NetworkState,
    config: ScenarioConfig,
    params: MoiaParams,
    k: int,
    on_iteration: Callable[[IterationStats], None] | None = None,
) -> tuple[StepRecord, NetworkState, ParetoArchive]:
    problem = StepProblem(config, state, k)
    archive = run_moia(problem, params, rng=step_rng(params.seed, k), on_iteration=on_iteration)
    if archive.empty:
        log.warning("step %d: no feasible antibody survived, using balancing dispatch", k)
        x = problem.fallback()
        fallback = True
    else:
        x = archive.X[knee_select(archive.F, KNEE_DIMS)]
        fallback = False

    f = problem.evaluate(x)[0]
    p_d, p_g, s_next = (a[0] for a in problem.flows(x))
    # the chosen design must be exactly feasible; anything else is a bug
    penalty = constraint_penalty(state.stored, s_next, config.cap_secure, config.cap_max, config.rate_limit)
    if penalty != 0:
        raise AssertionError(f"step {k}: chosen design violates storage constraints (U_c={penalty})")

    record = StepRecord(
        k=k,
        price=float(x[0]),
        dispatch=p_g,
        demand=p_d,
        res_output=state.res_output.copy(),
        stored_before=state.stored.copy(),
        stored_after=s_next,
        objectives=f,
        archive_size=len(archive),
        fallback=fallback,
    )
    return record, config.state_at(k + 1, s_next), archive


def simulate(
    config: ScenarioConfig,
    params: MoiaParams,
    on_iteration: Callable[[int, IterationStats], None] | None = None,
    keep_archives: bool = False,
) -> SimulationTrace:
    """Run the closed loop over ``config.horizon`` steps from the initial storage levels."""
    state = config.initial_state()
    records, archives = [], []
    for k in range(config.horizon):
        hook = None if on_iteration is None else (lambda stats, k=k: on_iteration(k, stats))
        record, state, archive = simulate_step(state, config, params, k, hook)
        records.append(record)
        if keep_archives:
            archives.append(archive)
        log.info("step %d: price %.4f, archive %d%s", k, record.price, record.archive_size,
                 " (fallback)" if record.fallback else "")
    return SimulationTrace(records, fingerprint(config, params), params.seed, archives)
