"""Exhaustive grid reference fronts and front-coverage scoring.

Used to check the penalty-form / constrained-form equivalence on small
instances and to score the immune algorithm against a brute-force front.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .moia import nondominated_mask

PENALTY_FORM = "penalty"
CONSTRAINED_FORM = "constrained"
DEFAULT_BUDGET = 10**6
DEFAULT_SAMPLES = 41


class GridBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if not len(self.lower) == len(self.upper) == len(self.counts):
            raise ValueError("lower, upper and counts must have one entry per dimension")
        if any(c < 2 for c in self.counts):
            raise ValueError("need at least two samples per dimension")

    @classmethod
    def for_problem(cls, problem, samples: int = DEFAULT_SAMPLES, budget: int = DEFAULT_BUDGET) -> "GridSpec":
        lo = tuple(float(v) for v in problem.lower)
        return cls(lo, tuple(float(v) for v in problem.upper), (samples,) * len(lo), budget)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts, dtype=object))

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Grid points and their integer multi-indices, in C order."""
        if self.size > self.budget:
            raise GridBudgetExceeded(f"grid has {self.size} points, budget is {self.budget}")
        axes = [np.linspace(lo, hi, c) for lo, hi, c in zip(self.lower, self.upper, self.counts)]
        idx = np.indices(self.counts).reshape(len(self.counts), -1).T
        X = np.column_stack([ax[i] for ax, i in zip(axes, idx.T)])
        return X, idx


@dataclass(frozen=True, eq=False)
class ReferenceFront:
    X: np.ndarray
    F: np.ndarray  # objectives without the penalty column
    index: np.ndarray  # grid multi-indices of the members

    def __len__(self):
        return len(self.X)

    def index_set(self) -> set[tuple[int, ...]]:
        return {tuple(int(v) for v in row) for row in self.index}


@dataclass(frozen=True)
class FunctionProblem:
    """Box-bounded toy problem from plain callables.

    ``objectives`` maps ``(n, d)`` to ``(n, m)`` without a penalty column;
    ``penalty`` defaults to zero everywhere and ``feasible`` to ``penalty == 0``.
    """

    lower: np.ndarray
    upper: np.ndarray
    objectives: Callable[[np.ndarray], np.ndarray]
    penalty: Callable[[np.ndarray], np.ndarray] | None = None
    feasible_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def evaluate(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        G = np.asarray(self.objectives(X), dtype=float).reshape(len(X), -1)
        pen = np.zeros(len(X)) if self.penalty is None else np.asarray(self.penalty(X), dtype=float)
        return np.column_stack([G, pen])

    def feasible(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.feasible_fn is not None:
            return np.asarray(self.feasible_fn(X), dtype=bool)
        if self.penalty is None:
            return np.ones(len(X), dtype=bool)
        return np.asarray(self.penalty(X)) == 0


def brute_force_front(problem, grid: GridSpec, mode: str = PENALTY_FORM) -> ReferenceFront:
    """Pareto-optimal grid points of ``problem``.

    ``penalty`` mode filters the full objective vector (penalty included) over
    the whole grid and then keeps zero-penalty points. ``constrained`` mode
    drops infeasible points with ``problem.feasible`` first and filters the
    objectives without the penalty column.
    """
    X, idx = grid.points()
    F = problem.evaluate(X)
    if mode == PENALTY_FORM:
        keep = nondominated_mask(F) & (F[:, -1] == 0)
    elif mode == CONSTRAINED_FORM:
        feasible = np.flatnonzero(problem.feasible(X))
        keep = np.zeros(len(X), dtype=bool)
        keep[feasible[nondominated_mask(F[feasible, :-1])]] = True
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ReferenceFront(X[keep], F[keep, :-1], idx[keep])


@dataclass(frozen=True)
class Coverage:
    candidate_consistent: float  # share of candidate points weakly eps-dominated by the reference
    reference_covered: float  # share of reference points weakly eps-dominated by the candidate


def _eps_dominated_share(points: np.ndarray, by: np.ndarray, tol: np.ndarray) -> float:
    hit = [bool(np.any(np.all(by <= p + tol, axis=1))) for p in points]
    return float(np.mean(hit))


def front_coverage(candidate, reference, epsilon: float | Sequence[float] = 0.01) -> Coverage:
    """Additive epsilon-coverage between two fronts, scaled by the reference ranges.

    A candidate point ``u`` is consistent when some reference point ``r`` has
    ``r_j <= u_j + epsilon_j * range_j`` in every dimension, with
    ``range_j`` the spread of the reference front.
    """
    cand = np.atleast_2d(np.asarray(candidate, dtype=float))
    ref = np.atleast_2d(np.asarray(reference, dtype=float))
    if cand.size == 0 or ref.size == 0:
        raise ValueError("both fronts must be nonempty")
    if cand.shape[1] != ref.shape[1]:
        raise ValueError(f"dimension mismatch: {cand.shape[1]} vs {ref.shape[1]}")
    tol = np.broadcast_to(np.asarray(epsilon, dtype=float), (ref.shape[1],)) * np.ptp(ref, axis=0)
    return Coverage(_eps_dominated_share(cand, ref, tol), _eps_dominated_share(ref, cand, tol))
