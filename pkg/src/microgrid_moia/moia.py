"""Constrained multiobjective immune algorithm (MOIA).

The algorithm works on any problem exposing box bounds ``lower``/``upper``
and a batch ``evaluate(X) -> F`` whose last column is a non-negative
constraint penalty (zero iff feasible). All objectives are minimised.

Population members are kept as parallel arrays ``X`` (decision vectors) and
``F`` (objective vectors) in insertion order; insertion order is what the
tie rules below refer to.

Random stream: one ``numpy.random.Generator(PCG64(seed))`` per run. The
initial population consumes ``N_nom * d`` uniforms row by row. Each gene
operation then draws, per parent and per mutant, ``delta`` first and then
the ``d`` components of the fresh random vector.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

# relative tolerance under which two knee scores count as tied
KNEE_TIE_TOL = 1e-9
# largest population filtered with an all-pairs comparison
_BROADCAST_LIMIT = 1024


class Problem(Protocol):
    lower: np.ndarray
    upper: np.ndarray

    def evaluate(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class MoiaParams:
    n_nom: int = 80
    n_max: int = 320
    t_max: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.n_nom <= self.n_max:
            raise ValueError("need 0 < n_nom <= n_max")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")


@dataclass
class Population:
    X: np.ndarray
    F: np.ndarray
    t: int = 0

    def __len__(self):
        return len(self.X)

    def take(self, idx) -> "Population":
        return Population(self.X[idx], self.F[idx], self.t)


@dataclass
class IterationStats:
    """Population sizes observed during one pass of the main loop."""

    t: int
    n_p: int
    clonal_rate: int
    expanded: int
    after_prune: int
    after_filter: int
    after_truncate: int


@dataclass
class ParetoArchive:
    """Final feasible nondominated antibodies and their objective vectors."""

    X: np.ndarray
    F: np.ndarray
    history: list[IterationStats] = field(default_factory=list)

    def __len__(self):
        return len(self.X)

    @property
    def empty(self) -> bool:
        return len(self.X) == 0

    @property
    def f_max(self) -> np.ndarray:
        return self.F.max(axis=0)

    @property
    def f_min(self) -> np.ndarray:
        return self.F.min(axis=0)


def dominates(u, v) -> bool:
    """True if ``u`` is no worse than ``v`` everywhere and strictly better somewhere."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return bool(np.all(u <= v) and np.any(u < v))


def nondominated_mask(F) -> np.ndarray:
    """Mask of rows of ``F`` not dominated by any other row.

    Rows with identical objective vectors do not dominate each other, so all
    copies of a nondominated vector are kept.
    """
    F = np.asarray(F, dtype=float)
    if len(F) <= _BROADCAST_LIMIT:
        n = len(F)
        le = np.ones((n, n), dtype=bool)
        lt = np.zeros((n, n), dtype=bool)
        for col in F.T:
            le &= col[:, None] <= col[None, :]
            lt |= col[:, None] < col[None, :]
        return ~np.any(le & lt, axis=0)
    # a dominator never sorts after its victim in (sum, lexicographic) order,
    # so each block only needs the accepted points before it plus itself
    order = np.lexsort(tuple(F.T[::-1]) + (F.sum(axis=1),))
    accepted = np.empty((0, F.shape[1]))
    mask = np.zeros(len(F), dtype=bool)
    for start in range(0, len(F), _BROADCAST_LIMIT):
        block = order[start : start + _BROADCAST_LIMIT]
        G = F[block]
        keep = nondominated_mask(G)
        for chunk in range(0, len(accepted), _BROADCAST_LIMIT):
            A = accepted[chunk : chunk + _BROADCAST_LIMIT]
            le = np.all(A[:, None, :] <= G[None, :, :], axis=2)
            lt = np.any(A[:, None, :] < G[None, :, :], axis=2)
            keep &= ~np.any(le & lt, axis=0)
        mask[block[keep]] = True
        accepted = np.vstack([accepted, G[keep]])
    return mask


def pareto_filter(pop: Population) -> Population:
    return pop.take(nondominated_mask(pop.F))


def clonal_rate(n_p: int, n_max: int) -> int:
    return n_max // n_p


def gene_operation(X, lower, upper, n_max: int, rng: np.random.Generator) -> np.ndarray:
    """Clone every antibody and mutate the clones by convex recombination.

    Each row of ``X`` produces ``n_max // len(X) - 1`` mutants
    ``delta * parent + (1 - delta) * fresh`` where ``delta ~ U[0, 1]`` and
    ``fresh`` is uniform over the box. Returns the mutants only, grouped by
    parent in parent order.
    """
    X = np.asarray(X, dtype=float)
    n_p, d = X.shape
    n_mut = clonal_rate(n_p, n_max) - 1
    if n_mut <= 0:
        return np.empty((0, d))
    u = rng.random((n_p, n_mut, 1 + d))
    delta = u[..., :1]
    fresh = lower + u[..., 1:] * (upper - lower)
    mutants = delta * X[:, None, :] + (1.0 - delta) * fresh
    return mutants.reshape(n_p * n_mut, d)


def constraint_prune(penalty, n_nom: int) -> np.ndarray:
    """Indices kept after removing the worst constraint violators.

    Members with the largest positive penalty go first, earliest inserted
    first among equal penalties, until at most ``n_nom`` remain or no
    violator is left. Survivors keep their order.
    """
    penalty = np.asarray(penalty, dtype=float)
    n = len(penalty)
    violators = np.flatnonzero(penalty > 0)
    n_remove = min(len(violators), max(n - n_nom, 0))
    if n_remove == 0:
        return np.arange(n)
    order = violators[np.lexsort((violators, -penalty[violators]))]
    keep = np.ones(n, dtype=bool)
    keep[order[:n_remove]] = False
    return np.flatnonzero(keep)


def _crowding(F: np.ndarray, orders: list[np.ndarray], alive: np.ndarray) -> np.ndarray:
    fit = np.zeros(len(F))
    for j, order in enumerate(orders):
        o = order[alive[order]]
        col = F[o, j]
        span = col[-1] - col[0]
        if span > 0 and len(o) > 2:
            fit[o[1:-1]] += (col[2:] - col[:-2]) / span
        fit[o[0]] = np.inf
        fit[o[-1]] = np.inf
    return fit


def crowding_fitness(F) -> np.ndarray:
    """Range-normalised crowding distance; per-dimension end vectors get ``inf``.

    Ends are the first and last members of a stable sort on each dimension.
    """
    F = np.asarray(F, dtype=float)
    if len(F) == 0:
        return np.zeros(0)
    orders = [np.argsort(F[:, j], kind="stable") for j in range(F.shape[1])]
    return _crowding(F, orders, np.ones(len(F), dtype=bool))


class _CrowdingList:
    """Per-dimension doubly linked sort orders supporting O(m) removal updates.

    Contributions are stored per dimension and summed in dimension order, so
    fitness values match :func:`crowding_fitness` on the surviving subset bit
    for bit.
    """

    def __init__(self, F: np.ndarray, members: np.ndarray):
        self.F = F.tolist()
        m = F.shape[1]
        self.m = m
        n = len(F)
        self.prev = [[-1] * n for _ in range(m)]
        self.next = [[-1] * n for _ in range(m)]
        self.span = [0.0] * m
        self.contrib = [[0.0] * m for _ in range(n)]
        self.fit = [np.inf] * n
        for j in range(m):
            order = members[np.argsort(F[members, j], kind="stable")].tolist()
            prev, nxt = self.prev[j], self.next[j]
            for a, b in zip(order, order[1:]):
                nxt[a] = b
                prev[b] = a
            self.span[j] = self.F[order[-1]][j] - self.F[order[0]][j]
            for i in order:
                self._update(i, j)
        for i in members.tolist():
            self._refit(i)

    def _update(self, i: int, j: int):
        p, q = self.prev[j][i], self.next[j][i]
        if p < 0 or q < 0:
            self.contrib[i][j] = np.inf
        elif self.span[j] > 0:
            self.contrib[i][j] = (self.F[q][j] - self.F[p][j]) / self.span[j]
        else:
            self.contrib[i][j] = 0.0

    def _refit(self, i: int):
        total = 0.0
        for c in self.contrib[i]:
            total += c
        self.fit[i] = total

    def remove(self, v: int):
        """Unlink a member that is not an end in any dimension."""
        self.fit[v] = np.nan
        for j in range(self.m):
            p, q = self.prev[j][v], self.next[j][v]
            self.next[j][p] = q
            self.prev[j][q] = p
            self._update(p, j)
            self._update(q, j)
        touched = {self.prev[j][v] for j in range(self.m)} | {self.next[j][v] for j in range(self.m)}
        for i in touched:
            self._refit(i)
        return touched


def fitness_truncate(F, n_nom: int) -> np.ndarray:
    """Indices kept after repeatedly removing the least-fit member.

    Fitness is recomputed after every removal. Among equal least fitness the
    most recently inserted member is removed, so earlier members survive longest.
    """
    F = np.asarray(F, dtype=float)
    n = len(F)
    if n <= n_nom:
        return np.arange(n)
    alive = np.ones(n, dtype=bool)
    crowd = _CrowdingList(F, np.arange(n))
    # min-heap on (fitness, -index): least fit first, latest inserted among ties
    heap = [(f, -i) for i, f in enumerate(crowd.fit)]
    heapq.heapify(heap)
    for _ in range(n - n_nom):
        while True:
            worst, neg = heapq.heappop(heap)
            if alive[-neg] and crowd.fit[-neg] == worst:
                break
        victim = -neg
        alive[victim] = False
        if worst == np.inf:
            # an end vector goes; the per-dimension ranges change, so rebuild
            crowd = _CrowdingList(F, np.flatnonzero(alive))
            heap = [(crowd.fit[i], -i) for i in np.flatnonzero(alive).tolist()]
            heapq.heapify(heap)
        else:
            for i in crowd.remove(victim):
                heapq.heappush(heap, (crowd.fit[i], -i))
    return np.flatnonzero(alive)


def knee_scores(F, dims: Sequence[int] = (0, 1, 2)) -> np.ndarray:
    """Minimum over ``dims`` of the range-normalised improvement over the worst value.

    A dimension with zero range scores 1 for everybody.
    """
    G = np.asarray(F, dtype=float)[:, list(dims)]
    hi = G.max(axis=0)
    lo = G.min(axis=0)
    span = hi - lo
    flat = span == 0
    ratios = (hi - G) / np.where(flat, 1.0, span)
    ratios[:, flat] = 1.0
    return ratios.min(axis=1)


def knee_select(F, dims: Sequence[int] = (0, 1, 2)) -> int:
    """Index of the max-min normalised improvement member.

    Scores within ``KNEE_TIE_TOL`` of the best are tied; ties go to the
    lexicographically smallest full objective vector, then to the earliest member.
    """
    F = np.asarray(F, dtype=float)
    if len(F) == 0:
        raise ValueError("knee selection on an empty archive")
    scores = knee_scores(F, dims)
    best = scores.max()
    tied = np.flatnonzero(scores >= best - KNEE_TIE_TOL * max(1.0, abs(best)))
    if len(tied) == 1:
        return int(tied[0])
    # lexsort keys run last-to-first; the trailing index key makes it stable
    keys = [tied] + [F[tied, j] for j in reversed(range(F.shape[1]))]
    return int(tied[np.lexsort(keys)[0]])


def run_moia(
    problem: Problem,
    params: MoiaParams,
    rng: np.random.Generator | None = None,
    on_iteration: Callable[[IterationStats], None] | None = None,
) -> ParetoArchive:
    """Approximate the feasible Pareto set of ``problem``.

    Returns the feasible nondominated survivors after ``params.t_max``
    iterations. The archive can be empty when no feasible antibody survived;
    callers decide what to do then.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(params.seed))
    lower = np.asarray(problem.lower, dtype=float)
    upper = np.asarray(problem.upper, dtype=float)
    if lower.shape != upper.shape or np.any(lower > upper):
        raise ValueError("malformed decision bounds")

    X = lower + rng.random((params.n_nom, len(lower))) * (upper - lower)
    pop = pareto_filter(Population(X, problem.evaluate(X)))
    history = []
    for t in range(params.t_max):
        pop.t = t
        n_p = len(pop)
        mutants = gene_operation(pop.X, lower, upper, params.n_max, rng)
        pop = Population(
            np.vstack([pop.X, mutants]), np.vstack([pop.F, problem.evaluate(mutants)]), t
        )
        expanded = len(pop)
        pop = pop.take(constraint_prune(pop.F[:, -1], params.n_nom))
        after_prune = len(pop)
        pop = pareto_filter(pop)
        after_filter = len(pop)
        pop = pop.take(fitness_truncate(pop.F, params.n_nom))
        stats = IterationStats(
            t, n_p, clonal_rate(n_p, params.n_max), expanded, after_prune, after_filter, len(pop)
        )
        history.append(stats)
        if on_iteration is not None:
            on_iteration(stats)

    pop = pop.take(np.flatnonzero(pop.F[:, -1] <= 0))
    return ParetoArchive(pop.X, pop.F, history)
