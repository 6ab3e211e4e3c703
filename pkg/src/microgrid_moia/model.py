"""Multi-microgrid system model.

Demand curves, storage dynamics, the three participant utilities, the
hinge-penalty constraint function and the stacked objective vector used by
the immune algorithm. Every formula has a batch form operating on an
``(n, 1 + N_s)`` array of antibodies so that a whole population can be
evaluated in one call; the scalar helpers are thin wrappers around it.

Conventions: one step is one hour, so power (kW) and energy per step (kWh)
are numerically interchangeable. Storage microgrids are indexed first.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

CAP_CONTINUOUS = "continuous"
CAP_AS_WRITTEN = "as_written"
_CAP_MODES = (CAP_CONTINUOUS, CAP_AS_WRITTEN)

# resolution of the fallback scan used for non-monotone demand curves
BOUND_SCAN_POINTS = 2001


@dataclass(frozen=True)
class DemandCurve:
    """Price elasticity ``h(price) = c2*price**2 + c1*price + c0``."""

    c2: float
    c1: float
    c0: float

    def __call__(self, price):
        return self.c2 * price**2 + self.c1 * price + self.c0


@dataclass(frozen=True)
class MicrogridSpec:
    id: int
    demand_curve: DemandCurve
    omega: float
    has_storage: bool = False
    cap_max: float | None = None
    cap_secure: float | None = None
    rate_limit: float | None = None

    def __post_init__(self):
        if self.has_storage:
            if self.cap_max is None or self.cap_secure is None or self.rate_limit is None:
                raise ValueError(f"microgrid {self.id}: storage needs cap_max, cap_secure and rate_limit")
            if not 0 < self.cap_secure <= self.cap_max:
                raise ValueError(f"microgrid {self.id}: need 0 < cap_secure <= cap_max")
            if not self.rate_limit >= 0:
                raise ValueError(f"microgrid {self.id}: rate_limit must be non-negative")
        elif any(v is not None for v in (self.cap_max, self.cap_secure, self.rate_limit)):
            raise ValueError(f"microgrid {self.id}: storage fields given but has_storage is false")


@dataclass(frozen=True)
class GridCostParams:
    """Quadratic generation cost ``a*p**2 + b*p + c`` of the power grid."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("generation cost must be convex (a >= 0)")


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Stored energy of the storage microgrids plus this step's loads and RES output."""

    stored: np.ndarray
    base_load: np.ndarray
    res_output: np.ndarray

    def __post_init__(self):
        for name in ("stored", "base_load", "res_output"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.base_load <= 0) or np.any(self.res_output <= 0):
            raise ValueError("base load and RES output must be strictly positive")


class Antibody(NamedTuple):
    """One candidate design: a price and one dispatch per storage microgrid."""

    price: float
    dispatch: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.array([self.price, *self.dispatch], dtype=float)

    @classmethod
    def from_array(cls, x) -> "Antibody":
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), tuple(float(v) for v in x[1:]))


class ObjectiveVector(NamedTuple):
    """``(-U_d, -U_g, -sum of next stored levels, U_c)``; all minimised."""

    f1: float
    f2: float
    f3: float
    f4: float


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything needed to run the closed loop.

    ``grid_cost`` holds either one entry (constant over time) or one entry per
    step. ``base_load`` and ``res_output`` are ``(steps, N)`` arrays with at
    least ``horizon`` rows. ``initial_stored`` defaults to the midpoint of each
    storage band.
    """

    microgrids: tuple[MicrogridSpec, ...]
    alpha: float
    grid_cost: tuple[GridCostParams, ...]
    price_bounds: tuple[float, float]
    horizon: int
    base_load: np.ndarray
    res_output: np.ndarray
    initial_stored: np.ndarray | None = None
    utility_cap: str = CAP_CONTINUOUS
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "microgrids", tuple(self.microgrids))
        object.__setattr__(self, "grid_cost", tuple(self.grid_cost))
        lo, hi = (float(v) for v in self.price_bounds)
        object.__setattr__(self, "price_bounds", (lo, hi))
        base = np.array(self.base_load, dtype=float, ndmin=2)
        res = np.array(self.res_output, dtype=float, ndmin=2)
        base.setflags(write=False)
        res.setflags(write=False)
        object.__setattr__(self, "base_load", base)
        object.__setattr__(self, "res_output", res)

        if not self.microgrids:
            raise ValueError("scenario needs at least one microgrid")
        flags = [m.has_storage for m in self.microgrids]
        if flags != sorted(flags, reverse=True):
            raise ValueError("storage microgrids must be listed first")
        if not any(flags):
            raise ValueError("scenario needs at least one storage microgrid")
        if not lo < hi:
            raise ValueError("price bounds must satisfy lower < upper")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon!r}")
        if self.utility_cap not in _CAP_MODES:
            raise ValueError(f"utility_cap must be one of {_CAP_MODES}")
        if len(self.grid_cost) != 1 and len(self.grid_cost) < self.horizon:
            raise ValueError("grid_cost needs one entry or one entry per step")
        n = len(self.microgrids)
        for name, arr in (("base_load", base), ("res_output", res)):
            if arr.ndim != 2 or arr.shape[1] != n:
                raise ValueError(f"{name} must have one column per microgrid")
            if arr.shape[0] < self.horizon:
                raise ValueError(f"{name} has {arr.shape[0]} rows, horizon is {self.horizon}")
            if np.any(arr[: self.horizon] <= 0):
                raise ValueError(f"{name} must be strictly positive")

        if self.initial_stored is None:
            s0 = (self.cap_secure + self.cap_max) / 2
        else:
            s0 = np.array(self.initial_stored, dtype=float)
            if s0.shape != (self.n_storage,):
                raise ValueError("initial_stored needs one value per storage microgrid")
            if np.any(s0 < self.cap_secure) or np.any(s0 > self.cap_max):
                raise ValueError("initial stored energy outside [cap_secure, cap_max]")
        s0.setflags(write=False)
        object.__setattr__(self, "initial_stored", s0)

    @property
    def n_microgrids(self) -> int:
        return len(self.microgrids)

    @property
    def n_storage(self) -> int:
        return sum(m.has_storage for m in self.microgrids)

    @property
    def storage(self) -> tuple[MicrogridSpec, ...]:
        return self.microgrids[: self.n_storage]

    @property
    def cap_max(self) -> np.ndarray:
        return np.array([m.cap_max for m in self.storage], dtype=float)

    @property
    def cap_secure(self) -> np.ndarray:
        return np.array([m.cap_secure for m in self.storage], dtype=float)

    @property
    def rate_limit(self) -> np.ndarray:
        return np.array([m.rate_limit for m in self.storage], dtype=float)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.microgrids], dtype=float)

    def cost_at(self, k: int) -> GridCostParams:
        return self.grid_cost[0] if len(self.grid_cost) == 1 else self.grid_cost[k]

    def state_at(self, k: int, stored) -> NetworkState:
        """State at step ``k``; rows past the end of the profiles repeat the last row."""
        row = min(k, self.base_load.shape[0] - 1)
        return NetworkState(stored, self.base_load[row], self.res_output[row])

    def initial_state(self) -> NetworkState:
        return self.state_at(0, self.initial_stored)


def demand(curve: DemandCurve, price, base):
    """Power demand ``(1 + h(price)) * base``; no clamping."""
    return (1.0 + curve(price)) * base


def storage_step(s, p_g, p_d, v):
    """Next stored energy ``s + p_g - p_d + v``.

    Grouped as ``s + (p_g - (p_d - v))`` so that the balancing dispatch
    ``p_g = p_d - v`` leaves ``s`` unchanged bit for bit.
    """
    return s + (p_g - (p_d - v))


def nonstorage_dispatch(p_d, v):
    """Dispatch that balances a microgrid without storage; negative means export."""
    return p_d - v


def consumption_value(p_d, omega, alpha: float, cap_mode: str = CAP_CONTINUOUS):
    """Piecewise quadratic value of consuming ``p_d``, saturating at ``omega/alpha``.

    The saturated level is ``omega**2 / (2*alpha)`` in ``continuous`` mode and
    ``omega/alpha`` in ``as_written`` mode.
    """
    p_d = np.asarray(p_d, dtype=float)
    omega = np.asarray(omega, dtype=float)
    knee = omega / alpha
    cap = omega**2 / (2 * alpha) if cap_mode == CAP_CONTINUOUS else knee
    return np.where(p_d <= knee, omega * p_d - 0.5 * alpha * p_d**2, cap)


def utility_microgrids(demands, price, omegas, alpha: float, cap_mode: str = CAP_CONTINUOUS):
    """Aggregate net utility of the microgrids, ``sum_n U(p_dn) - price * p_dn``.

    ``demands`` may be ``(N,)`` or ``(batch, N)``; ``price`` broadcasts against
    the batch axis.
    """
    demands = np.asarray(demands, dtype=float)
    if np.any(demands < 0):
        raise ValueError("negative demand; check the demand curve coefficients")
    price = np.asarray(price, dtype=float)[..., None]
    return np.sum(consumption_value(demands, omegas, alpha, cap_mode) - price * demands, axis=-1)


def utility_grid(total_dispatch, price, cost: GridCostParams):
    return price * total_dispatch - (cost.a * total_dispatch**2 + cost.b * total_dispatch + cost.c)


def constraint_penalty(stored, next_stored, cap_secure, cap_max, rate_limit):
    """Sum of rate, floor and ceiling hinge violations over storage microgrids.

    Zero exactly when every storage microgrid respects its rate limit and
    stays inside ``[cap_secure, cap_max]``. Broadcasts over a leading batch axis.
    """
    stored, next_stored = np.asarray(stored, dtype=float), np.asarray(next_stored, dtype=float)
    rate = np.maximum(np.abs(next_stored - stored) - rate_limit, 0.0)
    floor = np.maximum(cap_secure - next_stored, 0.0)
    ceiling = np.maximum(next_stored - cap_max, 0.0)
    return np.sum(rate + floor + ceiling, axis=-1)


def constraints_hold(stored, next_stored, cap_secure, cap_max, rate_limit):
    """Direct check of the storage constraints, without the hinge penalty."""
    stored, next_stored = np.asarray(stored, dtype=float), np.asarray(next_stored, dtype=float)
    ok = (
        (np.abs(next_stored - stored) <= rate_limit)
        & (cap_secure <= next_stored)
        & (next_stored <= cap_max)
    )
    return np.all(ok, axis=-1)


@dataclass(frozen=True, eq=False)
class StepProblem:
    """The per-step design problem: box bounds plus batch objective evaluation.

    Rows of ``X`` are antibodies ``[price, p_g1, ..., p_gNs]``. This is the
    object handed to :func:`microgrid_moia.moia.run_moia` and to the oracle.
    """

    config: ScenarioConfig
    state: NetworkState
    k: int
    lower: np.ndarray = field(init=False)
    upper: np.ndarray = field(init=False)

    def __post_init__(self):
        lo, hi = decision_bounds(self.state, self.config, self.k)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return 1 + self.config.n_storage

    def flows(self, X):
        """Demands, full dispatch vectors and next stored levels for each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cfg, st = self.config, self.state
        price = X[:, 0]
        h = np.stack([m.demand_curve(price) for m in cfg.microgrids], axis=1)
        p_d = (1.0 + h) * st.base_load
        ns = cfg.n_storage
        p_g = np.empty_like(p_d)
        p_g[:, :ns] = X[:, 1:]
        p_g[:, ns:] = nonstorage_dispatch(p_d[:, ns:], st.res_output[ns:])
        s_next = storage_step(st.stored, p_g[:, :ns], p_d[:, :ns], st.res_output[:ns])
        return p_d, p_g, s_next

    def evaluate(self, X) -> np.ndarray:
        """Objective matrix ``(n, 4)``; the last column is the penalty."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cfg = self.config
        p_d, p_g, s_next = self.flows(X)
        price = X[:, 0]
        u_d = utility_microgrids(p_d, price, cfg.omegas, cfg.alpha, cfg.utility_cap)
        u_g = utility_grid(p_g.sum(axis=1), price, cfg.cost_at(self.k))
        u_c = constraint_penalty(self.state.stored, s_next, cfg.cap_secure, cfg.cap_max, cfg.rate_limit)
        return np.column_stack([-u_d, -u_g, -s_next.sum(axis=1), u_c])

    def feasible(self, X) -> np.ndarray:
        _, _, s_next = self.flows(X)
        cfg = self.config
        return constraints_hold(self.state.stored, s_next, cfg.cap_secure, cfg.cap_max, cfg.rate_limit)

    def fallback(self, price: float | None = None) -> np.ndarray:
        """Antibody that freezes every storage level (always feasible).

        ``price`` defaults to the midpoint of the price bounds.
        """
        lo, hi = self.config.price_bounds
        price = (lo + hi) / 2 if price is None else price
        ns = self.config.n_storage
        p_d = [demand(m.demand_curve, price, b) for m, b in zip(self.config.storage, self.state.base_load)]
        dispatch = nonstorage_dispatch(np.array(p_d), self.state.res_output[:ns])
        return np.concatenate([[price], dispatch])


def evaluate(antibody: Antibody, state: NetworkState, config: ScenarioConfig, k: int) -> ObjectiveVector:
    problem = StepProblem(config, state, k)
    return ObjectiveVector(*(float(v) for v in problem.evaluate(antibody.as_array())[0]))


def _elasticity_range(curve: DemandCurve, lo: float, hi: float) -> tuple[float, float]:
    h_lo, h_hi = curve(lo), curve(hi)
    vals = curve(np.linspace(lo, hi, BOUND_SCAN_POINTS))
    # the curve is quadratic, so the vertex is the only interior extremum
    if curve.c2 != 0 and lo < -curve.c1 / (2 * curve.c2) < hi:
        vals = np.append(vals, curve(-curve.c1 / (2 * curve.c2)))
    if h_hi <= h_lo and vals.min() >= h_hi and vals.max() <= h_lo:
        return h_hi, h_lo
    warnings.warn(
        f"demand curve {curve} is not bracketed by its values at the price bounds; "
        f"dispatch bounds taken from a {BOUND_SCAN_POINTS}-point scan",
        RuntimeWarning,
        stacklevel=3,
    )
    return float(vals.min()), float(vals.max())


def decision_bounds(state: NetworkState, config: ScenarioConfig, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Box ``[lower, upper]`` used to generate antibodies at step ``k``.

    The price range is the regulated band; each storage dispatch range covers
    every dispatch that keeps the rate limit at some price in the band.
    """
    lo_price, hi_price = config.price_bounds
    lower = [lo_price]
    upper = [hi_price]
    for j, m in enumerate(config.storage):
        h_min, h_max = _elasticity_range(m.demand_curve, lo_price, hi_price)
        b, v = state.base_load[j], state.res_output[j]
        lower.append(-m.rate_limit + (1 + h_min) * b - v)
        upper.append(m.rate_limit + (1 + h_max) * b - v)
    lo, hi = np.array(lower), np.array(upper)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def fallback_antibody(state: NetworkState, config: ScenarioConfig, price: float | None = None) -> Antibody:
    return Antibody.from_array(StepProblem(config, state, 0).fallback(price))
