"""Scenario files and synthetic load/RES profiles.

A scenario is a YAML (or JSON) mapping; see ``docs/formats.md`` for the
field-by-field schema. Profiles are either given inline, read from a CSV
file next to the scenario, or generated from a seeded diurnal model.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .model import (
    CAP_CONTINUOUS,
    DemandCurve,
    GridCostParams,
    MicrogridSpec,
    ScenarioConfig,
    StepProblem,
)
from .moia import MoiaParams


class ScenarioError(ValueError):
    """Raised for scenario documents that violate the schema."""


@dataclass(frozen=True)
class SyntheticProfile:
    """Diurnal base load and RES output with multiplicative Gaussian noise.

    Base load follows ``mean * (1 + amplitude * cos(2*pi*(hour - peak_hour)/24))``.
    RES output is a daylight half-sine of height ``res_peak`` centred on noon
    plus a constant ``res_floor`` (wind/run-of-river share). Both are clipped
    below at ``min_value`` so they stay strictly positive.
    """

    base_mean: tuple[float, ...]
    base_amplitude: tuple[float, ...]
    res_peak: tuple[float, ...]
    res_floor: tuple[float, ...]
    peak_hour: float = 19.0
    noise: float = 0.05
    seed: int = 0
    min_value: float = 1.0

    def generate(self, steps: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.Generator(np.random.PCG64(self.seed))
        hour = (np.arange(steps) % 24)[:, None].astype(float)
        mean = np.asarray(self.base_mean, dtype=float)
        amp = np.asarray(self.base_amplitude, dtype=float)
        base = mean * (1 + amp * np.cos(2 * np.pi * (hour - self.peak_hour) / 24))
        daylight = np.clip(np.sin(np.pi * (hour - 6) / 12), 0, None)
        res = np.asarray(self.res_floor, dtype=float) + np.asarray(self.res_peak, dtype=float) * daylight
        base = base * (1 + self.noise * rng.standard_normal(base.shape))
        res = res * (1 + self.noise * rng.standard_normal(res.shape))
        return np.maximum(base, self.min_value), np.maximum(res, self.min_value)


def _require(doc: dict, key: str, where: str = "scenario"):
    if key not in doc:
        raise ScenarioError(f"{where}: missing required field '{key}'")
    return doc[key]


def _microgrid(doc: dict, idx: int) -> MicrogridSpec:
    where = f"microgrids[{idx}]"
    curve = _require(doc, "demand_curve", where)
    if len(curve) != 3:
        raise ScenarioError(f"{where}: demand_curve must be [c2, c1, c0]")
    storage = doc.get("storage")
    kwargs = {}
    if storage is not None:
        cap_max = float(_require(storage, "cap_max", where + ".storage"))
        rate = storage.get("rate_limit")
        if rate is None:
            rate = float(_require(storage, "rate_fraction", where + ".storage")) * cap_max
        kwargs = dict(
            has_storage=True,
            cap_max=cap_max,
            cap_secure=float(_require(storage, "cap_secure", where + ".storage")),
            rate_limit=float(rate),
        )
    try:
        return MicrogridSpec(
            id=int(doc.get("id", idx + 1)),
            demand_curve=DemandCurve(*(float(c) for c in curve)),
            omega=float(_require(doc, "omega", where)),
            **kwargs,
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def _grid_cost(raw) -> tuple[GridCostParams, ...]:
    entries = raw if isinstance(raw, list) else [raw]
    try:
        return tuple(GridCostParams(float(e["a"]), float(e["b"]), float(e["c"])) for e in entries)
    except (KeyError, TypeError) as exc:
        raise ScenarioError("grid_cost entries need a, b and c") from exc


def _read_profile_csv(path: Path, n: int) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        base = [[float(r[f"b{i + 1}"]) for i in range(n)] for r in rows]
        res = [[float(r[f"v{i + 1}"]) for i in range(n)] for r in rows]
    except KeyError as exc:
        raise ScenarioError(f"{path}: profile CSV needs columns b1..b{n} and v1..v{n}") from exc
    return np.array(base), np.array(res)


def _profiles(doc: dict, n: int, steps: int, root: Path) -> tuple[np.ndarray, np.ndarray]:
    if "synthetic" in doc:
        syn = dict(doc["synthetic"])
        for key in ("base_mean", "base_amplitude", "res_peak", "res_floor"):
            syn[key] = tuple(float(v) for v in _require(syn, key, "profiles.synthetic"))
            if len(syn[key]) != n:
                raise ScenarioError(f"profiles.synthetic.{key} needs one value per microgrid")
        return SyntheticProfile(**syn).generate(steps)
    if "file" in doc:
        return _read_profile_csv(root / doc["file"], n)
    return np.array(_require(doc, "base_load", "profiles"), dtype=float), np.array(
        _require(doc, "res_output", "profiles"), dtype=float
    )


def config_from_dict(doc: dict, root: Path | str = ".", horizon: int | None = None) -> ScenarioConfig:
    """Build a validated :class:`ScenarioConfig`; ``horizon`` overrides the document."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    mgs = tuple(_microgrid(m, i) for i, m in enumerate(_require(doc, "microgrids")))
    steps = int(_require(doc, "horizon")) if horizon is None else horizon
    base, res = _profiles(_require(doc, "profiles"), len(mgs), max(steps, 1), Path(root))
    try:
        return ScenarioConfig(
            microgrids=mgs,
            alpha=float(_require(doc, "alpha")),
            grid_cost=_grid_cost(_require(doc, "grid_cost")),
            price_bounds=tuple(_require(doc, "price_bounds")),
            horizon=steps,
            base_load=base,
            res_output=res,
            initial_stored=doc.get("initial_stored"),
            utility_cap=doc.get("utility_cap", CAP_CONTINUOUS),
            name=str(doc.get("name", "scenario")),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc


def moia_params_from_dict(doc: dict, seed: int | None = None) -> MoiaParams:
    raw = dict(doc.get("moia", {}))
    if seed is not None:
        raw["seed"] = seed
    try:
        return MoiaParams(**{k: int(v) for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"moia: {exc}") from exc


def load_document(path: Path | str) -> dict:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: not a mapping")
    return doc


def load_scenario(path: Path | str, horizon: int | None = None) -> ScenarioConfig:
    path = Path(path)
    return config_from_dict(load_document(path), path.parent, horizon)


def fingerprint(config: ScenarioConfig, params: MoiaParams) -> str:
    """Stable hash of every input that affects a simulation run."""
    payload = {
        "microgrids": [
            [m.id, m.has_storage, m.cap_max, m.cap_secure, m.rate_limit, list(vars(m.demand_curve).values()), m.omega]
            for m in config.microgrids
        ],
        "alpha": config.alpha,
        "grid_cost": [[c.a, c.b, c.c] for c in config.grid_cost],
        "price_bounds": list(config.price_bounds),
        "horizon": config.horizon,
        "base_load": config.base_load[: config.horizon].tolist(),
        "res_output": config.res_output[: config.horizon].tolist(),
        "initial_stored": config.initial_stored.tolist(),
        "utility_cap": config.utility_cap,
        "moia": [params.n_nom, params.n_max, params.t_max, params.seed],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


REFERENCE_SCENARIO = {
    "name": "reference-network",
    "horizon": 48,
    "alpha": 0.5,
    "utility_cap": "continuous",
    "price_bounds": [1.5, 5.5],
    "grid_cost": {"a": 0.01, "b": 0.1, "c": 1.0},
    "microgrids": [
        {
            "id": 1,
            "storage": {"cap_max": 250.0, "cap_secure": 125.0, "rate_fraction": 0.1},
            "demand_curve": [0.01, -0.12, 0.26],
            "omega": 2.0,
        },
        {
            "id": 2,
            "storage": {"cap_max": 200.0, "cap_secure": 100.0, "rate_fraction": 0.1},
            "demand_curve": [-0.01, 0.0, 0.13],
            "omega": 2.5,
        },
        {"id": 3, "demand_curve": [-0.01, 0.02, 0.08], "omega": 3.0},
    ],
    "profiles": {
        "synthetic": {
            "base_mean": [90.0, 70.0, 60.0],
            "base_amplitude": [0.35, 0.3, 0.4],
            "res_peak": [60.0, 45.0, 40.0],
            "res_floor": [8.0, 6.0, 5.0],
            "peak_hour": 19.0,
            "noise": 0.05,
            "seed": 2015,
        }
    },
    "moia": {"n_nom": 80, "n_max": 320, "t_max": 200, "seed": 1},
}


def reference_scenario(horizon: int | None = None) -> ScenarioConfig:
    """Three microgrids, two with storage, at the published sizes and bounds.

    Utility and cost coefficients and the load/RES profiles are synthetic.
    """
    return config_from_dict(REFERENCE_SCENARIO, horizon=horizon)


def single_storage_problem(
    curve=(0.01, -0.12, 0.26),
    cap=(125.0, 250.0),
    rate_limit=25.0,
    stored=187.5,
    base=100.0,
    res=20.0,
    omega=2.0,
    alpha=0.5,
    cost=(0.01, 0.1, 1.0),
):
    """One-step problem with a single storage microgrid, for the exhaustive oracle."""
    mg = MicrogridSpec(1, DemandCurve(*curve), omega, True, cap[1], cap[0], rate_limit)
    cfg = ScenarioConfig((mg,), alpha, (GridCostParams(*cost),), (1.5, 5.5), 1, [[base]], [[res]], [stored])
    return StepProblem(cfg, cfg.initial_state(), 0)


def oracle_instances() -> dict:
    """Three small operating points built from the reference microgrid data.

    ``evening``: mid-band storage, high load, little RES.
    ``low_store``: second storage microgrid near its secure floor.
    ``midday_full``: storage close to capacity while RES covers most of the load.
    """
    return {
        "evening": single_storage_problem(),
        "low_store": single_storage_problem(
            curve=(-0.01, 0.0, 0.13), cap=(100.0, 200.0), rate_limit=20.0, stored=110.0,
            base=80.0, res=10.0, omega=2.5, cost=(0.02, 0.5, 0.0),
        ),
        "midday_full": single_storage_problem(stored=240.0, base=60.0, res=40.0),
    }
