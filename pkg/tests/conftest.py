import os

import hypothesis
import numpy as np
import pytest

from microgrid_moia.model import (
    DemandCurve,
    GridCostParams,
    MicrogridSpec,
    ScenarioConfig,
)

np.seterr(all="raise", under="ignore")

hypothesis.settings.register_profile("default", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_config(
    curves=((0.01, -0.12, 0.26),),
    n_storage=1,
    cap=(125.0, 250.0),
    rate=25.0,
    base=(100.0,),
    res=(20.0,),
    stored=None,
    omegas=None,
    alpha=0.5,
    cost=(0.01, 0.1, 1.0),
    horizon=1,
    price_bounds=(1.5, 5.5),
    utility_cap="continuous",
):
    mgs = []
    for i, c in enumerate(curves):
        omega = 2.0 if omegas is None else omegas[i]
        if i < n_storage:
            mgs.append(MicrogridSpec(i + 1, DemandCurve(*c), omega, True, cap[1], cap[0], rate))
        else:
            mgs.append(MicrogridSpec(i + 1, DemandCurve(*c), omega))
    rows = np.tile(np.asarray(base, dtype=float), (horizon, 1))
    res_rows = np.tile(np.asarray(res, dtype=float), (horizon, 1))
    return ScenarioConfig(
        tuple(mgs), alpha, (GridCostParams(*cost),), price_bounds, horizon, rows, res_rows,
        stored, utility_cap,
    )


@pytest.fixture
def single_config():
    return make_config()
