import json
from pathlib import Path

import pytest

from rotstar import AxiGrid, EquationOfState, ScaleSet, initial_field_from_profile, solve_lane_emden

GOLDEN = json.loads((Path(__file__).parent / "golden_lane_emden.json").read_text())


@pytest.fixture(scope="session")
def eos15():
    return EquationOfState.from_index(1.5)


@pytest.fixture(scope="session")
def eos3():
    return EquationOfState.from_index(3.0)


@pytest.fixture(scope="session")
def profile15(eos15):
    return solve_lane_emden(eos15, 1.0)


@pytest.fixture(scope="session")
def profile3(eos3):
    return solve_lane_emden(eos3, 1.0)


@pytest.fixture(scope="session")
def grid15(profile15):
    return AxiGrid.build(profile15.r_inf, n_r=160, n_zeta=16, l_max=8, focus=profile15.xi1)


@pytest.fixture(scope="session")
def theta15(grid15, profile15):
    return initial_field_from_profile(grid15, profile15)


@pytest.fixture(scope="session")
def scale15(eos15):
    return ScaleSet.from_central_enthalpy(eos15, 1.0, 1.0)
