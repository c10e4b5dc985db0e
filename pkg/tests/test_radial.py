import math

import numpy as np
import pytest

from conftest import GOLDEN
from rotstar import EquationOfState, harmonic_extension, scaled_density, scaled_density_deriv, solve_lane_emden
from rotstar.errors import DomainError, NoZeroFound


def test_linear_density_analytic_profile():
    # nu = 1: theta = sin(r)/r, first zero pi, mass integral pi
    eos = EquationOfState.polytrope(2.0)
    prof = solve_lane_emden(eos, 1.0)
    assert prof.xi1 == pytest.approx(math.pi, abs=1e-8)
    assert prof.mu1 == pytest.approx(math.pi, abs=1e-8)
    r = np.linspace(1e-3, prof.xi1, 800)
    assert np.max(np.abs(prof.theta_at(r) - np.sin(r) / r)) < 1e-8


@pytest.mark.parametrize("nu", [1.5, 2.0, 2.5, 3.0])
def test_first_zero_against_rk4_oracle(nu):
    prof = solve_lane_emden(EquationOfState.from_index(nu), 1.0)
    gold = GOLDEN[str(nu)]
    assert prof.xi1 == pytest.approx(gold["xi1"], abs=1e-8)
    assert prof.mu1 == pytest.approx(gold["mu1"], abs=1e-8)


def test_profile_invariants(profile15, eos15):
    p = profile15
    assert p.theta[0] == 1.0 and p.dtheta[0] == 0.0
    inside = (p.r_nodes > 0) & (p.r_nodes < p.xi1)
    assert np.all(p.theta[inside] > 0)
    beyond = p.r_nodes > p.xi1
    assert np.all(p.theta[beyond] < 0)
    # harmonic tail matches the stored profile
    tail = harmonic_extension(p, p.r_nodes[beyond])
    assert np.max(np.abs(tail - p.theta[beyond])) < 1e-9
    # mass integral identity mu1 = int f(theta) r^2 dr
    r = np.linspace(0, p.xi1, 20001)
    f = scaled_density(p.theta_at(r), eos15, 1.0)
    mu = np.trapezoid(f * r ** 2, r)
    assert mu == pytest.approx(p.mu1, rel=1e-7)


def test_harmonic_extension_values(profile15):
    p = profile15
    assert harmonic_extension(p, p.xi1) == pytest.approx(0.0, abs=1e-12)
    assert harmonic_extension(p, 1e12) == pytest.approx(-p.mu1 / p.xi1, rel=1e-9)
    with pytest.raises(DomainError):
        harmonic_extension(p, 0.5 * p.xi1)


def test_harmonic_extension_c1_matching(profile15):
    p = profile15
    eps = 1e-6
    outer_slope = (harmonic_extension(p, p.xi1 + eps) - harmonic_extension(p, p.xi1)) / eps
    assert outer_slope == pytest.approx(p.dtheta_at(p.xi1), rel=1e-5)


def test_ode_residual_by_finite_differences(profile15, eos15):
    # residual of the radial equation with the second derivative replaced by a
    # centered difference of the stored first derivative (the check is limited
    # by the finite-difference truncation, not the integrator tolerance)
    p = profile15
    r = np.linspace(0.05, p.r_inf * 0.98, 400)
    h = 1e-5
    dv = (p.dtheta_at(r + h) - p.dtheta_at(r - h)) / (2 * h)
    resid = dv + 2.0 * p.dtheta_at(r) / r + scaled_density(p.theta_at(r), eos15, 1.0)
    assert np.max(np.abs(resid)) < 1e-7


def test_near_axis_slope(profile15, eos15):
    # psi(r)/r -> f(1)/3
    p = profile15
    f1 = scaled_density(1.0, eos15, 1.0)
    assert p.psi_at(1e-3) / 1e-3 == pytest.approx(f1 / 3.0, rel=1e-2)
    assert np.all(p.psi[1:] > 0)


def test_density_decreases_along_radius(profile15, eos15):
    p = profile15
    r = np.linspace(1e-3, p.xi1 * 0.999, 500)
    fprime = scaled_density_deriv(p.theta_at(r), eos15, 1.0)
    assert np.all(fprime * p.psi_at(r) > 0)


def test_no_zero_found_below_r_inf():
    eos = EquationOfState.from_index(1.5)
    with pytest.raises(NoZeroFound):
        solve_lane_emden(eos, 1.0, r_inf=2.0)


def test_csv_export(tmp_path, profile15):
    path = tmp_path / "profile.csv"
    profile15.export_csv(path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "r,theta,dtheta,psi"
    assert len(rows) == len(profile15.r_nodes) + 1
    first = [float(x) for x in rows[1].split(",")]
    assert first == [0.0, 1.0, 0.0, 0.0]


def test_white_dwarf_profiles_finite_radius():
    polytrope = solve_lane_emden(EquationOfState.polytrope(5 / 3), 1.0)
    for kappa in [1e-12, 0.01, 0.1]:
        wd = EquationOfState.white_dwarf(1.0, 1.0, 1.0)
        prof = solve_lane_emden(wd, 16 * kappa)
        assert 0 < prof.xi1 < prof.r_inf
        if kappa < 1e-10:
            assert prof.xi1 == pytest.approx(polytrope.xi1, abs=1e-6)
