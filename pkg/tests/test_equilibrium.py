import numpy as np
import pytest

from rotstar import (
    AngularMomentumLaw,
    AxiField,
    AxiGrid,
    ConstantRotationFamily,
    EquationOfState,
    SolverOptions,
    check_admissibility,
    continuation_in_beta,
    free_boundary,
    gravity_map,
    gravity_map_deriv,
    hl_certificate,
    hl_certificate_blocks,
    initial_field_from_profile,
    mass_within_cylinder,
    scaled_density,
    solve_equilibrium,
    solve_lane_emden,
)
from rotstar.errors import ContinuationFailure, DomainError, NoSignChange
from rotstar.rotation import centrifugal_from_omega, ConstantRotation


def test_gravity_map_on_vacuum(grid15, eos15):
    vac = AxiField(grid15, np.full((grid15.n_r, grid15.n_zeta), -2.0))
    out = gravity_map(vac, eos15, 1.0)
    assert np.max(np.abs(out.values - 1.0)) < 1e-15


def test_gravity_map_center_normalization(grid15, theta15, eos15):
    out = gravity_map(theta15, eos15, 1.0)
    assert np.all(out.values[0, :] == 1.0)


def test_gravity_map_fixes_spherical_profile(theta15, eos15):
    out = gravity_map(theta15, eos15, 1.0)
    assert (out - theta15).sup_norm() < 1e-5


def test_gravity_deriv_zero_cases(grid15, theta15, eos15):
    zero = AxiField.zeros(grid15)
    assert gravity_map_deriv(theta15, zero, eos15, 1.0).sup_norm() == 0.0
    vac = AxiField(grid15, np.full((grid15.n_r, grid15.n_zeta), -1.0))
    h = AxiField.from_function(grid15, lambda r, z: np.cos(r) + 0 * z)
    assert gravity_map_deriv(vac, h, eos15, 1.0).sup_norm() == 0.0


@pytest.mark.parametrize("nu", [1.5, 2.5])
def test_gravity_deriv_epsilon_sweep(nu):
    eos = EquationOfState.from_index(nu)
    prof = solve_lane_emden(eos, 1.0)
    grid = AxiGrid.build(prof.r_inf, n_r=160, n_zeta=16, l_max=4, focus=prof.xi1)
    u = initial_field_from_profile(grid, prof)
    h = AxiField.from_function(
        grid, lambda r, z: np.exp(-((r - prof.xi1) ** 2)) * (1 + 0.5 * (3 * z ** 2 - 1) / 2)
    )
    base = gravity_map(u, eos, 1.0)
    dg = gravity_map_deriv(u, h, eos, 1.0)
    eps_list = np.logspace(-1, -3, 7)
    rems = []
    for eps in eps_list:
        pert = gravity_map(AxiField(grid, u.values + eps * h.values), eos, 1.0)
        rems.append((pert - base - eps * dg).sup_norm())
    slope = np.polyfit(np.log(eps_list), np.log(rems), 1)[0]
    assert slope >= min(nu, 2.0) - 0.1


def test_solve_reproduces_radial_profile(profile15, eos15):
    grid = AxiGrid.build(profile15.r_inf, n_r=256, n_zeta=32, l_max=8, focus=profile15.xi1)
    init = initial_field_from_profile(grid, profile15)
    sol = solve_equilibrium(None, eos15, 1.0, init, SolverOptions(tol=1e-11))
    exact = profile15.theta_at(grid.r)
    assert np.max(np.abs(sol.u.values - exact[:, None])) < 1e-5
    assert np.max(np.abs(sol.R_of_zeta - profile15.xi1)) < 1e-5
    assert sol.residual_history[-1] <= 1e-11
    assert sol.admissibility.a1 and sol.admissibility.a2 and sol.admissibility.monotone


def test_solve_returns_from_perturbed_start(profile15, eos15, grid15):
    # local uniqueness: a noisy start inside the basin returns to the profile
    init = initial_field_from_profile(grid15, profile15)
    rng = np.random.default_rng(8)
    noise = np.zeros((grid15.n_l, grid15.n_r))
    noise[0] = 1e-3 * np.sin(3 * grid15.r)
    noise[1] = 1e-3 * np.exp(-grid15.r)
    noise[1:, 0] = 0.0
    start = AxiField.from_modes(grid15, init.modes() + noise)
    sol = solve_equilibrium(None, eos15, 1.0, start, SolverOptions(tol=1e-12, certify=False))
    assert (sol.u - init).sup_norm() < 1e-6


def test_free_boundary_examples(grid15, theta15, profile15):
    R = free_boundary(theta15, 0.2)
    assert np.max(np.abs(R - profile15.xi1)) < 1e-9
    lin = AxiField.from_function(grid15, lambda r, z: 1.0 - r + 0 * z)
    R1 = free_boundary(lin, 0.1)
    assert np.max(np.abs(R1 - 1.0)) < 1e-12
    wig = AxiField.from_function(
        grid15, lambda r, z: np.cos(2.2 * r) + 0 * z
    )
    with pytest.raises(NoSignChange):
        free_boundary(wig, 0.1)


def test_check_admissibility_flags(grid15, theta15, eos15, profile15):
    rep = check_admissibility(theta15)
    assert rep.a1 and rep.a2 and rep.monotone
    assert rep.one_over_C > 0
    # near the axis -du/dr / r approaches f(1)/3
    du = grid15.deriv @ theta15.values
    f1 = scaled_density(1.0, eos15, 1.0)
    near = -du[1, 0] / grid15.r[1]
    assert near == pytest.approx(f1 / 3, rel=2e-2)
    # constant field fails a1, flags still reported
    const = AxiField(grid15, np.ones((grid15.n_r, grid15.n_zeta)))
    rep2 = check_admissibility(const, r0=0.2)
    assert not rep2.a1 and not rep2.a2


def test_hl_certificate_blocks_positive(theta15, eos15, profile3, eos3):
    blocks = hl_certificate_blocks(theta15, eos15, 1.0)
    assert set(blocks) == {0, 2, 4, 6, 8}
    assert all(v > 1e-3 for v in blocks.values())
    grid3 = AxiGrid.build(profile3.r_inf, n_r=160, n_zeta=16, l_max=8, focus=profile3.xi1)
    blocks3 = hl_certificate_blocks(initial_field_from_profile(grid3, profile3), eos3, 1.0)
    assert all(v > 1e-3 for v in blocks3.values())


def test_hl_certificate_vacuum_identity(grid15, eos15):
    vac = AxiField(grid15, np.full((grid15.n_r, grid15.n_zeta), -1.0))
    assert hl_certificate(vac, eos15, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_hl_weighted_degree4_block(profile15, eos15):
    # the degree-4 block, restricted to the interior of the star and weighted
    # by psi, contracts by 3/(2j+1); its smallest singular value stays above
    # 1 - 3/9 - 0.05
    from rotstar.eos import scaled_density_deriv
    from scipy.linalg import svdvals

    grid = AxiGrid.build(profile15.r_inf, n_r=160, n_zeta=16, l_max=8, focus=profile15.xi1)
    u = initial_field_from_profile(grid, profile15)
    q = scaled_density_deriv(grid.interp @ u.modes()[0], eos15, 1.0)
    k = list(grid.lvals).index(4)
    blk = (grid.kernels[k] * q[None, :]) @ grid.interp
    inside = (grid.r > 0) & (grid.r <= profile15.xi1)
    psi = profile15.psi_at(grid.r[inside])
    sub = blk[np.ix_(inside, inside)]
    weighted = sub / psi[:, None] * psi[None, :]
    n = weighted.shape[0]
    sigma = svdvals(np.eye(n) - weighted)[-1]
    assert sigma >= 1 - 3.0 / 9.0 - 0.05
    # the weighted row sums realize the contraction bound directly
    assert np.max(np.abs(weighted).sum(axis=1)) <= 3.0 / 9.0 + 0.05


def test_continuation_schedule(eos15, profile15):
    grid = AxiGrid.build(profile15.r_inf, n_r=160, n_zeta=16, l_max=8, focus=profile15.xi1)
    sols = continuation_in_beta(
        [0.0, 1e-4, 1e-3], eos15, 1.0, grid=grid,
        opts=SolverOptions(tol=1e-11, certify=False), profile=profile15,
    )
    assert len(sols) == 3
    eq = [s.boundary_at([0.0])[0] for s in sols]
    pole = [s.boundary_at([1.0])[0] for s in sols]
    assert eq[0] < eq[1] < eq[2]
    assert pole[0] > pole[1] > pole[2]
    # the zero-rotation entry is the extended spherical profile itself
    sup0 = np.max(np.abs(sols[0].u.values - profile15.theta_at(grid.r)[:, None]))
    assert sup0 < 1e-5
    assert continuation_in_beta([], eos15) == []


def test_continuation_failure_carries_partial(eos15, profile15):
    # far beyond break-up no equilibrium of this family exists; the solver
    # reports the failing beta and hands back the converged prefix
    grid = AxiGrid.build(profile15.r_inf, n_r=96, n_zeta=16, l_max=4, focus=profile15.xi1)
    with pytest.raises(ContinuationFailure) as exc:
        continuation_in_beta(
            [0.0, 1.0], eos15, 1.0, grid=grid,
            opts=SolverOptions(tol=1e-10, max_iter=12, certify=False),
            profile=profile15,
        )
    assert exc.value.failed_beta == 1.0
    assert len(exc.value.partial) == 1
    assert exc.value.partial[0].beta == 0.0


def test_solution_map_continuity(eos15, profile15):
    grid = AxiGrid.build(profile15.r_inf, n_r=160, n_zeta=16, l_max=8, focus=profile15.xi1)
    fam = ConstantRotationFamily(eos15, 1.0, grid=grid, opts=SolverOptions(tol=1e-12, certify=False))
    b0 = 5e-4
    db = 1e-5
    u1 = fam.solve_at(b0).u
    u2 = fam.solve_at(b0 + db).u
    K = (u2 - u1).sup_norm() / db
    assert np.isfinite(K) and 0 < K < 100


def test_physical_vacuum_boundary(eos15, profile15):
    grid = AxiGrid.build(profile15.r_inf, n_r=160, n_zeta=16, l_max=8, focus=profile15.xi1)
    fam = ConstantRotationFamily(eos15, 1.0, grid=grid, opts=SolverOptions(tol=1e-11, certify=False))
    sol = fam.solve_at(1e-3)
    modes = sol.u.modes()
    eps = 1e-6
    for j, z in enumerate(grid.zeta):
        R = sol.R_of_zeta[j]
        du = (grid.eval_modes_at(modes, np.array([R + eps])) -
              grid.eval_modes_at(modes, np.array([R - eps]))) / (2 * eps)
        slope = float(du[:, 0] @ _legendre_at(grid, z))
        assert slope < -0.5 * profile15.mu1 / profile15.xi1 ** 2


def _legendre_at(grid, z):
    from scipy.special import eval_legendre

    return np.array([eval_legendre(l, z) for l in grid.lvals])


@pytest.mark.parametrize("nu,order_floor", [(1.5, 1.4), (2.5, 1.8)])
def test_newton_convergence_order(nu, order_floor):
    eos = EquationOfState.from_index(nu)
    prof = solve_lane_emden(eos, 1.0)
    grid = AxiGrid.build(prof.r_inf, n_r=192, n_zeta=16, l_max=4, focus=prof.xi1)
    init = initial_field_from_profile(grid, prof)
    pert = np.zeros((grid.n_l, grid.n_r))
    pert[0] = 3e-2 * np.exp(-(((grid.r - prof.xi1 / 2) / 1.0) ** 2))
    pert[1] = 2e-2 * np.exp(-(((grid.r - prof.xi1 / 2) / 1.0) ** 2))
    pert[1:, 0] = 0.0
    start = AxiField.from_modes(grid, init.modes() + pert)
    sol = solve_equilibrium(
        None, eos, 1.0, start,
        SolverOptions(tol=1e-14, certify=False, rebuild_ratio=0.0, max_iter=30),
    )
    res = np.array(sol.residual_history)
    idx = np.nonzero((res > 2e-14) & (res < 1e-2))[0]
    orders = [
        np.log(res[c] / res[b]) / np.log(res[b] / res[a])
        for a, b, c in zip(idx, idx[1:], idx[2:])
        if b == a + 1 and c == a + 2
    ]
    assert orders, "no measurable window"
    assert max(orders) >= order_floor


def test_momentum_law_solve(eos15, profile15, scale15):
    grid = AxiGrid.build(profile15.r_inf, n_r=128, n_zeta=16, l_max=6, focus=profile15.xi1)
    u0 = initial_field_from_profile(grid, profile15)
    cyl = mass_within_cylinder(u0, eos15, scale15)
    ms = np.linspace(0, 1.3 * cyl.total, 60)
    law = AngularMomentumLaw(ms, 0.01 * ms ** 2 / cyl.total)
    sol = solve_equilibrium(
        None, eos15, 1.0, u0, SolverOptions(tol=1e-10), law=law, scale=scale15
    )
    rep = sol.admissibility
    assert rep.a1 and rep.a2 and rep.monotone
    assert sol.hl_sigma_min > 1e-3
    assert sol.residual_history[-1] <= 1e-10


def test_law_requires_scale(eos15, theta15):
    law = AngularMomentumLaw(np.array([0.0, 1.0]), np.array([0.0, 0.1]))
    with pytest.raises(DomainError):
        solve_equilibrium(None, eos15, 1.0, theta15, law=law)


def test_solution_serialization(eos15, profile15):
    grid = AxiGrid.build(profile15.r_inf, n_r=96, n_zeta=16, l_max=4, focus=profile15.xi1)
    init = initial_field_from_profile(grid, profile15)
    cf = centrifugal_from_omega(ConstantRotation(0.01),
                                __import__('rotstar').ScaleSet.from_central_enthalpy(eos15, 1.0), grid)
    sol = solve_equilibrium(cf, eos15, 1.0, init, SolverOptions(tol=1e-10))
    doc = sol.to_dict()
    assert doc["flags"]["a1"] is True
    assert len(doc["boundary"]) == grid.n_zeta
    assert doc["hl_sigma_min"] > 0
    import json

    json.dumps(doc)  # must be JSON-serializable


def test_differential_law_solve(eos15, profile15, scale15):
    # a gently decreasing angular-velocity profile solved end to end
    grid = AxiGrid.build(profile15.r_inf, n_r=128, n_zeta=16, l_max=6, focus=profile15.xi1)
    phys = np.linspace(0.0, scale15.length_scale * grid.r_inf, 201)
    law = __import__("rotstar").DifferentialRotation(
        phys, 0.02 / (1.0 + (phys / phys[-1]) ** 2)
    )
    cf = centrifugal_from_omega(law, scale15, grid)
    init = initial_field_from_profile(grid, profile15)
    sol = solve_equilibrium(cf, eos15, 1.0, init, SolverOptions(tol=1e-10))
    rep = sol.admissibility
    assert rep.a1 and rep.a2 and rep.monotone
    assert sol.boundary_at([0.0])[0] > sol.boundary_at([1.0])[0]


def test_large_rotation_reports_flags(eos15, profile15):
    # far beyond the slow-rotation regime the fixed point loses admissibility;
    # the solver still reports the flags rather than failing
    grid = AxiGrid.build(profile15.r_inf, n_r=96, n_zeta=16, l_max=4, focus=profile15.xi1)
    sols = continuation_in_beta(
        [0.0, 0.1, 0.4], eos15, 1.0, grid=grid,
        opts=SolverOptions(tol=1e-9, certify=False), profile=profile15,
    )
    rep = sols[-1].admissibility
    assert isinstance(rep.a1, bool) and isinstance(rep.a2, bool)
    assert not (rep.a1 and rep.a2)
