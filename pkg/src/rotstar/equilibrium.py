"""Solver for the scaled equilibrium equation u = g + G(u).

G(u) = 1 + potential(density(u)) - potential(density(u))(center) is the
self-gravity update of the enthalpy field, normalized to 1 at the center.
The solver runs Newton-Kantorovich on even-Legendre mode coefficients with
a dense linearization per solve, falling back to damped Picard iteration,
and certifies invertibility of the linearization by its smallest singular
value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve, svdvals
from scipy.optimize import brentq
from scipy.special import eval_legendre

from .eos import EquationOfState, ScaleSet, scaled_density, scaled_density_deriv
from .errors import (
    ContinuationFailure,
    DomainError,
    NoConvergence,
    NoSignChange,
    SingularLinearization,
)
from .grids import AxiField, AxiGrid
from .radial import RadialProfile, solve_lane_emden
from .rotation import (
    AngularMomentumLaw,
    CentrifugalField,
    centrifugal_from_momentum,
    constant_g_modes,
)


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 60
    newton: bool = True
    picard_damping: float = 0.5
    hl_threshold: float = 1e-3
    certify: bool = True
    rebuild_ratio: float = 0.25   # rebuild the Jacobian when contraction is worse
    r0_fraction: float = 0.05
    allow_regrid: bool = True     # re-cluster nodes when the boundary drifts
    verbose: bool = False


@dataclass
class AdmissibilityReport:
    a1: bool
    a2: bool
    monotone: bool
    one_over_C: float
    r0: float


@dataclass
class EquilibriumSolution:
    u: AxiField
    R_of_zeta: np.ndarray | None
    residual_history: list
    admissibility: AdmissibilityReport | None
    hl_sigma_min: float | None
    beta: float | None = None
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    def boundary_at(self, zeta) -> np.ndarray:
        """Evaluate the boundary curve at arbitrary zeta via its even-mode fit."""
        grid = self.u.grid
        w = (2.0 * grid.lvals[:, None] + 1.0) / 2.0 * grid.zeta_w[None, :]
        coeffs = (w * grid.leg) @ self.R_of_zeta
        zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
        tab = np.array([eval_legendre(l, zeta) for l in grid.lvals])
        return coeffs @ tab

    def to_dict(self) -> dict:
        rep = self.admissibility
        return {
            "beta": self.beta,
            "iterations": self.iterations,
            "residual_history": [float(x) for x in self.residual_history],
            "hl_sigma_min": self.hl_sigma_min,
            "flags": None
            if rep is None
            else {
                "a1": bool(rep.a1),
                "a2": bool(rep.a2),
                "monotone": bool(rep.monotone),
                "one_over_C": float(rep.one_over_C),
                "r0": float(rep.r0),
            },
            "zeta": [float(z) for z in self.u.grid.zeta],
            "boundary": None
            if self.R_of_zeta is None
            else [float(x) for x in self.R_of_zeta],
            "meta": self.meta,
        }


# ---------------------------------------------------------------------------
# mode-space plumbing


def pack_modes(grid: AxiGrid, modes: np.ndarray) -> np.ndarray:
    """Flatten mode coefficients, dropping the structurally-zero center values
    of the l >= 2 modes."""
    return np.concatenate([modes[0], modes[1:, 1:].ravel()])


def unpack_modes(grid: AxiGrid, x: np.ndarray) -> np.ndarray:
    modes = np.zeros((grid.n_l, grid.n_r))
    modes[0] = x[: grid.n_r]
    modes[1:, 1:] = x[grid.n_r :].reshape(grid.n_l - 1, grid.n_r - 1)
    return modes


def packed_size(grid: AxiGrid) -> int:
    return grid.n_r + (grid.n_l - 1) * (grid.n_r - 1)


def gravity_modes(
    grid: AxiGrid, eos: EquationOfState, u_center: float, modes: np.ndarray
) -> np.ndarray:
    """Mode coefficients of G(u) for u given by mode coefficients."""
    fine = grid.fine_field_at_gauss(modes)
    dens_modes = grid.project_fine(scaled_density(fine, eos, u_center))
    out = grid.potential_modes_from_gauss(dens_modes)
    out[0] -= out[0, 0]
    out[0] += 1.0
    out[1:, 0] = 0.0
    return out


def gravity_map(u: AxiField, eos: EquationOfState, u_center: float) -> AxiField:
    """G(u) = 1 + potential(density) - its center value; center is exactly 1."""
    return AxiField.from_modes(u.grid, gravity_modes(u.grid, eos, u_center, u.modes()))


def gravity_map_deriv(
    u: AxiField, h: AxiField, eos: EquationOfState, u_center: float
) -> AxiField:
    """Directional derivative of the self-gravity map at u along h."""
    grid = u.grid
    fine_u = grid.fine_field_at_gauss(u.modes())
    fine_h = grid.fine_field_at_gauss(h.modes())
    w = scaled_density_deriv(fine_u, eos, u_center) * fine_h
    out = grid.potential_modes_from_gauss(grid.project_fine(w))
    out[0] -= out[0, 0]
    out[1:, 0] = 0.0
    return AxiField.from_modes(grid, out)


def gravity_jacobian_packed(
    grid: AxiGrid, eos: EquationOfState, u_center: float, modes: np.ndarray
) -> np.ndarray:
    """Dense packed matrix of the linearized self-gravity map at u."""
    fine = grid.fine_field_at_gauss(modes)
    fp = scaled_density_deriv(fine, eos, u_center)
    # coupling of incoming mode lj to outgoing mode li at each gauss radius
    coup = np.einsum("la,ap,ma->plm", grid.proj_f, fp, grid.leg_f)
    n = packed_size(grid)
    jac = np.zeros((n, n))
    nr = grid.n_r
    for li in range(grid.n_l):
        rows = slice(0, nr) if li == 0 else slice(nr + (li - 1) * (nr - 1), nr + li * (nr - 1))
        for lj in range(grid.n_l):
            blk = (grid.kernels[li] * coup[:, li, lj][None, :]) @ grid.interp
            if li == 0:
                blk = blk - blk[0:1, :]
            cols = slice(0, nr) if lj == 0 else slice(nr + (lj - 1) * (nr - 1), nr + lj * (nr - 1))
            r0 = 0 if li == 0 else 1
            c0 = 0 if lj == 0 else 1
            jac[rows, cols] = blk[r0:, c0:]
    return jac


def _sup_norm_modes(grid: AxiGrid, modes: np.ndarray) -> float:
    return float(np.max(np.abs(grid.synthesize(modes))))


def _regrid_g_modes(g: CentrifugalField, grid: AxiGrid) -> np.ndarray:
    varpi_fine = grid.r[:, None] * np.sqrt(1.0 - grid.zeta_f[None, :] ** 2)
    gm = grid.project_fine(np.asarray(g.b_at(varpi_fine)).T)
    gm[1:, 0] = 0.0
    return gm


def initial_field_from_profile(grid: AxiGrid, profile: RadialProfile) -> AxiField:
    modes = np.zeros((grid.n_l, grid.n_r))
    modes[0] = profile.theta_at(grid.r)
    return AxiField.from_modes(grid, modes)


# ---------------------------------------------------------------------------
# boundary and admissibility


def free_boundary(u: AxiField, r0: float = 0.0) -> np.ndarray:
    """Per-zeta root of the radial enthalpy profile.

    Requires a single + to - sign change beyond r0 along each ray; raises
    NoSignChange otherwise.  Roots are refined on the cubic interpolant.
    """
    grid = u.grid
    R = np.empty(grid.n_zeta)
    for j in range(grid.n_zeta):
        col = u.values[:, j]
        beyond = grid.r > r0
        sgn = np.sign(col)
        crossings = np.nonzero((sgn[:-1] > 0) & (sgn[1:] <= 0) & beyond[1:])[0]
        if len(crossings) != 1 or np.any(col[grid.r <= r0] <= 0):
            raise NoSignChange(float(grid.zeta[j]))
        k = crossings[0]
        # reject profiles that come back up after the crossing
        if np.any(col[k + 1 :] > 0):
            raise NoSignChange(float(grid.zeta[j]), "multiple sign changes")
        spline = CubicSpline(grid.r, col)
        R[j] = brentq(spline, grid.r[k], grid.r[k + 1], xtol=1e-12)
    return R


def check_admissibility(u: AxiField, r0: float | None = None) -> AdmissibilityReport:
    """Radial-decrease, single-boundary, and monotonicity flags for a field."""
    grid = u.grid
    du = grid.deriv @ u.values
    if r0 is None:
        try:
            R_probe = free_boundary(u, 0.0)
            r0 = 0.05 * float(np.min(R_probe))
        except NoSignChange:
            r0 = 0.05 * grid.r_inf
    a1 = bool(np.all(du[grid.r >= r0, :] < 0.0))
    try:
        R = free_boundary(u, r0)
        a2 = bool(np.all((R > r0) & (R < grid.r_inf)))
    except NoSignChange:
        a2 = False
    with np.errstate(divide="ignore"):
        ratios = -du[1:, :] / grid.r[1:, None]
    one_over_c = float(np.min(ratios))
    return AdmissibilityReport(a1, a2, a1 and one_over_c > 0.0, one_over_c, r0)


# ---------------------------------------------------------------------------
# invertibility certificate


def _is_spherical(modes: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(modes[0]))))
    return float(np.max(np.abs(modes[1:]))) < 1e-10 * scale


def hl_certificate_blocks(
    u: AxiField, eos: EquationOfState, u_center: float
) -> dict[int, float]:
    """Per-mode smallest singular values of (I - linearized gravity map).

    Valid when the state is spherically symmetric, where the linearization
    block-diagonalizes over Legendre degrees.
    """
    grid = u.grid
    modes = u.modes()
    if not _is_spherical(modes):
        raise DomainError("per-block certificate requires a spherical state")
    q = scaled_density_deriv(grid.interp @ modes[0], eos, u_center)
    out = {}
    for k, l in enumerate(grid.lvals):
        blk = (grid.kernels[k] * q[None, :]) @ grid.interp
        if l == 0:
            blk = blk - blk[0:1, :]
            mat = np.eye(grid.n_r) - blk
        else:
            mat = np.eye(grid.n_r - 1) - blk[1:, 1:]
        out[int(l)] = float(svdvals(mat)[-1])
    return out


def hl_certificate(
    u: AxiField,
    eos: EquationOfState,
    u_center: float,
    law: AngularMomentumLaw | None = None,
    scale: ScaleSet | None = None,
) -> float:
    """Smallest singular value of the discretized (I - D[gravity map]),
    including the centrifugal linearization for angular-momentum laws.

    Uses the per-block decomposition when the state is spherical and no
    momentum law couples the modes; otherwise the full dense matrix.
    """
    modes = u.modes()
    grid = u.grid
    if law is None and _is_spherical(modes):
        return min(hl_certificate_blocks(u, eos, u_center).values())
    mat = np.eye(packed_size(grid)) - gravity_jacobian_packed(grid, eos, u_center, modes)
    if law is not None:
        if scale is None:
            raise DomainError("angular-momentum certificate needs a ScaleSet")
        mat = mat - centrifugal_deriv_matrix(law, u, eos, scale)
    return float(svdvals(mat)[-1])


def centrifugal_deriv_matrix(
    law: AngularMomentumLaw,
    u: AxiField,
    eos: EquationOfState,
    scale: ScaleSet,
) -> np.ndarray:
    """Packed dense matrix of the centrifugal linearization, assembled by
    probing the packed mode basis through the frozen linearization."""
    from .rotation import LinearizedCentrifugal

    grid = u.grid
    n = packed_size(grid)
    lin = LinearizedCentrifugal(law, u, eos, scale)
    cols = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        h_values = grid.synthesize(unpack_modes(grid, e))
        cols[:, k] = pack_modes(grid, lin.apply_values(h_values))
    return cols


# ---------------------------------------------------------------------------
# the solver


def _solve_modes(
    grid: AxiGrid,
    eos: EquationOfState,
    u_center: float,
    U: np.ndarray,
    g_modes: np.ndarray | None,
    opts: SolverOptions,
    law: AngularMomentumLaw | None = None,
    scale: ScaleSet | None = None,
):
    """Newton iteration in mode space; returns (U, history, g_modes)."""
    history = []
    lu = None
    n = packed_size(grid)
    eye = np.eye(n)
    b_matrix = None
    last_res = None

    for it in range(opts.max_iter):
        if law is not None:
            u_field = AxiField.from_modes(grid, U)
            cf = centrifugal_from_momentum(law, u_field, eos, scale, grid)
            g_modes = cf.g_modes
        rhs = (g_modes if g_modes is not None else 0.0) + gravity_modes(
            grid, eos, u_center, U
        ) - U
        res = _sup_norm_modes(grid, rhs)
        history.append(res)
        if opts.verbose:
            print(f"  iter {it:2d}  residual {res:.3e}")
        if res <= opts.tol:
            return U, history, g_modes
        if not np.isfinite(res):
            raise NoConvergence("residual is not finite", history)
        if opts.newton:
            stale = lu is None or (
                last_res is not None and res > opts.rebuild_ratio * last_res
            )
            if stale:
                jac = gravity_jacobian_packed(grid, eos, u_center, U)
                if law is not None:
                    if b_matrix is None:
                        b_matrix = centrifugal_deriv_matrix(
                            law, AxiField.from_modes(grid, U), eos, scale
                        )
                    jac = jac + b_matrix
                try:
                    lu = lu_factor(eye - jac)
                except np.linalg.LinAlgError as exc:
                    raise SingularLinearization(0.0, opts.hl_threshold) from exc
            delta = lu_solve(lu, pack_modes(grid, rhs))
            U = U + unpack_modes(grid, delta)
        else:
            U = U + opts.picard_damping * rhs
        last_res = res
    if law is not None:
        u_field = AxiField.from_modes(grid, U)
        g_modes = centrifugal_from_momentum(law, u_field, eos, scale, grid).g_modes
    rhs = (g_modes if g_modes is not None else 0.0) + gravity_modes(
        grid, eos, u_center, U
    ) - U
    res = _sup_norm_modes(grid, rhs)
    history.append(res)
    if res <= opts.tol:
        return U, history, g_modes
    raise NoConvergence(
        f"no convergence after {opts.max_iter} iterations (residual {history[-1]:.3e})",
        history,
    )


def solve_equilibrium(
    g: CentrifugalField | None,
    eos: EquationOfState,
    u_center: float,
    init: AxiField,
    opts: SolverOptions | None = None,
    *,
    law: AngularMomentumLaw | None = None,
    scale: ScaleSet | None = None,
) -> EquilibriumSolution:
    """Solve u = g + G(u) starting from init.

    For angular-momentum laws pass ``law`` (and ``scale``); the centrifugal
    term is then rebuilt from the current iterate each step and its
    linearization joins the Newton matrix.  After convergence the free
    boundary, admissibility flags and (optionally) the invertibility
    certificate are produced.
    """
    opts = opts or SolverOptions()
    grid = init.grid
    if law is not None and scale is None:
        raise DomainError("angular-momentum solves need a ScaleSet")
    g_modes = None if g is None else g.g_modes
    U0 = init.modes().copy()
    U0[1:, 0] = 0.0
    try:
        U, history, g_modes = _solve_modes(
            grid, eos, u_center, U0.copy(), g_modes, opts, law, scale
        )
    except NoConvergence:
        if not opts.newton:
            raise
        fallback = SolverOptions(**{**opts.__dict__, "newton": False})
        fallback.max_iter = max(opts.max_iter * 4, 200)
        U, history, g_modes = _solve_modes(
            grid, eos, u_center, U0.copy(), g_modes, fallback, law, scale
        )

    u_field = AxiField.from_modes(grid, U)
    if opts.allow_regrid and getattr(grid, "focus", None) is not None:
        # if the boundary drifted out of the clustered band, rebuild the grid
        # around the new boundary and re-converge
        try:
            R_now = free_boundary(u_field, 0.0)
        except NoSignChange:
            R_now = None
        band = getattr(grid, "focus_width", 0.03) * grid.r_inf
        if R_now is not None and abs(float(np.mean(R_now)) - grid.focus) > band:
            grid = AxiGrid.build(
                grid.r_inf,
                grid.n_r,
                grid.n_zeta,
                grid.l_max,
                focus=float(np.mean(R_now)),
            )
            U_new = np.zeros((grid.n_l, grid.n_r))
            old = u_field.grid
            U_new[:, :] = old.eval_modes_at(U, grid.r)
            U_new[1:, 0] = 0.0
            g_modes = None if g is None else _regrid_g_modes(g, grid)
            U, hist2, g_modes = _solve_modes(
                grid, eos, u_center, U_new, g_modes, opts, law, scale
            )
            history = history + hist2
            u_field = AxiField.from_modes(grid, U)
    report = check_admissibility(u_field, None)
    R = None
    if report.a2:
        R = free_boundary(u_field, report.r0)
    sigma = None
    if opts.certify:
        sigma = hl_certificate(u_field, eos, u_center, law=law, scale=scale)
        if sigma < opts.hl_threshold:
            raise SingularLinearization(sigma, opts.hl_threshold)
    beta = g.beta if g is not None else (0.0 if law is None else None)
    return EquilibriumSolution(
        u=u_field,
        R_of_zeta=R,
        residual_history=history,
        admissibility=report,
        hl_sigma_min=sigma,
        beta=beta,
        iterations=len(history),
        meta={"g_sup": 0.0 if g_modes is None else _sup_norm_modes(grid, g_modes)},
    )


def continuation_in_beta(
    schedule,
    eos: EquationOfState,
    u_center: float = 1.0,
    grid: AxiGrid | None = None,
    opts: SolverOptions | None = None,
    profile: RadialProfile | None = None,
) -> list[EquilibriumSolution]:
    """Solve the rigid-rotation family along an increasing beta schedule,
    warm-starting each solve from the previous solution.

    Raises ContinuationFailure with the partial results attached if a solve
    fails; an empty schedule returns an empty list.
    """
    schedule = list(schedule)
    if not schedule:
        return []
    if any(b < 0 for b in schedule) or any(
        b2 <= b1 for b1, b2 in zip(schedule, schedule[1:])
    ):
        raise DomainError("schedule must be nonnegative and strictly increasing")
    opts = opts or SolverOptions()
    if profile is None:
        profile = solve_lane_emden(eos, u_center)
    if grid is None:
        grid = AxiGrid.build(profile.r_inf, focus=profile.xi1)
    init = initial_field_from_profile(grid, profile)
    out: list[EquilibriumSolution] = []
    current = init
    for beta in schedule:
        gm = constant_g_modes(grid, beta)
        cf = CentrifugalField(
            grid.r.copy(),
            0.25 * beta * grid.r ** 2,
            0.5 * beta * grid.r,
            AxiField.from_modes(grid, gm),
            gm,
            beta,
            _interp=lambda v, b=beta: 0.25 * b * np.asarray(v) ** 2,
        )
        try:
            sol = solve_equilibrium(cf, eos, u_center, current, opts)
        except Exception as exc:  # noqa: BLE001 - annotate and re-raise
            raise ContinuationFailure(beta, exc, out) from exc
        sol.beta = beta
        out.append(sol)
        current = sol.u
    return out


class ConstantRotationFamily:
    """Random-access rigid-rotation solves with warm starts, keyed by beta.

    Used wherever many nearby solves are needed (mass curves, slope fits).
    """

    def __init__(
        self,
        eos: EquationOfState,
        u_center: float = 1.0,
        grid: AxiGrid | None = None,
        opts: SolverOptions | None = None,
    ):
        self.eos = eos
        self.u_center = u_center
        self.profile = solve_lane_emden(eos, u_center)
        self.grid = grid or AxiGrid.build(self.profile.r_inf, focus=self.profile.xi1)
        self.opts = opts or SolverOptions(certify=False)
        self._cache: dict[float, EquilibriumSolution] = {}

    def solve_at(self, beta: float) -> EquilibriumSolution:
        if beta in self._cache:
            return self._cache[beta]
        if self._cache:
            nearest = min(self._cache, key=lambda b: abs(b - beta))
            init = self._cache[nearest].u
        else:
            init = initial_field_from_profile(self.grid, self.profile)
        gm = constant_g_modes(self.grid, beta)
        cf = CentrifugalField(
            self.grid.r.copy(),
            0.25 * beta * self.grid.r ** 2,
            0.5 * beta * self.grid.r,
            AxiField.from_modes(self.grid, gm),
            gm,
            beta,
            _interp=lambda v, b=beta: 0.25 * b * np.asarray(v) ** 2,
        )
        sol = solve_equilibrium(cf, self.eos, self.u_center, init, self.opts)
        sol.beta = beta
        self._cache[beta] = sol
        return sol
