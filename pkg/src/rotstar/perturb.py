"""First-order response of the spherical state to slow rigid rotation.

The correction field splits into even Legendre modes.  Each radial mode
function solves a second-order problem that is equivalent to an integral
representation with the two-sided kernel (min/max)^degree; homogeneous
modes of degree >= 4 contract to zero, the degree-2 mode carries the
oblateness, and the degree-0 mode is a Volterra equation.  A shooting
solver for the underlying ODE provides an independent validation path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .eos import EquationOfState, scaled_density_deriv
from .errors import DomainError, NonConvergence
from .grids import AxiGrid, clustered_nodes, interp_matrix
from .radial import RadialProfile
from .equilibrium import gravity_jacobian_packed, pack_modes, packed_size, unpack_modes

_G4X, _G4W = np.polynomial.legendre.leggauss(4)


@dataclass
class ModeGrid:
    """Panel-Gauss quadrature on (0, xi1] with the profile data cached."""

    r: np.ndarray
    gauss_x: np.ndarray
    gauss_w: np.ndarray
    interp: np.ndarray
    q_gauss: np.ndarray
    psi: np.ndarray

    @classmethod
    def build(cls, profile: RadialProfile, eos: EquationOfState, u_center: float, n: int):
        # cluster at both ends: the center for the r^degree behavior, the
        # surface for the Hoelder kink of the density derivative
        nodes = clustered_nodes(
            profile.xi1, n, axis_weight=3.0, axis_width=0.02,
            focus=0.995 * profile.xi1, focus_weight=6.0, focus_width=0.02,
        )
        nodes[-1] = profile.xi1
        nodes[0] = 1e-8 * profile.xi1  # keep H = y/psi finite at the first node
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        half = 0.5 * (nodes[1:] - nodes[:-1])
        x = (mid[:, None] + half[:, None] * _G4X[None, :]).ravel()
        w = (half[:, None] * _G4W[None, :]).ravel()
        q = scaled_density_deriv(profile.theta_at(x), eos, u_center)
        return cls(nodes, x, w, interp_matrix(nodes, x), q, profile.psi_at(nodes))


def _kernel_apply(mg: ModeGrid, degree: int, qy_gauss: np.ndarray) -> np.ndarray:
    """Two-sided radial kernel of the mode problem at the nodes:
    (1/r^2) int_0^r qy (s/r)^(j-1) s^3 ds + r int_r^R qy (r/s)^(j-1) ds,
    in overflow-safe ratio powers."""
    r = mg.r[:, None]
    x = mg.gauss_x[None, :]
    below = x < r
    inner = np.where(below, (x / r) ** (degree + 1) * x, 0.0)
    outer = np.where(below, 0.0, (r / x) ** max(degree - 1, 0) * r)
    if degree == 0:
        # the j = 0 kernel collapses to s (s/r - 1) on s < r
        inner = np.where(below, x * (x / r - 1.0), 0.0)
        outer = 0.0 * outer
    ker = (inner + outer) * mg.gauss_w[None, :]
    return ker @ qy_gauss


@dataclass
class ModeSolution:
    degree: int
    r: np.ndarray
    values: np.ndarray
    far_coefficient: float
    H: np.ndarray
    iterations: int
    residual: float

    def at(self, r):
        return CubicSpline(self.r, self.values)(np.asarray(r, dtype=float))


def solve_mode(
    profile: RadialProfile,
    eos: EquationOfState,
    u_center: float,
    degree: int,
    source=None,
    far_coefficient: float = 0.0,
    *,
    n_nodes: int = 700,
    damping: float = 0.5,
    tol: float = 5e-14,
    max_iter: int = 800,
    method: str = "auto",
    initial=None,
) -> ModeSolution:
    """Solve one radial mode problem on (0, xi1].

    degree >= 2: fixed point of
        y = source + (far_coefficient r^degree + two-sided kernel of q y)/(2 degree + 1)
    with damping; the kernel contracts like 3/(2 degree + 1) in the
    y/psi-weighted norm.  degree = 0: the Volterra form with the center value
    pinned to source(0) (= 0 for polynomial sources).  ``source`` is a
    callable of r or None.  Falls back to the shooting path when the
    iteration stalls (only relevant for the near-critical homogeneous
    degree-2 problem).
    """
    if degree % 2 != 0 or degree < 0:
        raise DomainError("mode degree must be a nonnegative even integer")
    mg = ModeGrid.build(profile, eos, u_center, n_nodes)
    src = np.zeros_like(mg.r) if source is None else np.asarray(source(mg.r), float)
    inhom = src + (
        far_coefficient * mg.r ** degree / (2.0 * degree + 1.0) if degree > 0 else 0.0
    )
    y = inhom.copy() if initial is None else np.asarray(initial(mg.r), dtype=float)
    if method in ("auto", "iteration"):
        it = 0
        for it in range(1, max_iter + 1):
            qy = mg.q_gauss * (mg.interp @ y)
            mapped = inhom + _kernel_apply(mg, degree, qy) / (2.0 * degree + 1.0)
            step = float(np.max(np.abs(mapped - y)))
            y = (1.0 - damping) * y + damping * mapped
            if step <= tol * max(1.0, float(np.max(np.abs(y)))):
                break
        else:
            if method == "iteration":
                raise NonConvergence(
                    f"mode degree {degree} iteration stalled (step {step:.2e})"
                )
            method = "shooting"
        if method != "shooting":
            qy = mg.q_gauss * (mg.interp @ y)
            resid = float(
                np.max(
                    np.abs(
                        inhom + _kernel_apply(mg, degree, qy) / (2.0 * degree + 1.0) - y
                    )
                )
            )
            psi = np.where(mg.psi > 0, mg.psi, np.inf)
            return ModeSolution(degree, mg.r, y, far_coefficient, y / psi, it, resid)
    if degree == 0:
        raise NonConvergence("no shooting path for the degree-0 Volterra problem")
    y = mode_shooting(profile, eos, u_center, degree, far_coefficient, mg.r, source)
    psi = np.where(mg.psi > 0, mg.psi, np.inf)
    return ModeSolution(degree, mg.r, y, far_coefficient, y / psi, -1, math.nan)


def mode_shooting(
    profile: RadialProfile,
    eos: EquationOfState,
    u_center: float,
    degree: int,
    far_coefficient: float,
    r_out: np.ndarray,
    source=None,
) -> np.ndarray:
    """Validation path: integrate the mode ODE from a regular series start and
    match the outer condition r y' + (degree+1) y = far_coefficient * r^degree
    at xi1 (where the density response vanishes), for homogeneous problems."""
    if source is not None:
        raise DomainError("shooting path implemented for homogeneous sources only")
    j = degree
    xi1 = profile.xi1

    def rhs(r, z):
        y, v = z
        q = scaled_density_deriv(profile.theta_at(r), eos, u_center)
        return (v, -2.0 * v / r + (j * (j + 1) / r ** 2 - q) * y)

    r0 = 1e-6 * xi1
    sol = solve_ivp(
        rhs,
        (r0, xi1),
        (r0 ** j, j * r0 ** (j - 1)),
        method="DOP853",
        rtol=1e-12,
        atol=1e-300,
        dense_output=True,
    )
    yh, vh = sol.sol(xi1)
    c = far_coefficient * xi1 ** j / (xi1 * vh + (j + 1) * yh)
    vals = c * sol.sol(np.clip(r_out, r0, xi1))[0]
    small = r_out < r0
    if np.any(small):
        vals[small] = c * r_out[small] ** j
    return vals


@dataclass
class PerturbationField:
    """First-order rotational response: radial parts of the degree-0 and
    degree-2 modes, plus the resolvent cross-check data."""

    profile: RadialProfile
    r: np.ndarray
    h0: np.ndarray
    h2: np.ndarray
    h0_at_xi1: float
    h2_at_xi1: float
    consistency_sup: float
    resolvent_modes: np.ndarray = field(repr=False)
    resolvent_grid: AxiGrid = field(repr=False)
    _h0_spline: object = field(default=None, repr=False)
    _h2_spline: object = field(default=None, repr=False)

    def __post_init__(self):
        if self._h0_spline is None:
            self._h0_spline = CubicSpline(self.r, self.h0)
            self._h2_spline = CubicSpline(self.r, self.h2)

    def h0_at(self, r):
        return self._h0_spline(np.asarray(r, dtype=float))

    def h2_at(self, r):
        return self._h2_spline(np.asarray(r, dtype=float))

    def at(self, r, zeta):
        """The combined response h0(r) + h2(r) P2(zeta)."""
        p2 = 0.5 * (3.0 * np.asarray(zeta, dtype=float) ** 2 - 1.0)
        return self.h0_at(r) + self.h2_at(r) * p2


def _resolvent_h(profile, eos, u_center, grid) -> np.ndarray:
    """Solve (I - D[gravity map]) h = g1 on the 2-D grid, g1 = r^2 (1-zeta^2)/4."""
    modes0 = np.zeros((grid.n_l, grid.n_r))
    modes0[0] = profile.theta_at(grid.r)
    jac = gravity_jacobian_packed(grid, eos, u_center, modes0)
    g1 = np.zeros((grid.n_l, grid.n_r))
    g1[0] = grid.r ** 2 / 6.0
    g1[1] = -grid.r ** 2 / 6.0
    n = packed_size(grid)
    sol = np.linalg.solve(np.eye(n) - jac, pack_modes(grid, g1))
    return unpack_modes(grid, sol)


def compute_h_field(
    profile: RadialProfile,
    eos: EquationOfState,
    u_center: float = 1.0,
    grid: AxiGrid | None = None,
    n_nodes: int = 700,
) -> PerturbationField:
    """Degree-0 and degree-2 radial responses to the rigid centrifugal source.

    The degree-2 problem is the integral representation with far coefficient
    -5/6 (the r^2/6 source signature); the degree-0 problem carries the
    +r^2/6 source and a pinned center value.  Both are independently
    cross-checked against the resolvent solve on a 2-D grid; the sup
    difference is recorded as ``consistency_sup``.
    """
    h2 = solve_mode(
        profile, eos, u_center, 2, source=None, far_coefficient=-5.0 / 6.0,
        n_nodes=n_nodes,
    )
    h0 = solve_mode(
        profile, eos, u_center, 0, source=lambda r: r ** 2 / 6.0, n_nodes=n_nodes,
    )
    if grid is None:
        grid = AxiGrid.build(
            profile.r_inf, n_r=256, n_zeta=16, l_max=4, focus=profile.xi1,
            focus_weight=12.0, focus_width=0.015,
        )
    res_modes = _resolvent_h(profile, eos, u_center, grid)
    inside = grid.r <= profile.xi1
    r_cmp = grid.r[inside]
    dev0 = np.abs(CubicSpline(h0.r, h0.values)(r_cmp[1:]) - res_modes[0][inside][1:])
    dev2 = np.abs(CubicSpline(h2.r, h2.values)(r_cmp[1:]) - res_modes[1][inside][1:])
    consistency = float(max(dev0.max(), dev2.max()))
    return PerturbationField(
        profile=profile,
        r=h2.r,
        h0=h0.values,
        h2=h2.values,
        h0_at_xi1=float(h0.values[-1]),
        h2_at_xi1=float(h2.values[-1]),
        consistency_sup=consistency,
        resolvent_modes=res_modes,
        resolvent_grid=grid,
    )


@dataclass
class OblatenessReport:
    beta: float
    h0_at_xi1: float
    h2_at_xi1: float
    zeta: np.ndarray
    Xi1_of_zeta: np.ndarray
    sigma_linear: float     # the beta-slope of the oblateness
    sigma: float            # slope * beta
    sigma_measured: float | None = None

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "h0_at_xi1": self.h0_at_xi1,
            "h2_at_xi1": self.h2_at_xi1,
            "sigma_linear": self.sigma_linear,
            "sigma": self.sigma,
            "sigma_measured": self.sigma_measured,
            "zeta": [float(z) for z in self.zeta],
            "Xi1": [float(x) for x in self.Xi1_of_zeta],
        }


def oblateness(
    profile: RadialProfile,
    h_field: PerturbationField,
    beta: float,
    solution=None,
    zeta: np.ndarray | None = None,
) -> OblatenessReport:
    """First-order boundary curve and oblateness slope.

    Xi1(zeta) = xi1 + (xi1^2/mu1) h(xi1, zeta) beta and the oblateness is
    sigma = -(3/2)(xi1/mu1) h2(xi1) beta, positive for the distorted state.
    If a converged solution is supplied, its measured equator-minus-pole
    oblateness is attached for comparison.
    """
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    if beta > 0.05:
        import warnings

        warnings.warn("first-order boundary expansion used at beta > 0.05")
    xi1, mu1 = profile.xi1, profile.mu1
    if zeta is None:
        zeta = np.linspace(-1.0, 1.0, 41)
    zeta = np.asarray(zeta, dtype=float)
    hb = h_field.at(xi1, zeta)
    Xi1 = xi1 + xi1 ** 2 / mu1 * hb * beta
    slope = -1.5 * (xi1 / mu1) * h_field.h2_at_xi1
    measured = None
    if solution is not None:
        R = solution.boundary_at(np.array([0.0, 1.0]))
        measured = float((R[0] - R[1]) / xi1)
    return OblatenessReport(
        beta=beta,
        h0_at_xi1=h_field.h0_at_xi1,
        h2_at_xi1=h_field.h2_at_xi1,
        zeta=zeta,
        Xi1_of_zeta=Xi1,
        sigma_linear=float(slope),
        sigma=float(slope * beta),
        sigma_measured=measured,
    )
