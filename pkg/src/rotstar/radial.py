"""Spherically symmetric profiles: the hydrostatic ODE, its first zero, and
the harmonic exterior extension used as the nonrotating base solution.

The profile theta solves

    -(1/r^2) d/dr (r^2 dtheta/dr) = scaled_density(theta),  theta(0) = 1,

with a regular center.  Past the first zero xi1 the density vanishes, so the
same ODE continues theta as the harmonic tail -mu1 (1/xi1 - 1/r).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .eos import EquationOfState, scaled_density
from .errors import DomainError, NoZeroFound, StepFailure
from .grids import clustered_nodes

_SERIES_CUT = 1e-4  # switch radius between the center series and the ODE


@dataclass(frozen=True)
class RadialProfile:
    """A solved spherical profile on clustered nodes, with dense evaluation."""

    eos: EquationOfState
    u_center: float
    r_nodes: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    psi: np.ndarray
    xi1: float
    mu1: float
    r_inf: float
    _dense: object = field(repr=False, compare=False, default=None)

    def theta_at(self, r):
        return self._eval(r, 0)

    def dtheta_at(self, r):
        return self._eval(r, 1)

    def psi_at(self, r):
        """psi = -dtheta/dr, positive away from the center."""
        return -self._eval(r, 1)

    def _eval(self, r, comp):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r < 0) or np.any(r > self.r_inf * (1 + 1e-12)):
            raise DomainError("radius outside [0, r_inf]")
        out = np.empty_like(r)
        small = r < _SERIES_CUT
        f1 = scaled_density(1.0, self.eos, self.u_center)
        if comp == 0:
            out[small] = 1.0 - f1 * r[small] ** 2 / 6.0
        else:
            out[small] = -f1 * r[small] / 3.0
        if np.any(~small):
            out[~small] = self._dense(np.minimum(r[~small], self.r_inf))[comp]
        return float(out[0]) if scalar else out

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "theta", "dtheta", "psi"])
            for row in zip(self.r_nodes, self.theta, self.dtheta, self.psi):
                writer.writerow([format(v, ".17g") for v in row])


def _rhs(eos: EquationOfState, u_center: float):
    def rhs(r, y):
        u, v = y
        return (v, -scaled_density(u, eos, u_center) - 2.0 * v / r)

    return rhs


def _integrate(eos, u_center, r_end, tol, events):
    f1 = scaled_density(1.0, eos, u_center)
    r0 = _SERIES_CUT
    y0 = (1.0 - f1 * r0 ** 2 / 6.0, -f1 * r0 / 3.0)
    sol = solve_ivp(
        _rhs(eos, u_center),
        (r0, r_end),
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-2,
        dense_output=True,
        events=events,
    )
    if not sol.success:
        raise StepFailure(f"ODE integration failed: {sol.message}")
    return sol


def solve_lane_emden(
    eos: EquationOfState,
    u_center: float = 1.0,
    r_inf: float | None = None,
    tol: float = 1e-12,
    n_nodes: int = 600,
) -> RadialProfile:
    """Integrate the hydrostatic ODE, locate the first zero, extend harmonically.

    Parameters
    ----------
    eos, u_center : equation of state and central enthalpy (the white dwarf
        correction depends on u_center; the exact gamma-law does not).
    r_inf : outer radius of the returned profile.  Defaults to 1.5 * xi1
        found by a pilot integration.  If given and the zero is not bracketed
        below it, NoZeroFound is raised.
    tol : local error tolerance of the adaptive integrator; the zero is
        refined to 1e-12 relative on the dense interpolant.
    n_nodes : size of the returned node set (clustered at 0 and xi1).
    """
    if u_center <= 0:
        raise DomainError("u_center must be positive")
    if not (1.0 <= eos.nu < 5.0):
        raise DomainError("finite-radius solve requires 1 <= nu < 5")

    def hit_zero(r, y):
        return y[0]

    hit_zero.direction = -1

    if r_inf is None:
        hit_zero.terminal = True
        pilot = _integrate(eos, u_center, 1e4, tol, [hit_zero])
        if len(pilot.t_events[0]) == 0:
            raise NoZeroFound(eos.nu, 1e4)
        r_inf = 1.5 * float(pilot.t_events[0][0])

    hit_zero.terminal = False
    sol = _integrate(eos, u_center, r_inf, tol, [hit_zero])
    if len(sol.t_events[0]) == 0:
        raise NoZeroFound(eos.nu, r_inf)

    xi_event = float(sol.t_events[0][0])
    lo, hi = xi_event * (1 - 1e-6), min(xi_event * (1 + 1e-6), r_inf)
    th = lambda s: sol.sol(s)[0]
    if th(lo) <= 0 or th(hi) >= 0:  # widen if the event landed on the root
        lo, hi = xi_event * 0.99, min(xi_event * 1.01, r_inf)
    xi1 = brentq(th, lo, hi, xtol=1e-14, rtol=1e-15)
    mu1 = -xi1 ** 2 * float(sol.sol(xi1)[1])

    nodes = clustered_nodes(r_inf, n_nodes, focus=xi1, focus_weight=4.0)
    theta = np.empty(n_nodes)
    dtheta = np.empty(n_nodes)
    inner = nodes >= _SERIES_CUT
    vals = sol.sol(nodes[inner])
    theta[inner] = vals[0]
    dtheta[inner] = vals[1]
    f1 = scaled_density(1.0, eos, u_center)
    theta[~inner] = 1.0 - f1 * nodes[~inner] ** 2 / 6.0
    dtheta[~inner] = -f1 * nodes[~inner] / 3.0
    theta[0], dtheta[0] = 1.0, 0.0

    return RadialProfile(
        eos=eos,
        u_center=u_center,
        r_nodes=nodes,
        theta=theta,
        dtheta=dtheta,
        psi=-dtheta,
        xi1=xi1,
        mu1=mu1,
        r_inf=float(r_inf),
        _dense=sol.sol,
    )


def harmonic_extension(profile: RadialProfile, r):
    """Exterior tail -mu1 (1/xi1 - 1/r); only defined for r >= xi1."""
    r = np.asarray(r, dtype=float)
    if np.any(r < profile.xi1 * (1 - 1e-12)):
        raise DomainError("harmonic extension requested inside the surface")
    out = -profile.mu1 * (1.0 / profile.xi1 - 1.0 / r)
    return float(out) if out.ndim == 0 else out
