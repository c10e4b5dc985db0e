"""Tensor grids for axisymmetric, equatorially symmetric fields.

A field u(r, zeta) lives on radial nodes times Gauss-Legendre nodes in
zeta = cos(polar angle).  Equatorial symmetry restricts the Legendre
content to even degrees; the grid caches the even-degree transform
tables, a composite 4-point Gauss rule on the radial panels, and the
cubic interpolation matrix from nodes to the radial quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import eval_legendre

from .errors import DomainError

_GAUSS4_X, _GAUSS4_W = np.polynomial.legendre.leggauss(4)


def clustered_nodes(
    r_max: float,
    n: int,
    *,
    axis_weight: float = 2.0,
    axis_width: float = 0.05,
    focus: float | None = None,
    focus_weight: float = 5.0,
    focus_width: float = 0.03,
) -> np.ndarray:
    """Monotone nodes on [0, r_max] with extra density near 0 and near ``focus``.

    Widths are fractions of r_max.  The map is the inverse CDF of a smooth
    density, so spacings vary smoothly (good for local cubic interpolation).
    """
    if n < 8:
        raise DomainError("need at least 8 radial nodes")
    t = np.linspace(0.0, 1.0, 8 * n + 1)
    dens = np.ones_like(t)
    dens += axis_weight * np.exp(-0.5 * (t / axis_width) ** 2)
    if focus is not None:
        if not (0.0 < focus < r_max):
            raise DomainError("focus must lie strictly inside (0, r_max)")
        dens += focus_weight * np.exp(-0.5 * ((t - focus / r_max) / focus_width) ** 2)
    cdf = cumulative_trapezoid(dens, t, initial=0.0)
    cdf /= cdf[-1]
    nodes = np.interp(np.linspace(0.0, 1.0, n), cdf, t) * r_max
    nodes[0] = 0.0
    nodes[-1] = r_max
    return nodes


def fornberg_weights(x_stencil: np.ndarray, x0: float, order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order at x0 on arbitrary nodes."""
    x = np.asarray(x_stencil, dtype=float)
    n = len(x)
    w = np.zeros((order + 1, n))
    w[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k, i] = c1 * (k * w[k - 1, i - 1] - c5 * w[k, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for k in range(mn, 0, -1):
                w[k, j] = ((x[i] - x0) * w[k, j] - k * w[k - 1, j]) / c3
            w[0, j] = (x[i] - x0) * w[0, j] / c3
        c1 = c2
    return w[order]


def _lagrange_row(x_stencil: np.ndarray, x: float) -> np.ndarray:
    """Lagrange interpolation weights at point x for the given stencil."""
    w = np.empty(len(x_stencil))
    for s in range(len(x_stencil)):
        num = 1.0
        den = 1.0
        for m in range(len(x_stencil)):
            if m == s:
                continue
            num *= x - x_stencil[m]
            den *= x_stencil[s] - x_stencil[m]
        w[s] = num / den
    return w


def interp_matrix(nodes: np.ndarray, points: np.ndarray, width: int = 4) -> np.ndarray:
    """Dense matrix mapping nodal values to local-cubic values at ``points``."""
    n = len(nodes)
    mat = np.zeros((len(points), n))
    idx = np.searchsorted(nodes, points) - 1
    idx = np.clip(idx, 0, n - 2)
    for p, x in enumerate(points):
        s0 = min(max(idx[p] - (width // 2 - 1), 0), n - width)
        mat[p, s0 : s0 + width] = _lagrange_row(nodes[s0 : s0 + width], x)
    return mat


def derivative_matrix(nodes: np.ndarray, width: int = 4) -> np.ndarray:
    """Dense matrix approximating d/dr at the nodes (local stencils)."""
    n = len(nodes)
    mat = np.zeros((n, n))
    for i in range(n):
        s0 = min(max(i - (width // 2 - 1), 0), n - width)
        mat[i, s0 : s0 + width] = fornberg_weights(nodes[s0 : s0 + width], nodes[i], 1)
    return mat


class AxiGrid:
    """Discretization of [0, r_inf] x [-1, 1] with even-Legendre mode tables."""

    def __init__(
        self,
        r_nodes: np.ndarray,
        n_zeta: int,
        l_max: int,
        zeta_oversample: int = 2,
    ):
        r_nodes = np.asarray(r_nodes, dtype=float)
        if r_nodes[0] != 0.0 or np.any(np.diff(r_nodes) <= 0):
            raise DomainError("radial nodes must start at 0 and strictly increase")
        if l_max % 2 != 0 or l_max < 0:
            raise DomainError("l_max must be a nonnegative even integer")
        if n_zeta < l_max + 1:
            raise DomainError("need n_zeta >= l_max + 1 for quadrature exactness")
        self.r = r_nodes
        self.n_r = len(r_nodes)
        self.r_inf = float(r_nodes[-1])
        self.l_max = int(l_max)
        self.lvals = np.arange(0, l_max + 1, 2)
        self.n_l = len(self.lvals)

        self.zeta, self.zeta_w = np.polynomial.legendre.leggauss(n_zeta)
        self.n_zeta = n_zeta
        # table P[k, j] = P_{l_k}(zeta_j)
        self.leg = np.array([eval_legendre(l, self.zeta) for l in self.lvals])

        nf = max(zeta_oversample * n_zeta, l_max + 1)
        self.zeta_f, self.zeta_fw = np.polynomial.legendre.leggauss(nf)
        self.leg_f = np.array([eval_legendre(l, self.zeta_f) for l in self.lvals])
        # projection onto even modes using the fine rule
        self.proj_f = (
            (2.0 * self.lvals[:, None] + 1.0) / 2.0 * self.zeta_fw[None, :] * self.leg_f
        )

        # composite 4-point Gauss rule on the radial panels
        a = self.r[:-1]
        b = self.r[1:]
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        self.gauss_x = (mid[:, None] + half[:, None] * _GAUSS4_X[None, :]).ravel()
        self.gauss_w = (half[:, None] * _GAUSS4_W[None, :]).ravel()
        self.n_gauss = len(self.gauss_x)

        self.interp = interp_matrix(self.r, self.gauss_x)
        self.deriv = derivative_matrix(self.r)

        # radial kernels of the multipole potential, in overflow-safe ratio form:
        # T[k][i, p] couples a source value at gauss point x_p to the potential
        # of mode l_k at node r_i.
        x = self.gauss_x[None, :]
        r = self.r[:, None]
        below = x < r
        self.kernels = np.empty((self.n_l, self.n_r, self.n_gauss))
        with np.errstate(divide="ignore", invalid="ignore"):
            for k, l in enumerate(self.lvals):
                inner = np.where(below, np.where(r > 0, x / r, 0.0), 1.0) ** (l + 1)
                outer = np.where(below, 1.0, (r / x) ** l)
                ker = np.where(below, inner, outer)
                if l == 0:
                    ker[0, :] = 1.0  # (0/x)^0 at the center
                else:
                    ker[0, :] = 0.0
                self.kernels[k] = (self.gauss_w * self.gauss_x / (2.0 * l + 1.0)) * ker
        self._mode_ops = None
        self.focus = None
        self.focus_width = 0.03

    @classmethod
    def build(
        cls,
        r_inf: float,
        n_r: int = 256,
        n_zeta: int = 32,
        l_max: int = 8,
        *,
        focus: float | None = None,
        focus_weight: float = 5.0,
        focus_width: float = 0.03,
        axis_weight: float = 2.0,
        axis_width: float = 0.05,
        zeta_oversample: int = 2,
    ) -> "AxiGrid":
        nodes = clustered_nodes(
            r_inf,
            n_r,
            axis_weight=axis_weight,
            axis_width=axis_width,
            focus=focus,
            focus_weight=focus_weight,
            focus_width=focus_width,
        )
        grid = cls(nodes, n_zeta, l_max, zeta_oversample)
        grid.focus = focus
        grid.focus_width = focus_width
        return grid

    # -- mode transforms -------------------------------------------------

    def project(self, values: np.ndarray) -> np.ndarray:
        """Even-Legendre coefficients f_l(r_i) from grid values (n_r, n_zeta)."""
        w = (2.0 * self.lvals[:, None] + 1.0) / 2.0 * self.zeta_w[None, :]
        return np.einsum("kj,ij->ki", w * self.leg, values)

    def synthesize(self, modes: np.ndarray) -> np.ndarray:
        """Grid values (n_r, n_zeta) from mode coefficients (n_l, n_r)."""
        return np.einsum("ki,kj->ij", modes, self.leg)

    def modes_at_gauss(self, modes: np.ndarray) -> np.ndarray:
        """Interpolate each radial mode onto the panel Gauss points."""
        return modes @ self.interp.T

    def fine_field_at_gauss(self, modes: np.ndarray) -> np.ndarray:
        """Field values on (fine zeta) x (gauss radius), shape (n_fine, n_gauss)."""
        return self.leg_f.T @ self.modes_at_gauss(modes)

    def project_fine(self, values_fine: np.ndarray) -> np.ndarray:
        """Mode coefficients from values on the fine zeta rule (any radial set)."""
        return self.proj_f @ values_fine

    def potential_modes_from_gauss(self, source_modes_gauss: np.ndarray) -> np.ndarray:
        """Radial multipole integrals: source mode samples at Gauss points ->
        potential mode values at the nodes."""
        return np.einsum("kip,kp->ki", self.kernels, source_modes_gauss)

    @property
    def mode_operators(self) -> np.ndarray:
        """Node-to-node potential operator per mode, kernels composed with
        the interpolation matrix.  Shape (n_l, n_r, n_r)."""
        if self._mode_ops is None:
            self._mode_ops = np.einsum("kip,pm->kim", self.kernels, self.interp)
        return self._mode_ops

    def eval_modes_at(self, modes: np.ndarray, r_query: np.ndarray) -> np.ndarray:
        """Local-cubic evaluation of mode functions at arbitrary radii."""
        r_query = np.atleast_1d(np.asarray(r_query, dtype=float))
        mat = interp_matrix(self.r, r_query)
        return modes @ mat.T

    def radial_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Gauss points and weights of the composite radial rule."""
        return self.gauss_x, self.gauss_w


@dataclass
class AxiField:
    """An equatorially symmetric axisymmetric field sampled on an AxiGrid."""

    grid: AxiGrid
    values: np.ndarray
    _modes: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_r, self.grid.n_zeta):
            raise DomainError(
                f"field shape {self.values.shape} does not match grid "
                f"({self.grid.n_r}, {self.grid.n_zeta})"
            )

    @classmethod
    def zeros(cls, grid: AxiGrid) -> "AxiField":
        return cls(grid, np.zeros((grid.n_r, grid.n_zeta)))

    @classmethod
    def from_function(cls, grid: AxiGrid, fn) -> "AxiField":
        """Sample fn(r, zeta) on the positive-zeta half and mirror it, so the
        stored values are exactly equatorially symmetric."""
        vals = np.empty((grid.n_r, grid.n_zeta))
        half = grid.n_zeta // 2
        rr = grid.r[:, None]
        zz = grid.zeta[None, half:]
        vals[:, half:] = fn(rr, zz)
        vals[:, :half] = vals[:, : half - 1 - grid.n_zeta : -1]
        vals[0, :] = vals[0, -1]
        return cls(grid, vals)

    @classmethod
    def from_modes(cls, grid: AxiGrid, modes: np.ndarray) -> "AxiField":
        modes = np.asarray(modes, dtype=float)
        f = cls(grid, grid.synthesize(modes))
        f._modes = modes.copy()
        return f

    @classmethod
    def from_radial(cls, grid: AxiGrid, radial_fn) -> "AxiField":
        prof = np.asarray(radial_fn(grid.r), dtype=float)
        return cls(grid, np.repeat(prof[:, None], grid.n_zeta, axis=1))

    def modes(self) -> np.ndarray:
        if self._modes is None:
            self._modes = self.grid.project(self.values)
        return self._modes

    def validate(self, tol: float = 1e-12) -> None:
        """Check equatorial symmetry and a constant center value."""
        scale = max(1.0, float(np.max(np.abs(self.values))))
        asym = np.max(np.abs(self.values - self.values[:, ::-1]))
        if asym > tol * scale:
            raise DomainError(f"field is not equatorially symmetric (dev {asym:.2e})")
        cdev = np.max(np.abs(self.values[0] - self.values[0, 0]))
        if cdev > tol * scale:
            raise DomainError(f"center value varies with zeta (dev {cdev:.2e})")

    def center(self) -> float:
        return float(self.values[0, 0])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other: "AxiField") -> "AxiField":
        return AxiField(self.grid, self.values + other.values)

    def __sub__(self, other: "AxiField") -> "AxiField":
        return AxiField(self.grid, self.values - other.values)

    def __rmul__(self, scalar: float) -> "AxiField":
        return AxiField(self.grid, float(scalar) * self.values)
