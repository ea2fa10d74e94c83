"""Surface models given by conformal charts.

Every supported surface carries a metric of the shape g = e^(2*rho) * (du^2 +
dv^2) in each chart, so all metric quantities reduce to the conformal factor
rho and its derivatives.  Charts are numbered; the sphere uses two
stereographic charts glued by the holomorphic map w = 1/z, the tori use
planar lifts, and the hyperbolic plane uses upper half-plane coordinates.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import DegenerateInputError, DomainError, UnsupportedError

HYPERBOLIC_FLOOR = 1e-12
SPHERE_SWITCH_RADIUS = 2.0


@dataclasses.dataclass(frozen=True)
class ChartPoint:
    chart: int
    u: float
    v: float


@dataclasses.dataclass(frozen=True)
class MetricData:
    """Metric tensor, Christoffel symbols, curvature and area density."""

    g: np.ndarray            # (2, 2)
    christoffel: np.ndarray  # (2, 2, 2), indexed [k, i, j] for Gamma^k_ij
    gauss_curvature: float
    mu_density: float        # density of the area form in chart coordinates


@dataclasses.dataclass(frozen=True)
class SurfaceInvariants:
    area: float
    euler_characteristic: int
    total_curvature: float


class Surface:
    """Base class; subclasses provide the conformal factor per chart."""

    kind = "abstract"
    n_charts = 1

    # -- conformal data ----------------------------------------------------
    def conformal(self, chart, u, v):
        """Return (rho, d rho/du, d rho/dv); accepts scalars or arrays."""
        raise NotImplementedError

    def laplacian_rho(self, chart, u, v):
        """Flat Laplacian of rho, used for the Gauss curvature."""
        raise NotImplementedError

    def check_domain(self, chart, u, v):
        if not (0 <= chart < self.n_charts):
            raise DomainError(f"chart {chart} not in 0..{self.n_charts - 1}")

    # -- chart bookkeeping -------------------------------------------------
    def needs_chart_switch(self, chart, u, v):
        return False

    def switch_chart(self, chart, u, v, du, dv):
        raise UnsupportedError(f"{self.kind} has a single chart")

    # -- global data ---------------------------------------------------------
    def area(self):
        raise NotImplementedError

    def euler_characteristic(self):
        raise NotImplementedError

    def quadrature_nodes(self, n):
        """Nodes (charts, us, vs, weights) with weights including the area

        density, so that sum(F(nodes) * weights) approximates the integral of
        F against the area form over the whole surface.
        """
        raise NotImplementedError

    def gauss_curvature(self, chart, u, v):
        rho = self.conformal(chart, u, v)[0]
        return -np.exp(-2.0 * np.asarray(rho)) * self.laplacian_rho(chart, u, v)


class FlatTorus(Surface):
    """Flat torus R^2 / (lx Z x ly Z) with the Euclidean metric."""

    kind = "flat_torus"

    def __init__(self, lx=1.0, ly=1.0):
        if lx <= 0 or ly <= 0:
            raise DegenerateInputError("torus periods must be positive")
        self.lx = float(lx)
        self.ly = float(ly)

    def conformal(self, chart, u, v):
        z = np.zeros_like(np.asarray(u, dtype=float))
        return z, z, z

    def laplacian_rho(self, chart, u, v):
        return np.zeros_like(np.asarray(u, dtype=float))

    def wrap(self, u, v):
        return u % self.lx, v % self.ly

    def area(self):
        return self.lx * self.ly

    def euler_characteristic(self):
        return 0

    def quadrature_nodes(self, n):
        xs = (np.arange(n) + 0.5) * self.lx / n
        ys = (np.arange(n) + 0.5) * self.ly / n
        uu, vv = np.meshgrid(xs, ys, indexing="ij")
        w = np.full(uu.size, self.lx * self.ly / (n * n))
        return np.zeros(uu.size, dtype=int), uu.ravel(), vv.ravel(), w


class RoundSphere(Surface):
    """Unit round sphere in two stereographic charts, glued by w = 1/z."""

    kind = "sphere"
    n_charts = 2

    def conformal(self, chart, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        d = 1.0 + u * u + v * v
        return np.log(2.0 / d), -2.0 * u / d, -2.0 * v / d

    def laplacian_rho(self, chart, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        d = 1.0 + u * u + v * v
        return -4.0 / (d * d)

    def needs_chart_switch(self, chart, u, v):
        return u * u + v * v > SPHERE_SWITCH_RADIUS ** 2

    def switch_chart(self, chart, u, v, du, dv):
        # w = 1/z is holomorphic, velocities transform by dw = -dz / z^2.
        z = complex(u, v)
        if z == 0:
            raise DomainError("chart transition undefined at the origin")
        w = 1.0 / z
        dw = -complex(du, dv) / (z * z)
        return 1 - chart, w.real, w.imag, dw.real, dw.imag

    def to_ambient(self, chart, u, v):
        """Embed a chart point into R^3 (unit sphere)."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        r2 = u * u + v * v
        d = 1.0 + r2
        if chart == 0:
            return np.stack([2 * u / d, 2 * v / d, (r2 - 1.0) / d], axis=-1)
        return np.stack([2 * u / d, -2 * v / d, (1.0 - r2) / d], axis=-1)

    def from_ambient(self, x, y, z):
        if z <= 0.0:
            return ChartPoint(0, x / (1.0 - z), y / (1.0 - z))
        return ChartPoint(1, x / (1.0 + z), -y / (1.0 + z))

    def area(self):
        return 4.0 * math.pi

    def euler_characteristic(self):
        return 2

    def quadrature_nodes(self, n):
        # Gauss-Legendre in the colatitude, midpoint in the longitude.
        t, wt = np.polynomial.legendre.leggauss(n)
        theta = 0.5 * math.pi * (t + 1.0)
        wtheta = 0.5 * math.pi * wt
        phi = (np.arange(n) + 0.5) * (2.0 * math.pi / n)
        wphi = 2.0 * math.pi / n
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        wgt = (np.sin(th) * wtheta[:, None] * wphi).ravel()
        x = np.sin(th) * np.cos(ph)
        y = np.sin(th) * np.sin(ph)
        zz = np.cos(th)
        charts = (zz > 0.0).astype(int).ravel()
        x, y, zz = x.ravel(), y.ravel(), zz.ravel()
        us = np.where(charts == 0, x / (1.0 - zz), x / (1.0 + zz))
        vs = np.where(charts == 0, y / (1.0 - zz), -y / (1.0 + zz))
        return charts, us, vs, wgt


class HyperbolicPlane(Surface):
    """Upper half-plane with the constant curvature -1 metric.

    Compact quotients are represented only through a declared genus, which
    fixes the area and Euler characteristic; no Fuchsian group data is kept.
    """

    kind = "hyperbolic"

    def __init__(self, genus=None):
        if genus is not None and genus < 2:
            raise DegenerateInputError("a hyperbolic quotient needs genus >= 2")
        self.genus = genus

    def check_domain(self, chart, u, v):
        super().check_domain(chart, u, v)
        if np.any(np.asarray(v) < HYPERBOLIC_FLOOR):
            raise DomainError("point below the upper half-plane floor")

    def conformal(self, chart, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return -np.log(v), np.zeros_like(u), -1.0 / v

    def laplacian_rho(self, chart, u, v):
        v = np.asarray(v, dtype=float)
        return 1.0 / (v * v)

    def _require_genus(self):
        if self.genus is None:
            raise UnsupportedError(
                "declare a quotient genus for global hyperbolic quantities")

    def area(self):
        self._require_genus()
        # Gauss-Bonnet with K = -1: area = -2 pi chi.
        return -2.0 * math.pi * self.euler_characteristic()

    def euler_characteristic(self):
        self._require_genus()
        return 2 - 2 * self.genus

    def quadrature_nodes(self, n):
        raise UnsupportedError(
            "no fundamental domain is modelled for hyperbolic quotients")


class ConformalTorus(Surface):
    """Torus with metric e^(2 rho(x, y)) * (dx^2 + dy^2).

    The factor rho is sampled on a regular grid and interpolated with a
    periodically padded bicubic spline, so metric data is C^2 inside every
    cell of the fundamental domain.
    """

    kind = "conformal_torus"
    _PAD = 4

    def __init__(self, rho_grid, lx=1.0, ly=1.0):
        from scipy.interpolate import RectBivariateSpline

        grid = np.asarray(rho_grid, dtype=float)
        if grid.ndim != 2 or min(grid.shape) < 8:
            raise DegenerateInputError("need a 2-d factor grid, >= 8 per axis")
        self.lx = float(lx)
        self.ly = float(ly)
        self.grid = grid
        nx, ny = grid.shape
        p = self._PAD
        padded = np.pad(grid, p, mode="wrap")
        xs = (np.arange(-p, nx + p)) * self.lx / nx
        ys = (np.arange(-p, ny + p)) * self.ly / ny
        self._spline = RectBivariateSpline(xs, ys, padded, kx=3, ky=3)

    @classmethod
    def from_function(cls, fn, lx=1.0, ly=1.0, n=256):
        xs = np.arange(n) * lx / n
        ys = np.arange(n) * ly / n
        uu, vv = np.meshgrid(xs, ys, indexing="ij")
        return cls(fn(uu, vv), lx=lx, ly=ly)

    def _wrapped(self, u, v):
        return np.asarray(u, float) % self.lx, np.asarray(v, float) % self.ly

    def conformal(self, chart, u, v):
        x, y = self._wrapped(u, v)
        rho = self._spline(x, y, grid=False)
        ru = self._spline(x, y, dx=1, grid=False)
        rv = self._spline(x, y, dy=1, grid=False)
        return rho, ru, rv

    def laplacian_rho(self, chart, u, v):
        x, y = self._wrapped(u, v)
        return (self._spline(x, y, dx=2, grid=False)
                + self._spline(x, y, dy=2, grid=False))

    def area(self):
        charts, us, vs, w = self.quadrature_nodes(self.grid.shape[0])
        return float(np.sum(w))

    def euler_characteristic(self):
        return 0

    def quadrature_nodes(self, n):
        xs = (np.arange(n) + 0.5) * self.lx / n
        ys = (np.arange(n) + 0.5) * self.ly / n
        uu, vv = np.meshgrid(xs, ys, indexing="ij")
        rho = self.conformal(0, uu.ravel(), vv.ravel())[0]
        w = np.exp(2.0 * rho) * (self.lx * self.ly / (n * n))
        return np.zeros(uu.size, dtype=int), uu.ravel(), vv.ravel(), w


def metric_at(surface, p):
    """Full metric data at a chart point."""
    surface.check_domain(p.chart, p.u, p.v)
    rho, ru, rv = surface.conformal(p.chart, p.u, p.v)
    rho, ru, rv = float(rho), float(ru), float(rv)
    lam2 = math.exp(2.0 * rho)
    g = np.array([[lam2, 0.0], [0.0, lam2]])
    gamma = np.array([
        [[ru, rv], [rv, -ru]],   # Gamma^u_ij
        [[-rv, ru], [ru, rv]],   # Gamma^v_ij
    ])
    k = float(surface.gauss_curvature(p.chart, p.u, p.v))
    return MetricData(g=g, christoffel=gamma, gauss_curvature=k,
                      mu_density=lam2)


def rotate90(surface, p, w):
    """Rotation by +90 degrees in the tangent plane (the complex structure).

    In a positively oriented conformal chart this is the Euclidean rotation
    of the component vector; it is an isometry and squares to -identity.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (2,):
        raise DegenerateInputError("tangent vector must have two components")
    surface.check_domain(p.chart, p.u, p.v)
    return np.array([-w[1], w[0]])


def geodesic_curvature_of(surface, p, qdot, qddot):
    """Signed geodesic curvature from first and second chart derivatives."""
    qdot = np.asarray(qdot, dtype=float)
    qddot = np.asarray(qddot, dtype=float)
    md = metric_at(surface, p)
    speed2 = md.g[0, 0] * float(qdot @ qdot)
    if speed2 <= 0.0:
        raise DegenerateInputError("geodesic curvature needs nonzero velocity")
    acc = qddot + np.einsum("kij,i,j->k", md.christoffel, qdot, qdot)
    iq = rotate90(surface, p, qdot)
    return float(md.g[0, 0] * acc @ iq) / speed2 ** 1.5


def surface_invariants(surface):
    """Area, Euler characteristic and the total-curvature quadrature."""
    chi = surface.euler_characteristic()
    area = surface.area()
    if surface.kind == "hyperbolic":
        total = -area
    else:
        charts, us, vs, w = surface.quadrature_nodes(256)
        kvals = surface.gauss_curvature(charts, us, vs)
        total = float(np.sum(np.asarray(kvals) * w))
    return SurfaceInvariants(area=float(area), euler_characteristic=int(chi),
                             total_curvature=total)
