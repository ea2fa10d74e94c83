"""Magnetic 2-forms sigma = f * mu, fluxes, speed/energy dictionary and

chart-local primitives.  A field is described by its density f relative to
the area form; in chart coordinates sigma = f * e^(2 rho) du ^ dv.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import (DegenerateInputError, DomainError, NoGlobalPrimitiveError,
                     UnsupportedError)
from .surfaces import ChartPoint, FlatTorus, HyperbolicPlane

EXACTNESS_TOL = 1e-10


class MagneticField:
    """Scalar density f of the magnetic form against the area form."""

    def eval(self, chart, u, v):
        raise NotImplementedError


class ConstantField(MagneticField):
    def __init__(self, value):
        self.value = float(value)

    def eval(self, chart, u, v):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            return self.value
        return np.full(u.shape, self.value)


class CallableField(MagneticField):
    """Field given by a chart-aware callable f(chart, u, v) (vectorized)."""

    def __init__(self, fn):
        self.fn = fn

    def eval(self, chart, u, v):
        return self.fn(chart, u, v)


class TorusField(MagneticField):
    """Doubly periodic field on a torus given by a plain callable f(x, y)."""

    def __init__(self, fn, lx=1.0, ly=1.0):
        self.fn = fn
        self.lx = float(lx)
        self.ly = float(ly)

    def eval(self, chart, u, v):
        return self.fn(np.asarray(u, float) % self.lx,
                       np.asarray(v, float) % self.ly)


@dataclasses.dataclass
class MagneticSystem:
    """A surface together with a magnetic field density."""

    surface: object
    field: MagneticField

    def field_at(self, chart, u, v):
        return self.field.eval(chart, u, v)

    def form_density(self, chart, u, v):
        """Chart density of sigma, i.e. f * e^(2 rho)."""
        rho = self.surface.conformal(chart, u, v)[0]
        return self.field.eval(chart, u, v) * np.exp(2.0 * np.asarray(rho))


def energy_of_s(s):
    if s <= 0:
        raise DegenerateInputError("the speed parameter must be positive")
    return 0.5 / (s * s)


def s_of_energy(k):
    if k <= 0:
        raise DegenerateInputError("the energy level must be positive")
    return 1.0 / math.sqrt(2.0 * k)


def flux_total(system, n=512):
    """Total flux of sigma over the surface by quadrature.

    Hyperbolic quotients carry no fundamental-domain geometry, so only
    constant fields are integrable there (flux = value * area).
    """
    surf = system.surface
    if isinstance(surf, HyperbolicPlane):
        if isinstance(system.field, ConstantField):
            return system.field.value * surf.area()
        raise UnsupportedError(
            "hyperbolic quotient flux is available for constant fields only")
    charts, us, vs, w = surf.quadrature_nodes(n)
    fvals = np.asarray(system.field.eval(charts, us, vs), dtype=float)
    return float(np.sum(fvals * w))


# ---------------------------------------------------------------------------
# chart-local and global primitives
# ---------------------------------------------------------------------------

class LocalPrimitive:
    """A 1-form theta with d theta = sigma on its region of validity."""

    def theta(self, chart, u, v):
        """Components (theta_u, theta_v) at a chart point (vectorized)."""
        raise NotImplementedError

    def jacobian(self, chart, u, v):
        """2x2 array J[a, b] = d theta_a / d x_b at a scalar chart point."""
        raise NotImplementedError

    def line_integral(self, chart, pts):
        """Integral of theta along a polyline (midpoint rule per segment)."""
        pts = np.asarray(pts, dtype=float)
        mids = 0.5 * (pts[:-1] + pts[1:])
        dx = np.diff(pts, axis=0)
        t1, t2 = self.theta(chart, mids[:, 0], mids[:, 1])
        return float(np.sum(t1 * dx[:, 0] + t2 * dx[:, 1]))

    def stokes_residual(self, system, chart, center, h, n=1):
        """|circulation - flux| / area on the square of side h at center.

        Midpoint rules are used on both sides so the residual scales like
        h^2 for a genuine primitive.
        """
        cx, cy = center
        x0, x1 = cx - h / 2, cx + h / 2
        y0, y1 = cy - h / 2, cy + h / 2
        corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]])
        circ = 0.0
        for a, b in zip(corners[:-1], corners[1:]):
            ts = (np.arange(n) + 0.5) / n
            mids = a[None, :] + ts[:, None] * (b - a)[None, :]
            t1, t2 = self.theta(chart, mids[:, 0], mids[:, 1])
            seg = (b - a) / n
            circ += float(np.sum(t1 * seg[0] + t2 * seg[1]))
        xs = x0 + (np.arange(n) + 0.5) * h / n
        ys = y0 + (np.arange(n) + 0.5) * h / n
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        dens = np.asarray(system.form_density(chart, xx.ravel(), yy.ravel()))
        flux = float(np.sum(dens)) * (h / n) ** 2
        return abs(circ - flux) / (h * h)


class ZeroPrimitive(LocalPrimitive):
    def theta(self, chart, u, v):
        u = np.asarray(u, dtype=float)
        return np.zeros_like(u), np.zeros_like(u)

    def jacobian(self, chart, u, v):
        return np.zeros((2, 2))

    def jacobian_many(self, chart, u, v):
        return np.zeros((np.asarray(u).size, 2, 2))


class ClosedFormPrimitive(LocalPrimitive):
    def __init__(self, theta_fn, jac_fn):
        self._theta = theta_fn
        self._jac = jac_fn

    def theta(self, chart, u, v):
        return self._theta(chart, np.asarray(u, float), np.asarray(v, float))

    def jacobian(self, chart, u, v):
        return self._jac(chart, u, v)

    def jacobian_many(self, chart, u, v):
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        return np.array([self._jac(chart, uu, vv) for uu, vv in zip(u, v)])


class LineIntegralPrimitive(LocalPrimitive):
    """theta = -F(x, y) dx with F(x, y) the fiberwise integral of the chart

    density from a reference height; valid on any chart rectangle that the
    vertical segments stay inside.
    """

    _NODES = 48

    def __init__(self, system, chart, ref_v=0.0):
        self.system = system
        self.chart = chart
        self.ref_v = float(ref_v)
        t, w = np.polynomial.legendre.leggauss(self._NODES)
        self._t = 0.5 * (t + 1.0)
        self._w = 0.5 * w

    def _density(self, u, v):
        return np.asarray(self.system.form_density(self.chart, u, v), float)

    def _fint(self, u, v):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        span = v - self.ref_v
        ys = self.ref_v + span[:, None] * self._t[None, :]
        xs = np.broadcast_to(u[:, None], ys.shape)
        vals = self._density(xs.ravel(), ys.ravel()).reshape(ys.shape)
        return span * (vals @ self._w)

    def theta(self, chart, u, v):
        if chart != self.chart:
            raise DomainError("primitive evaluated outside its chart")
        u = np.asarray(u, dtype=float)
        res = self._fint(u, v)
        if u.ndim == 0:
            return -float(res[0]), 0.0
        return -res, np.zeros_like(res)

    def jacobian(self, chart, u, v):
        if chart != self.chart:
            raise DomainError("primitive evaluated outside its chart")
        eps = 1e-6
        dfx = (self._fint(u + eps, v) - self._fint(u - eps, v)) / (2 * eps)
        return np.array([[-float(dfx[0]), -float(self._density(u, v))],
                         [0.0, 0.0]])

    def jacobian_many(self, chart, u, v):
        if chart != self.chart:
            raise DomainError("primitive evaluated outside its chart")
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        eps = 1e-6
        dfx = (self._fint(u + eps, v) - self._fint(u - eps, v)) / (2 * eps)
        out = np.zeros((u.size, 2, 2))
        out[:, 0, 0] = -dfx
        out[:, 0, 1] = -self._density(u, v)
        return out


class TorusSpectralPrimitive(LocalPrimitive):
    """Global primitive of an exact form on a flat torus.

    Solves the periodic Poisson problem for the chart density and keeps a
    truncated Fourier mode list, so values and derivatives are smooth and
    dtheta = sigma holds to spectral accuracy.  An optional harmonic part
    (c1 dx + c2 dy) can be added without changing dtheta.
    """

    def __init__(self, system, n=256, harmonic=(0.0, 0.0), keep_tol=1e-13):
        surf = system.surface
        if not hasattr(surf, "lx"):
            raise UnsupportedError("spectral primitives require a torus")
        self.lx, self.ly = surf.lx, surf.ly
        self.harmonic = (float(harmonic[0]), float(harmonic[1]))
        xs = np.arange(n) * self.lx / n
        ys = np.arange(n) * self.ly / n
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        dens = np.asarray(system.form_density(0, xx, yy), dtype=float)
        fhat = np.fft.fft2(dens) / (n * n)
        mean = abs(fhat[0, 0])
        if mean > 1e-9 * max(1.0, float(np.abs(dens).max())):
            raise NoGlobalPrimitiveError(
                "nonzero total flux: no global primitive on the torus")
        kx = 2.0 * math.pi * np.fft.fftfreq(n, d=self.lx / n)
        ky = 2.0 * math.pi * np.fft.fftfreq(n, d=self.ly / n)
        kxx, kyy = np.meshgrid(kx, ky, indexing="ij")
        k2 = kxx ** 2 + kyy ** 2
        k2[0, 0] = 1.0
        ghat = -fhat / k2
        ghat[0, 0] = 0.0
        keep = np.abs(ghat) > keep_tol * max(1.0, np.abs(ghat).max())
        self._kx = kxx[keep]
        self._ky = kyy[keep]
        self._coef = ghat[keep]

    def _gsum(self, u, v, mx=0, my=0):
        """Real part of sum coef * (i kx)^mx (i ky)^my exp(i(kx u + ky v))."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        phase = np.exp(1j * (np.outer(u, self._kx) + np.outer(v, self._ky)))
        fac = self._coef * (1j * self._kx) ** mx * (1j * self._ky) ** my
        return np.real(phase @ fac)

    def theta(self, chart, u, v):
        scalar = np.asarray(u).ndim == 0
        t1 = -self._gsum(u, v, my=1) + self.harmonic[0]
        t2 = self._gsum(u, v, mx=1) + self.harmonic[1]
        if scalar:
            return float(t1[0]), float(t2[0])
        return t1, t2

    def jacobian(self, chart, u, v):
        return np.array([
            [-self._gsum(u, v, mx=1, my=1)[0], -self._gsum(u, v, my=2)[0]],
            [self._gsum(u, v, mx=2)[0], self._gsum(u, v, mx=1, my=1)[0]],
        ])

    def jacobian_many(self, chart, u, v):
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        out = np.empty((u.size, 2, 2))
        gxy = self._gsum(u, v, mx=1, my=1)
        out[:, 0, 0] = -gxy
        out[:, 0, 1] = -self._gsum(u, v, my=2)
        out[:, 1, 0] = self._gsum(u, v, mx=2)
        out[:, 1, 1] = gxy
        return out


def local_primitive(system, chart=0, ref_v=None, prefer_global=True):
    """Build a primitive of sigma usable on the given chart.

    On a torus with (numerically) zero total flux a global spectral
    primitive is returned; otherwise a chart-local fiber-integral primitive.
    Known homogeneous cases get closed forms.
    """
    surf = system.surface
    fld = system.field
    if isinstance(fld, ConstantField) and fld.value == 0.0:
        return ZeroPrimitive()
    if isinstance(surf, HyperbolicPlane) and isinstance(fld, ConstantField):
        c = fld.value

        def theta_fn(chart, u, v):
            return c / v, np.zeros_like(np.asarray(u, float))

        def jac_fn(chart, u, v):
            return np.array([[0.0, -c / (v * v)], [0.0, 0.0]])

        return ClosedFormPrimitive(theta_fn, jac_fn)
    if isinstance(surf, FlatTorus) and isinstance(fld, ConstantField):
        c = fld.value

        def theta_fn(chart, u, v):
            u = np.asarray(u, float)
            return -c * np.asarray(v, float), np.zeros_like(u)

        def jac_fn(chart, u, v):
            return np.array([[0.0, -c], [0.0, 0.0]])

        return ClosedFormPrimitive(theta_fn, jac_fn)
    if hasattr(surf, "lx") and prefer_global:
        try:
            return TorusSpectralPrimitive(system)
        except NoGlobalPrimitiveError:
            pass
    if ref_v is None:
        ref_v = 1.0 if isinstance(surf, HyperbolicPlane) else 0.0
    return LineIntegralPrimitive(system, chart, ref_v=ref_v)
