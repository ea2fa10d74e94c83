"""Metric, Christoffel, curvature and chart machinery."""
import math

import numpy as np
import pytest

from magsurf.errors import DomainError, UnsupportedError
from magsurf.surfaces import (ChartPoint, ConformalTorus, FlatTorus,
                              HyperbolicPlane, RoundSphere,
                              geodesic_curvature_of, metric_at, rotate90,
                              surface_invariants)

RNG = np.random.default_rng(42)
FD_STEP = 1e-5
FD_RTOL = 1e-6


def _surfaces():
    grid = 0.08 * np.cos(2.0 * np.pi * np.arange(48)[:, None] / 48) \
        * np.sin(2.0 * np.pi * np.arange(48)[None, :] / 48)
    return [
        (FlatTorus(1.0, 1.0), 0, (0.0, 1.0), (0.0, 1.0)),
        (RoundSphere(), 0, (-1.2, 1.2), (-1.2, 1.2)),
        (RoundSphere(), 1, (-1.2, 1.2), (-1.2, 1.2)),
        (HyperbolicPlane(genus=2), 0, (-2.0, 2.0), (0.3, 3.0)),
        (ConformalTorus(grid), 0, (0.0, 1.0), (0.0, 1.0)),
    ]


def _fd_christoffel(surface, chart, u, v):
    """Central differences of the metric, assembled the classical way."""
    h = FD_STEP

    def g(uu, vv):
        return metric_at(surface, ChartPoint(chart, uu, vv)).g

    dg_du = (g(u + h, v) - g(u - h, v)) / (2 * h)
    dg_dv = (g(u, v + h) - g(u, v - h)) / (2 * h)
    dg = np.stack([dg_du, dg_dv])            # dg[c, i, j] = d_c g_ij
    ginv = np.linalg.inv(g(u, v))
    gamma = np.zeros((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                s = 0.0
                for m in range(2):
                    s += ginv[k, m] * (dg[i, m, j] + dg[j, m, i]
                                       - dg[m, i, j])
                gamma[k, i, j] = 0.5 * s
    return gamma


@pytest.mark.parametrize("surface,chart,urange,vrange", _surfaces(),
                         ids=["flat", "sphere0", "sphere1", "hyp", "grid"])
def test_christoffel_matches_finite_differences(surface, chart, urange,
                                                vrange):
    for _ in range(20):
        u = RNG.uniform(*urange)
        v = RNG.uniform(*vrange)
        got = metric_at(surface, ChartPoint(chart, u, v)).christoffel
        want = _fd_christoffel(surface, chart, u, v)
        scale = max(1.0, np.max(np.abs(want)))
        assert np.max(np.abs(got - want)) / scale < FD_RTOL


@pytest.mark.parametrize("surface,chart,urange,vrange", _surfaces(),
                         ids=["flat", "sphere0", "sphere1", "hyp", "grid"])
def test_rotation_is_isometric_and_orthogonal(surface, chart, urange,
                                              vrange):
    for _ in range(20):
        u = RNG.uniform(*urange)
        v = RNG.uniform(*vrange)
        pt = ChartPoint(chart, u, v)
        g = metric_at(surface, pt).g
        w = RNG.normal(size=2)
        r = rotate90(surface, pt, w)
        rr = rotate90(surface, pt, r)
        assert abs(w @ g @ r) < 1e-12 * max(1.0, abs(w @ g @ w))
        assert abs(r @ g @ r - w @ g @ w) < 1e-12 * max(1.0, w @ g @ w)
        assert np.max(np.abs(rr + w)) < 1e-12 * max(1.0, np.max(np.abs(w)))


def test_known_curvatures():
    sph = RoundSphere()
    hyp = HyperbolicPlane(genus=2)
    flat = FlatTorus()
    for _ in range(20):
        u, v = RNG.uniform(-1, 1, size=2)
        assert abs(sph.gauss_curvature(0, u, v) - 1.0) < 1e-12
        assert abs(sph.gauss_curvature(1, u, v) - 1.0) < 1e-12
        assert abs(hyp.gauss_curvature(0, u, abs(v) + 0.2) + 1.0) < 1e-12
        assert abs(flat.gauss_curvature(0, u, v)) < 1e-15


def test_total_curvature_sphere():
    inv = surface_invariants(RoundSphere())
    assert inv.euler_characteristic == 2
    assert abs(inv.area - 4.0 * math.pi) < 1e-8
    assert abs(inv.total_curvature - 4.0 * math.pi) < 1e-8


def test_total_curvature_flat_torus():
    inv = surface_invariants(FlatTorus(2.0, 0.5))
    assert inv.euler_characteristic == 0
    assert abs(inv.area - 1.0) < 1e-12
    assert abs(inv.total_curvature) < 1e-10


def test_total_curvature_conformal_torus():
    n = 96
    x = np.arange(n) / n
    grid = 0.1 * np.cos(2 * np.pi * x)[:, None] \
        * np.sin(2 * np.pi * x)[None, :]
    inv = surface_invariants(ConformalTorus(grid))
    assert inv.euler_characteristic == 0
    assert abs(inv.total_curvature) < 1e-4


def test_hyperbolic_declared_area():
    inv = surface_invariants(HyperbolicPlane(genus=2))
    assert inv.euler_characteristic == -2
    assert abs(inv.area - 4.0 * math.pi) < 1e-12
    assert abs(inv.total_curvature + 4.0 * math.pi) < 1e-12
    with pytest.raises(UnsupportedError):
        HyperbolicPlane(genus=2).quadrature_nodes(8)
    with pytest.raises(UnsupportedError):
        surface_invariants(HyperbolicPlane())


def test_hyperbolic_domain_floor():
    hyp = HyperbolicPlane(genus=2)
    with pytest.raises(DomainError):
        metric_at(hyp, ChartPoint(0, 0.0, -1.0))


def test_sphere_chart_transition_consistency():
    """The two stereographic charts agree through the ambient embedding."""
    sph = RoundSphere()
    for _ in range(20):
        u, v = RNG.uniform(1.1, 1.5, size=2)   # |z| > 1, lands in chart 1
        amb = sph.to_ambient(0, u, v)
        pt = sph.from_ambient(*amb)
        assert pt.chart == 1
        back = sph.to_ambient(pt.chart, pt.u, pt.v)
        assert np.max(np.abs(np.asarray(amb) - np.asarray(back))) < 1e-12
        assert abs(float(np.dot(amb, amb)) - 1.0) < 1e-12


def test_sphere_switch_preserves_state():
    """switch_chart maps position and velocity without changing speed."""
    sph = RoundSphere()
    for _ in range(10):
        u, v = RNG.uniform(1.5, 2.5, size=2)
        du, dv = RNG.normal(size=2)
        g0 = metric_at(sph, ChartPoint(0, u, v)).g
        sp0 = np.array([du, dv]) @ g0 @ np.array([du, dv])
        c1, u1, v1, du1, dv1 = sph.switch_chart(0, u, v, du, dv)
        assert c1 == 1
        g1 = metric_at(sph, ChartPoint(1, u1, v1)).g
        sp1 = np.array([du1, dv1]) @ g1 @ np.array([du1, dv1])
        assert abs(sp1 - sp0) < 1e-10 * sp0


def test_geodesic_circle_curvature():
    """Euclidean circles in the charts have the classical geodesic
    curvature: cot(r) on the sphere (chart radius tan(r/2)) and coth(r)
    in the hyperbolic plane (center (0, a cosh r), radius a sinh r)."""
    sph = RoundSphere()
    r = 0.7
    rc = math.tan(r / 2.0)
    for phi in np.linspace(0.0, 2 * np.pi, 7):
        q = np.array([rc * math.cos(phi), rc * math.sin(phi)])
        dq = np.array([-math.sin(phi), math.cos(phi)])
        ddq = np.array([-math.cos(phi), -math.sin(phi)]) / rc
        kap = geodesic_curvature_of(sph, ChartPoint(0, q[0], q[1]),
                                    dq * rc, ddq * rc ** 2)
        assert abs(kap - 1.0 / math.tan(r)) < 1e-8

    hyp = HyperbolicPlane(genus=2)
    a, r = 1.0, 0.6
    cy, re = a * math.cosh(r), a * math.sinh(r)
    for phi in np.linspace(0.0, 2 * np.pi, 7):
        q = np.array([re * math.cos(phi), cy + re * math.sin(phi)])
        dq = np.array([-math.sin(phi), math.cos(phi)])
        ddq = np.array([-math.cos(phi), -math.sin(phi)]) / re
        kap = geodesic_curvature_of(hyp, ChartPoint(0, q[0], q[1]),
                                    dq * re, ddq * re ** 2)
        assert abs(kap - 1.0 / math.tanh(r)) < 1e-8


def test_conformal_torus_interpolates_samples():
    n = 64
    x = np.arange(n) / n

    def rho_fn(u, v):
        return 0.05 * np.sin(2 * np.pi * u) * np.cos(2 * np.pi * v)

    grid = rho_fn(x[:, None], x[None, :])
    surf = ConformalTorus(grid)
    for _ in range(30):
        u, v = RNG.uniform(0, 1, size=2)
        rho, _, _ = surf.conformal(0, u, v)
        assert abs(rho - rho_fn(u, v)) < 1e-5
