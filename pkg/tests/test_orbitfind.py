"""Periodic orbit search: shooting and discrete action descent."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magsurf.errors import NoReturnError
from magsurf.fields import ConstantField, MagneticSystem, energy_of_s
from magsurf.flow import TangentState, integrate, state_at_energy
from magsurf.orbits import (DescentParams, DiscreteLoop, circle_loop,
                            descend_to_critical, discrete_action,
                            discrete_action_gradient, fit_circle,
                            homogeneous_oracle, loop_l2_energy, loop_length,
                            loop_mean_energy, orbit_curvature_residual,
                            orbit_radius, refine_loop, shoot_periodic)
from magsurf.surfaces import FlatTorus, HyperbolicPlane, RoundSphere

RNG = np.random.default_rng(11)


def _torus_system():
    return MagneticSystem(FlatTorus(), ConstantField(1.0))


# ---------------------------------------------------------------- oracles

def test_oracle_values_frozen():
    """Closed forms for radius and period of the circular orbits."""
    d = homogeneous_oracle("sphere", 1.0)
    assert abs(d.radius - math.pi / 4.0) < 1e-15
    assert abs(d.period - 2.0 * math.pi / math.sqrt(2.0)) < 1e-14

    d = homogeneous_oracle("flat_torus", 2.0)
    assert abs(d.radius - 0.5) < 1e-15
    assert abs(d.period - 2.0 * math.pi) < 1e-15

    d = homogeneous_oracle("hyperbolic", 2.0)
    assert abs(d.radius - math.atanh(0.5)) < 1e-15
    assert abs(d.period - 4.0 * math.pi / math.sqrt(3.0)) < 1e-14

    d = homogeneous_oracle("hyperbolic", 0.5)
    assert not d.exists_contractible
    assert d.curve_type == "boundary_arc"
    assert abs(d.boundary_angle - math.acos(0.5)) < 1e-15

    d = homogeneous_oracle("hyperbolic", 1.0)
    assert not d.exists_contractible
    assert d.curve_type == "horocycle"


def _shoot(system, s, seed):
    k = energy_of_s(s)
    return shoot_periodic(system, k, seed), k


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 4.0])
def test_shooting_torus(s):
    system = _torus_system()
    orbit, k = _shoot(system, s, TangentState(0, 0.1, 0.2, 0.0, 1.0))
    oracle = homogeneous_oracle("flat_torus", s)
    assert abs(orbit.period - oracle.period) < 1e-9
    assert abs(orbit_radius(system, orbit) - oracle.radius) < 1e-7
    assert orbit_curvature_residual(system, orbit) < 1e-6
    assert orbit.winding == (0, 0)
    assert orbit.contractible


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_shooting_sphere(s):
    system = MagneticSystem(RoundSphere(), ConstantField(1.0))
    oracle = homogeneous_oracle("sphere", s)
    rc = math.tan(oracle.radius / 2.0)
    orbit, k = _shoot(system, s, TangentState(0, 1.1 * rc, 0.0, 0.0, 1.0))
    assert abs(orbit.period - oracle.period) < 1e-9
    assert abs(orbit_radius(system, orbit) - oracle.radius) < 1e-6
    assert orbit_curvature_residual(system, orbit) < 1e-6


@pytest.mark.parametrize("s", [1.5, 2.0, 4.0])
def test_shooting_hyperbolic(s):
    system = MagneticSystem(HyperbolicPlane(genus=2), ConstantField(1.0))
    oracle = homogeneous_oracle("hyperbolic", s)
    r = oracle.radius
    seed = TangentState(0, 0.9 * math.sinh(r), math.cosh(r), 0.0, 1.0)
    orbit, k = _shoot(system, s, seed)
    assert abs(orbit.period - oracle.period) < 1e-9
    assert abs(orbit_radius(system, orbit) - oracle.radius) < 1e-6
    assert orbit_curvature_residual(system, orbit) < 1e-6


def test_shooting_subcritical_hyperbolic_fails():
    """Below the critical speed no contractible orbit exists; the shooter
    reports no return instead of inventing one."""
    system = MagneticSystem(HyperbolicPlane(genus=2), ConstantField(1.0))
    k = energy_of_s(0.8)
    with pytest.raises(NoReturnError):
        shoot_periodic(system, k, TangentState(0, 0.0, 1.0, 1.0, 0.0),
                       max_time=40.0)


def test_flat_geodesic_winding():
    """With no field the (1,0) lattice geodesic closes up with the right
    winding and period."""
    from magsurf.flow import Section
    system = MagneticSystem(FlatTorus(), ConstantField(0.0))
    k = 0.5   # unit speed
    section = Section(coord=0, value=0.0, direction=1, wrap=1.0, chart=0)
    orbit = shoot_periodic(system, k, TangentState(0, 0.0, 0.3, 1.0, 0.0),
                           section=section)
    assert orbit.winding == (1, 0)
    assert not orbit.contractible
    assert abs(orbit.period - 1.0) < 1e-9


def test_fit_circle_exact():
    ang = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    pts = np.column_stack([1.5 + 0.3 * np.cos(ang), -0.2 + 0.3 * np.sin(ang)])
    center, r = fit_circle(pts)
    assert abs(center[0] - 1.5) < 1e-12
    assert abs(center[1] + 0.2) < 1e-12
    assert abs(r - 0.3) < 1e-12


# ------------------------------------------------- discrete action descent

def test_action_gradient_matches_finite_differences():
    system = _torus_system()
    k = energy_of_s(2.0)
    for _ in range(10):
        n = 24
        base = circle_loop((0.5, 0.5), 0.3, n, 5.0)
        verts = base.vertices + 0.02 * RNG.normal(size=(n, 2))
        loop = DiscreteLoop(vertices=verts, period=5.0 + RNG.uniform(-1, 1),
                            winding=(0, 0))
        gv, gt = discrete_action_gradient(system, k, loop)
        g = np.concatenate([gv.ravel(), [gt]])
        h = 1e-6
        fd = np.empty(2 * n + 1)
        for j in range(2 * n):
            vp = verts.copy().ravel()
            vm = verts.copy().ravel()
            vp[j] += h
            vm[j] -= h
            lp = DiscreteLoop(vertices=vp.reshape(n, 2), period=loop.period,
                              winding=(0, 0))
            lm = DiscreteLoop(vertices=vm.reshape(n, 2), period=loop.period,
                              winding=(0, 0))
            fd[j] = (discrete_action(system, k, lp)
                     - discrete_action(system, k, lm)) / (2 * h)
        lp = DiscreteLoop(vertices=verts, period=loop.period + h,
                          winding=(0, 0))
        lm = DiscreteLoop(vertices=verts, period=loop.period - h,
                          winding=(0, 0))
        fd[-1] = (discrete_action(system, k, lp)
                  - discrete_action(system, k, lm)) / (2 * h)
        scale = max(1.0, np.max(np.abs(fd)))
        assert np.max(np.abs(g - fd)) / scale < 1e-6


def test_constant_loop_action():
    """A loop collapsed to a point has action k T (pure energy term)."""
    system = _torus_system()
    k = 0.125
    loop = DiscreteLoop(vertices=np.tile([0.3, 0.4], (16, 1)), period=3.0,
                        winding=(0, 0))
    assert abs(discrete_action(system, k, loop) - k * 3.0) < 1e-14


@given(st.integers(min_value=3, max_value=40),
       st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=50, deadline=None)
def test_length_energy_inequality(n, period):
    """Discrete Cauchy-Schwarz: length^2 <= 2 T^2 mean-energy, i.e.
    ell^2 <= n * sum of squared segment lengths."""
    system = _torus_system()
    verts = 0.2 * np.cos(2 * np.pi * np.arange(n) / n)[:, None] \
        * np.ones((1, 2)) + 0.1 * np.sin(np.arange(n))[:, None]
    loop = DiscreteLoop(vertices=verts + 0.5, period=period, winding=(0, 0))
    ell = loop_length(system, loop)
    e = loop_l2_energy(system, loop)
    assert e >= 0.0
    # mean energy is e / (2 T^2); the inequality reads ell^2 <= n e
    assert abs(loop_mean_energy(system, loop) - e / (2.0 * period ** 2)) \
        < 1e-12 * max(1.0, e / period ** 2)
    assert ell ** 2 <= n * e * (1.0 + 1e-12)


def test_descent_finds_torus_orbit():
    """Gradient descent from a nearby circle converges to the circular
    orbit with the oracle period and mean energy k."""
    system = _torus_system()
    s = 2.0
    k = energy_of_s(s)
    loop = circle_loop((0.5, 0.5), 0.42, 256, 5.5)
    res = descend_to_critical(system, k, loop)
    assert res.outcome == "converged"
    oracle = homogeneous_oracle("flat_torus", s)
    # residual discretization error at 256 vertices is a few 1e-4
    assert abs(res.loop.period - oracle.period) < 5e-4
    assert abs(loop_mean_energy(system, res.loop) - k) < 1e-6
    center, r = fit_circle(res.loop.vertices)
    assert abs(r - oracle.radius) < 1e-4


def test_descent_matches_shooting_on_sphere():
    """The saddle refinement reaches the orbit the shooter finds."""
    system = MagneticSystem(RoundSphere(), ConstantField(1.0))
    s = 1.0
    k = energy_of_s(s)
    oracle = homogeneous_oracle("sphere", s)
    rc = math.tan(oracle.radius / 2.0)
    loop = circle_loop((0.0, 0.0), 1.06 * rc, 512, 1.02 * oracle.period)
    res = descend_to_critical(system, k, loop,
                              DescentParams(tol=1e-5, max_iter=50))
    assert res.outcome == "converged"
    assert res.grad_norm < 1e-5
    assert abs(res.loop.period - oracle.period) < 2e-4
    assert abs(loop_mean_energy(system, res.loop) - k) < 1e-4


def test_refinement_converges_with_resolution():
    """Doubling the vertex count moves the recovered period by less than
    the coarse discretization error."""
    system = _torus_system()
    s = 2.0
    k = energy_of_s(s)
    oracle = homogeneous_oracle("flat_torus", s)
    periods = []
    for n in (256, 512):
        loop = circle_loop((0.5, 0.5), 0.45, n, 5.8)
        res = descend_to_critical(system, k, loop)
        assert res.outcome == "converged"
        periods.append(res.loop.period)
    errs = [abs(p - oracle.period) for p in periods]
    # quadratic convergence in the vertex count: halving the spacing
    # should cut the period error by about four
    assert errs[1] < errs[0] / 3.0
    assert errs[1] < 1e-4


def test_descent_collapse_detected():
    """A tiny seed loop shrinks to a point; the collapse is reported."""
    system = _torus_system()
    k = energy_of_s(2.0)
    loop = circle_loop((0.5, 0.5), 0.02, 64, 0.3)
    res = descend_to_critical(system, k, loop,
                              DescentParams(refine=False, max_iter=2000))
    assert res.outcome == "collapsed"


def test_refine_loop_doubles_resolution():
    system = _torus_system()
    loop = circle_loop((0.5, 0.5), 0.3, 32, 4.0)
    fine = refine_loop(system, loop)
    assert fine.n == 64
    assert abs(loop_length(system, fine) - 2 * np.pi * 0.3) < 1e-2
