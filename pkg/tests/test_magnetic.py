"""Fields, fluxes and local primitives of the magnetic form."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magsurf.errors import (DegenerateInputError, NoGlobalPrimitiveError,
                            UnsupportedError)
from magsurf.fields import (CallableField, ConstantField, MagneticSystem,
                            TorusField, energy_of_s, flux_total,
                            local_primitive, s_of_energy)
from magsurf.surfaces import FlatTorus, HyperbolicPlane, RoundSphere

RNG = np.random.default_rng(7)


@given(st.floats(min_value=1e-6, max_value=1e6))
@settings(max_examples=200, deadline=None)
def test_speed_energy_roundtrip(s):
    k = energy_of_s(s)
    assert k > 0
    assert abs(s_of_energy(k) - s) <= 1e-12 * s
    # the defining relation: speed on the level set is sqrt(2k) = 1/s
    assert abs(math.sqrt(2.0 * k) * s - 1.0) < 1e-12


def test_energy_of_s_rejects_nonpositive():
    with pytest.raises(DegenerateInputError):
        energy_of_s(0.0)
    with pytest.raises(DegenerateInputError):
        s_of_energy(-1.0)


def test_flux_constant_fields():
    sph = MagneticSystem(RoundSphere(), ConstantField(1.0))
    assert abs(flux_total(sph) - 4.0 * math.pi) < 1e-8

    tor = MagneticSystem(FlatTorus(2.0, 0.5), ConstantField(3.0))
    assert abs(flux_total(tor) - 3.0) < 1e-12

    hyp = MagneticSystem(HyperbolicPlane(genus=2), ConstantField(1.0))
    assert abs(flux_total(hyp) - 4.0 * math.pi) < 1e-12


def test_flux_hyperbolic_nonconstant_unsupported():
    hyp = MagneticSystem(HyperbolicPlane(genus=2),
                         CallableField(lambda c, u, v: u))
    with pytest.raises(UnsupportedError):
        flux_total(hyp)


def test_flux_mean_zero_torus_field():
    sys = MagneticSystem(
        FlatTorus(),
        TorusField(lambda x, y: np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)))
    assert abs(flux_total(sys)) < 1e-12


def test_primitive_jacobian_consistency():
    """jacobian matches finite differences of theta."""
    systems = [
        MagneticSystem(FlatTorus(), ConstantField(2.0)),
        MagneticSystem(HyperbolicPlane(genus=2), ConstantField(1.5)),
        MagneticSystem(RoundSphere(), ConstantField(1.0)),
        MagneticSystem(FlatTorus(), TorusField(
            lambda x, y: np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y))),
    ]
    for system in systems:
        prim = local_primitive(system)
        for _ in range(10):
            if system.surface.kind == "hyperbolic":
                u, v = RNG.uniform(-1, 1), RNG.uniform(0.5, 2.0)
            else:
                u, v = RNG.uniform(0.05, 0.95, size=2)
            h = 1e-6
            jac = np.asarray(prim.jacobian(0, u, v))
            fd = np.empty((2, 2))
            fd[:, 0] = (np.asarray(prim.theta(0, u + h, v))
                        - np.asarray(prim.theta(0, u - h, v))) / (2 * h)
            fd[:, 1] = (np.asarray(prim.theta(0, u, v + h))
                        - np.asarray(prim.theta(0, u, v - h))) / (2 * h)
            scale = max(1.0, np.max(np.abs(fd)))
            assert np.max(np.abs(jac - fd)) / scale < 1e-6


def test_stokes_residual_second_order():
    """The midpoint circulation mismatch d(theta) - sigma over a small
    square shrinks like h^2 relative to enclosed flux."""
    system = MagneticSystem(RoundSphere(), ConstantField(1.0))
    prim = local_primitive(system)
    res = [abs(prim.stokes_residual(system, 0, (0.3, 0.2), h))
           for h in (0.2, 0.1, 0.05)]
    r1 = math.log2(res[0] / res[1])
    r2 = math.log2(res[1] / res[2])
    assert 1.6 < r1 < 2.6
    assert 1.6 < r2 < 2.6


def test_spectral_primitive_is_global():
    sys = MagneticSystem(FlatTorus(), TorusField(
        lambda x, y: 2 * np.pi * np.cos(2 * np.pi * x)))
    prim = local_primitive(sys)
    # global single-valuedness: circulation around both lattice loops is
    # reproduced exactly by periodicity of theta
    for u, v in [(0.0, 0.0), (0.37, 0.81)]:
        t0 = np.asarray(prim.theta(0, u, v))
        t1 = np.asarray(prim.theta(0, u + 1.0, v))
        t2 = np.asarray(prim.theta(0, u, v + 1.0))
        assert np.max(np.abs(t1 - t0)) < 1e-10
        assert np.max(np.abs(t2 - t0)) < 1e-10


def test_spectral_primitive_rejects_net_flux():
    sys = MagneticSystem(FlatTorus(), ConstantField(1.0))
    from magsurf.fields import TorusSpectralPrimitive
    with pytest.raises(NoGlobalPrimitiveError):
        TorusSpectralPrimitive(sys)


def test_line_integral_matches_flux_on_disc():
    """Circulation of a primitive around a small circle equals the
    enclosed flux (Stokes), cross-checked by dense quadrature."""
    system = MagneticSystem(RoundSphere(), ConstantField(1.0))
    prim = local_primitive(system)
    r = 0.3
    n = 4096
    ang = 2 * np.pi * np.arange(n + 1) / n
    pts = np.column_stack([0.2 + r * np.cos(ang), 0.1 + r * np.sin(ang)])
    circ = prim.line_integral(0, pts)
    # dense midpoint quadrature of form_density over the disc
    nr, na = 400, 400
    rr = (np.arange(nr) + 0.5) * r / nr
    aa = (np.arange(na) + 0.5) * 2 * np.pi / na
    rg, ag = np.meshgrid(rr, aa, indexing="ij")
    xs = 0.2 + rg * np.cos(ag)
    ys = 0.1 + rg * np.sin(ag)
    dens = system.form_density(0, xs.ravel(), ys.ravel())
    flux = float(np.sum(dens * rg.ravel()) * (r / nr) * (2 * np.pi / na))
    assert abs(circ - flux) < 1e-6 * max(1.0, abs(flux))


def test_constant_field_vectorized():
    f = ConstantField(2.5)
    vals = f.eval(0, np.zeros(5), np.ones(5))
    assert np.all(np.asarray(vals) == 2.5)
