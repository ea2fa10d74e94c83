"""Unit tangent bundle machinery: the canonical frame and coframe, contact

certificates for rescaled flows, invariant-measure actions and rotation
data, and the boundary action identity checks.

Coordinates on the bundle are (u, v, phi) with phi the angle of the unit
vector against the first conformal frame vector e1 = e^(-rho) d/du.  In
these coordinates

    alpha = e^rho (cos phi du + sin phi dv)
    beta  = e^rho (-sin phi du + cos phi dv)
    psi   = d phi - rho_v du + rho_u dv

and the generator of the rescaled flow is X_s = X + s f V with V = d/dphi
and X the geodesic generator.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import (DegenerateInputError, InvalidCandidateError,
                     UnsupportedError)
from .fields import ConstantField, flux_total, local_primitive
from .flow import trajectory_speeds
from .regions import region_flux, taimanov_value
from .surfaces import FlatTorus, HyperbolicPlane, RoundSphere

_CONSISTENCY_SAMPLES = 32


def coframe_coefficients(surface, chart, u, v, phi):
    """Components of (alpha, psi, beta) in the coordinates (u, v, phi).

    Returns three arrays of shape (..., 3).
    """
    rho, ru, rv = surface.conformal(chart, u, v)
    rho = np.asarray(rho, float)
    ru = np.broadcast_to(np.asarray(ru, float), rho.shape)
    rv = np.broadcast_to(np.asarray(rv, float), rho.shape)
    lam = np.exp(rho)
    c, s = np.cos(phi), np.sin(phi)
    zero = np.zeros_like(lam)
    one = np.ones_like(lam)
    alpha = np.stack([lam * c, lam * s, zero], axis=-1)
    beta = np.stack([-lam * s, lam * c, zero], axis=-1)
    psi = np.stack([-rv, ru, one], axis=-1)
    return alpha, psi, beta


def frame_vectors(surface, chart, u, v, phi):
    """Components of (X, V, H) in the coordinates (u, v, phi)."""
    rho, ru, rv = surface.conformal(chart, u, v)
    rho = np.asarray(rho, float)
    ru = np.broadcast_to(np.asarray(ru, float), rho.shape)
    rv = np.broadcast_to(np.asarray(rv, float), rho.shape)
    lam_inv = np.exp(-rho)
    c, s = np.cos(phi), np.sin(phi)
    zero = np.zeros_like(lam_inv)
    one = np.ones_like(lam_inv)
    x_vec = np.stack([lam_inv * c, lam_inv * s,
                      lam_inv * (rv * c - ru * s)], axis=-1)
    v_vec = np.stack([zero, zero, one], axis=-1)
    h_vec = np.stack([-lam_inv * s, lam_inv * c,
                      lam_inv * (-rv * s - ru * c)], axis=-1)
    return x_vec, v_vec, h_vec


def xs_coefficients(system, s, chart, u, v, phi):
    """Pairings (alpha, psi, beta)(X_s) = (1, s f(q), 0), computed honestly."""
    alpha, psi, beta = coframe_coefficients(system.surface, chart, u, v, phi)
    x_vec, v_vec, _ = frame_vectors(system.surface, chart, u, v, phi)
    f = np.asarray(system.field.eval(chart, u, v), float)
    xs = x_vec + s * f[..., None] * v_vec
    return (np.sum(alpha * xs, axis=-1), np.sum(psi * xs, axis=-1),
            np.sum(beta * xs, axis=-1))


# ---------------------------------------------------------------------------
# discrete Stokes checks of the structural relations
# ---------------------------------------------------------------------------

def _form_value(surface, name, z):
    idx = {"alpha": 0, "psi": 1, "beta": 2}[name]
    return coframe_coefficients(surface, 0, z[0], z[1], z[2])[idx]

def _two_form_value(surface, name, z):
    """Claimed exterior derivative of a coframe element as a matrix A with

    d tau (W1, W2) = W1 . A W2 in (u, v, phi) coordinates.
    """
    alpha, psi, beta = coframe_coefficients(surface, 0, z[0], z[1], z[2])
    k = float(surface.gauss_curvature(0, z[0], z[1]))
    if name == "alpha":       # d alpha = psi ^ beta
        a, b = psi, beta
        return np.outer(a, b) - np.outer(b, a)
    if name == "psi":         # d psi = K beta ^ alpha
        return k * (np.outer(beta, alpha) - np.outer(alpha, beta))
    if name == "beta":        # d beta = alpha ^ psi
        return np.outer(alpha, psi) - np.outer(psi, alpha)
    raise DegenerateInputError(name)


def _parallelogram_residual(surface, name, z0, e1, e2, h):
    """Midpoint-rule circulation against the claimed derivative flux."""
    corners = [z0, z0 + h * e1, z0 + h * e1 + h * e2, z0 + h * e2]
    circ = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        mid = 0.5 * (a + b)
        circ += float(_form_value(surface, name, mid) @ (b - a))
    center = z0 + 0.5 * h * (e1 + e2)
    mat = _two_form_value(surface, name, center)
    flux = h * h * float(e1 @ mat @ e2)
    return abs(circ - flux) / (h * h)


def structural_relations_check(surface, h=1e-3, n_samples=20, seed=0,
                               base_box=None):
    """Max residual (per unit area) of the three coframe derivatives over

    random coordinate parallelograms of side h.  Residuals vanish at least
    linearly in h.
    """
    rng = np.random.default_rng(seed)
    if base_box is None:
        if isinstance(surface, HyperbolicPlane):
            base_box = ((-1.0, 1.0), (0.5, 2.0))
        elif isinstance(surface, RoundSphere):
            base_box = ((-0.8, 0.8), (-0.8, 0.8))
        else:
            base_box = ((0.0, surface.lx), (0.0, surface.ly))
    axes = np.eye(3)
    out = {}
    for name in ("alpha", "psi", "beta"):
        worst = 0.0
        for _ in range(n_samples):
            z0 = np.array([rng.uniform(*base_box[0]),
                           rng.uniform(*base_box[1]),
                           rng.uniform(0.0, 2.0 * math.pi)])
            for i in range(3):
                for j in range(i + 1, 3):
                    worst = max(worst, _parallelogram_residual(
                        surface, name, z0, axes[i], axes[j], h))
        out[name] = worst
    return out


# ---------------------------------------------------------------------------
# candidate 1-forms and contact certificates
# ---------------------------------------------------------------------------

class RotatedCandidate:
    """tau = alpha + c psi, for homogeneous systems with c K = s f."""

    def __init__(self, c):
        self.c = float(c)

    def pairing(self, system, s, chart, u, v, phi):
        a, p, _ = xs_coefficients(system, s, chart, u, v, phi)
        return a + self.c * p

    def check(self, system, s, samples):
        charts, us, vs = samples
        k = np.asarray(system.surface.gauss_curvature(charts, us, vs), float)
        f = np.asarray(system.field.eval(charts, us, vs), float)
        err = np.max(np.abs(self.c * k - s * f))
        if err > 1e-8:
            raise InvalidCandidateError(
                f"d tau != omega_s: max |cK - sf| = {err:.3e}")


class ExactPrimitiveCandidate:
    """tau = alpha - s pi* zeta with d zeta = sigma (exact systems)."""

    def __init__(self, zeta):
        self.zeta = zeta   # callable (chart, u, v) -> components

    def _zeta_of_v(self, system, chart, u, v, phi):
        z1, z2 = self.zeta(chart, u, v)
        rho = np.asarray(system.surface.conformal(chart, u, v)[0], float)
        return np.exp(-rho) * (np.asarray(z1, float) * np.cos(phi)
                               + np.asarray(z2, float) * np.sin(phi))

    def pairing(self, system, s, chart, u, v, phi):
        a, _, _ = xs_coefficients(system, s, chart, u, v, phi)
        return a - s * self._zeta_of_v(system, chart, u, v, phi)

    def check(self, system, s, samples):
        _check_zeta_derivative(
            system, self.zeta,
            lambda c, u, v: np.asarray(system.form_density(c, u, v), float),
            samples)


class CorrectedPrimitiveCandidate:
    """tau = alpha - s pi* zeta + s ratio psi on surfaces with chi != 0,

    where ratio = [sigma] / (2 pi chi) and d zeta = sigma - ratio * K mu.
    """

    def __init__(self, zeta, ratio):
        self.zeta = zeta
        self.ratio = float(ratio)

    def _zeta_of_v(self, system, chart, u, v, phi):
        z1, z2 = self.zeta(chart, u, v)
        rho = np.asarray(system.surface.conformal(chart, u, v)[0], float)
        return np.exp(-rho) * (np.asarray(z1, float) * np.cos(phi)
                               + np.asarray(z2, float) * np.sin(phi))

    def pairing(self, system, s, chart, u, v, phi):
        a, p, _ = xs_coefficients(system, s, chart, u, v, phi)
        return a - s * self._zeta_of_v(system, chart, u, v, phi) \
            + s * self.ratio * p

    def check(self, system, s, samples):
        def dens(c, u, v):
            sig = np.asarray(system.form_density(c, u, v), float)
            k = np.asarray(system.surface.gauss_curvature(c, u, v), float)
            rho = np.asarray(system.surface.conformal(c, u, v)[0], float)
            return sig - self.ratio * k * np.exp(2.0 * rho)
        _check_zeta_derivative(system, self.zeta, dens, samples)


class FiberCandidate:
    """Closed form with tau(V) = 1 on a flat torus: tau = d phi."""

    def pairing(self, system, s, chart, u, v, phi):
        if not isinstance(system.surface, FlatTorus):
            raise UnsupportedError("the fiber form is closed on flat tori")
        f = np.asarray(system.field.eval(chart, u, v), float)
        return s * f * np.ones_like(np.asarray(phi, float))

    def check(self, system, s, samples):
        if not isinstance(system.surface, FlatTorus):
            raise InvalidCandidateError("d phi is closed on flat tori only")


def _check_zeta_derivative(system, zeta, density, samples, h=1e-4):
    """Midpoint Stokes check that d zeta equals the target density."""
    charts, us, vs = samples
    worst = 0.0
    for c, u, v in zip(np.atleast_1d(charts), np.atleast_1d(us),
                       np.atleast_1d(vs)):
        c = int(c)
        corners = np.array([[u - h / 2, v - h / 2], [u + h / 2, v - h / 2],
                            [u + h / 2, v + h / 2], [u - h / 2, v + h / 2]])
        circ = 0.0
        for a, b in zip(corners, np.roll(corners, -1, axis=0)):
            mid = 0.5 * (a + b)
            z1, z2 = zeta(c, mid[0], mid[1])
            circ += float(z1) * (b[0] - a[0]) + float(z2) * (b[1] - a[1])
        flux = float(density(c, u, v)) * h * h
        worst = max(worst, abs(circ - flux) / (h * h))
    if worst > 1e-3:
        raise InvalidCandidateError(
            f"candidate potential fails d zeta check: residual {worst:.2e}")


@dataclasses.dataclass
class ContactCertificate:
    verdict: str           # positive | negative | indeterminate
    min_value: float
    max_value: float
    tol: float
    grid: tuple


def sm_sample_grid(surface, n_base=128, n_fiber=64):
    """Sample points of the unit tangent bundle used for certificates."""
    if isinstance(surface, HyperbolicPlane):
        xs = np.linspace(-1.0, 1.0, n_base)
        ys = np.linspace(0.5, 2.0, n_base)
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        charts = np.zeros(xx.size, dtype=int)
        us, vs = xx.ravel(), yy.ravel()
    else:
        charts, us, vs, _ = surface.quadrature_nodes(n_base)
    phis = (np.arange(n_fiber) + 0.5) * 2.0 * math.pi / n_fiber
    return charts, us, vs, phis


def contact_candidate_min(system, s, candidate, n_base=128, n_fiber=64,
                          tol=1e-10):
    """Evaluate tau(X_s) over a bundle grid and certify its sign.

    The candidate's structural consistency (d tau proportional to the
    twisted form) is spot-checked first; an inconsistent candidate raises
    InvalidCandidateError rather than producing a certificate.
    """
    charts, us, vs, phis = sm_sample_grid(system.surface, n_base, n_fiber)
    stride = max(1, len(us) // _CONSISTENCY_SAMPLES)
    candidate.check(system, s,
                    (charts[::stride], us[::stride], vs[::stride]))
    mn, mx = math.inf, -math.inf
    for phi in phis:
        vals = candidate.pairing(system, s, charts, us, vs,
                                 np.full(len(us), phi))
        mn = min(mn, float(np.min(vals)))
        mx = max(mx, float(np.max(vals)))
    if mn > tol:
        verdict = "positive"
    elif mx < -tol:
        verdict = "negative"
    else:
        verdict = "indeterminate"
    return ContactCertificate(verdict=verdict, min_value=mn, max_value=mx,
                              tol=tol, grid=(n_base, n_base, n_fiber))


def homogeneous_candidate(system, s):
    """Closed-form candidate for the constant-field constant-curvature

    systems: alpha + (s f / K) psi on the sphere and hyperbolic plane, the
    fiber form on the flat torus.
    """
    surf = system.surface
    if not isinstance(system.field, ConstantField):
        raise UnsupportedError("homogeneous candidates need a constant field")
    f = system.field.value
    if isinstance(surf, RoundSphere):
        return RotatedCandidate(s * f)
    if isinstance(surf, HyperbolicPlane):
        return RotatedCandidate(-s * f)
    if isinstance(surf, FlatTorus):
        return FiberCandidate()
    raise UnsupportedError("no closed-form candidate for this surface")


def torus_exact_candidate(system):
    """Exact-primitive candidate from the spectral torus primitive."""
    prim = local_primitive(system)
    return ExactPrimitiveCandidate(lambda c, u, v: prim.theta(c, u, v))


def corrected_candidate(system):
    """Corrected-primitive candidate on a surface with chi != 0.

    For the homogeneous sphere and hyperbolic systems the correcting
    potential zeta vanishes identically.
    """
    surf = system.surface
    chi = surf.euler_characteristic()
    if chi == 0:
        raise UnsupportedError("needs a surface with nonzero characteristic")
    ratio = flux_total(system) / (2.0 * math.pi * chi)
    if isinstance(system.field, ConstantField) and not isinstance(
            surf, FlatTorus):
        zero = lambda c, u, v: (np.zeros_like(np.asarray(u, float)),
                                np.zeros_like(np.asarray(u, float)))
        return CorrectedPrimitiveCandidate(zero, ratio)
    raise UnsupportedError("general corrected potentials are not modelled")


# ---------------------------------------------------------------------------
# invariant measures: actions, flips and rotation data
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class LiouvilleAction:
    volume: float
    quadrature_action: float
    closed_form: float
    flip_integral: float


def _candidate_for_action(system):
    surf = system.surface
    if isinstance(surf, FlatTorus):
        flux = flux_total(system)
        if abs(flux) > 1e-9:
            raise UnsupportedError(
                "torus actions need an exact field (zero flux)")
        return torus_exact_candidate(system), 0.0
    chi = surf.euler_characteristic()
    flux = flux_total(system)
    return corrected_candidate(system), flux ** 2 / chi


def liouville_action(system, s, n_base=128, n_fiber=64):
    """Action of the normalized bundle volume against the primitive family.

    Hyperbolic quotients have no fundamental domain model, so their base
    quadrature averages the (constant-field) integrand over a half-plane
    patch weighted by the declared total area.
    """
    surf = system.surface
    candidate, corr = _candidate_for_action(system)
    area = surf.area()
    volume = 2.0 * math.pi * area
    if isinstance(surf, HyperbolicPlane):
        charts, us, vs, phis = sm_sample_grid(surf, 64, n_fiber)
        w = np.full(len(us), area / len(us))
    else:
        charts, us, vs, w = surf.quadrature_nodes(n_base)
        phis = (np.arange(n_fiber) + 0.5) * 2.0 * math.pi / n_fiber
    total = 0.0
    flip = 0.0
    dphi = 2.0 * math.pi / n_fiber
    for phi in phis:
        ph = np.full(len(us), phi)
        vals = candidate.pairing(system, s, charts, us, vs, ph)
        total += float(np.sum(vals * w)) * dphi
        if hasattr(candidate, "_zeta_of_v"):
            zv = candidate._zeta_of_v(system, charts, us, vs, ph)
            flip += float(np.sum(zv * w)) * dphi
    closed = volume + s * s * corr
    return LiouvilleAction(volume=volume, quadrature_action=total,
                           closed_form=closed, flip_integral=flip)


def rotation_vector(system, s, orbit=None, n_base=256, n_fiber=64):
    """Rotation data (base winding pair, fiber coefficient).

    Without an orbit this is the rotation vector of the normalized
    Liouville measure: s [sigma] in the fiber on the torus and zero
    otherwise.  With an orbit it is the integer winding triple of the
    velocity-lifted curve (divided by the period measure normalization is
    left to the caller).
    """
    surf = system.surface
    if orbit is None:
        if isinstance(surf, FlatTorus):
            # fiber pairing: integral of d phi (X_s) = s f over the measure
            charts, us, vs, w = surf.quadrature_nodes(n_base)
            f = np.asarray(system.field.eval(charts, us, vs), float)
            fiber = s * float(np.sum(f * w))
            return (0.0, 0.0, fiber)
        return (0.0, 0.0, 0.0)
    traj = orbit.trajectory
    ang = np.unwrap(np.arctan2(traj.dq[:, 1], traj.dq[:, 0]))
    fiber = (ang[-1] - ang[0]) / (2.0 * math.pi)
    if isinstance(surf, FlatTorus):
        d = traj.q[-1] - traj.q[0]
        return (d[0] / surf.lx, d[1] / surf.ly, fiber)
    return (0.0, 0.0, fiber)


# ---------------------------------------------------------------------------
# boundary action identities
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class BoundaryActionCheck:
    lhs: float                 # action of the orbit measure divided by s
    rhs: float                 # functional value plus topological correction
    residual: float
    gauss_bonnet_residual: float


def orbit_action(system, s, orbit, candidate):
    """Action of the orbit's invariant measure: the primitive integrated

    along the unit-speed lift, i.e. over one period of the bundle flow.
    """
    traj = orbit.trajectory
    speeds = trajectory_speeds(system, traj)
    phi = np.arctan2(traj.dq[:, 1], traj.dq[:, 0])
    # angle against the conformal frame equals the chart velocity angle
    vals = candidate.pairing(system, s, traj.chart, traj.q[:, 0],
                             traj.q[:, 1], phi)
    integrand = np.asarray(vals, float) * speeds
    return float(np.trapezoid(integrand, traj.t))


def gauss_bonnet_action_check(system, s, orbit, region):
    """Compare the orbit-measure action with the functional value.

    For an exact torus field:  action / s = value.  For chi(M) != 0 and a
    disc region:  action / s = value + o * chi(disc) * [sigma] / chi(M)
    with o the region orientation.  Also reports the Gauss-Bonnet residual
    of the disc bounded by the orbit.
    """
    surf = system.surface
    k = 0.5 / (s * s)
    candidate, _ = _candidate_for_action(system)
    lhs = orbit_action(system, s, orbit, candidate) / s
    value = taimanov_value(system, k, region)
    if isinstance(surf, FlatTorus):
        correction = 0.0
    else:
        chi_disc = 1
        correction = (region.orientation * chi_disc * flux_total(system)
                      / surf.euler_characteristic())
    rhs = value + correction
    # Gauss-Bonnet on the underlying disc
    traj = orbit.trajectory
    speeds = trajectory_speeds(system, traj)
    f = np.array([float(system.field.eval(int(c), uu, vv))
                  for c, uu, vv in zip(traj.chart, traj.q[:, 0],
                                       traj.q[:, 1])])
    turn = region.orientation * float(np.trapezoid(s * f * speeds, traj.t))
    if isinstance(surf, FlatTorus):
        k_int = 0.0
    elif isinstance(surf, HyperbolicPlane):
        # K = -1, so the curvature integral is minus the disc area
        area_sys = type(system)(surf, ConstantField(1.0))
        k_int = -region_flux(area_sys, region)
    else:
        raise UnsupportedError("disc identities are checked on these cases")
    gb = abs(k_int + turn - 2.0 * math.pi)
    return BoundaryActionCheck(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs),
                               gauss_bonnet_residual=gb)
