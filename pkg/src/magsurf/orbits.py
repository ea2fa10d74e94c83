"""Periodic orbit finding: closed-form oracles for the homogeneous systems,

Newton shooting on a reduced Poincare return map, and a variational route
through discretized loops of the free-period action.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import (DegenerateInputError, NoConvergenceError,
                     NoGlobalPrimitiveError, UndefinedActionError,
                     UnsupportedError)
from .fields import local_primitive, s_of_energy
from .flow import (DEFAULT_DT, Section, TangentState, integrate,
                   poincare_return, state_at_energy, trajectory_curvature)
from .surfaces import ChartPoint, FlatTorus, HyperbolicPlane, RoundSphere

FD_STEP = 1e-7
SHOOT_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class OracleData:
    """Closed-form data for the unit-curvature homogeneous systems."""

    exists_contractible: bool
    radius: float | None
    period: float | None
    curvature: float
    curve_type: str
    boundary_angle: float | None = None


def homogeneous_oracle(kind, s):
    """Contractible orbit data at speed parameter s for f = 1, |K| in {0,1}."""
    if s <= 0:
        raise DegenerateInputError("s must be positive")
    if kind == "sphere":
        return OracleData(True, math.atan2(1.0, s),
                          2.0 * math.pi * s / math.sqrt(s * s + 1.0),
                          s, "circle")
    if kind == "flat_torus":
        return OracleData(True, 1.0 / s, 2.0 * math.pi, s, "circle")
    if kind == "hyperbolic":
        if s > 1.0:
            return OracleData(True, math.atanh(1.0 / s),
                              2.0 * math.pi * s / math.sqrt(s * s - 1.0),
                              s, "circle")
        if s == 1.0:
            return OracleData(False, None, None, 1.0, "horocycle")
        return OracleData(False, None, None, s, "boundary_arc",
                          boundary_angle=math.acos(s))
    raise UnsupportedError(f"no homogeneous oracle for kind {kind!r}")


# ---------------------------------------------------------------------------
# shooting
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class Orbit:
    trajectory: object
    period: float
    energy: float
    residual: float
    winding: tuple
    section: Section
    seed: TangentState

    @property
    def contractible(self):
        return self.winding == (0, 0)


def _section_state(system, section, k, x, phi):
    """Tangent state on the section from reduced coordinates (x, phi)."""
    if section.coord == 1:
        u, v = x, section.value
    else:
        u, v = section.value, x
    rho = float(system.surface.conformal(section.chart, u, v)[0])
    speed = math.sqrt(2.0 * k) * math.exp(-rho)
    return TangentState(section.chart, u, v,
                        speed * math.cos(phi), speed * math.sin(phi))


def _reduced(section, state):
    x = state.u if section.coord == 1 else state.v
    return np.array([x, math.atan2(state.dv, state.du)])


def _wrap_angle(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def default_section(system, seed):
    """Section through the seed, transverse to its velocity.

    The section is unwrapped; pass an explicit Section with a lattice wrap
    to hunt for winding torus orbits.
    """
    if abs(seed.dv) >= abs(seed.du):
        return Section(coord=1, value=seed.v,
                       direction=1 if seed.dv > 0 else -1, chart=seed.chart)
    return Section(coord=0, value=seed.u,
                   direction=1 if seed.du > 0 else -1, chart=seed.chart)


def shoot_periodic(system, k, seed, section=None, tol=SHOOT_TOL,
                   dt=DEFAULT_DT, max_iter=50, max_time=200.0):
    """Newton iteration on the reduced return map at fixed energy k.

    The seed is rescaled onto the energy level; the reduced state is the
    free section coordinate together with the velocity angle.  Raises
    NoConvergenceError if the displacement does not fall under tol.
    """
    seed = state_at_energy(system, seed, k)
    if section is None:
        section = default_section(system, seed)
    x = _reduced(section, seed)

    def ret(xv):
        st = _section_state(system, section, k, xv[0], xv[1])
        hit, rt = poincare_return(system, section, st, max_time=max_time,
                                  dt=dt)
        out = _reduced(section, hit)
        return np.array([out[0] - xv[0], _wrap_angle(out[1] - xv[1])]), rt

    res, rt = ret(x)
    it = 0
    while np.linalg.norm(res) > tol and it < max_iter:
        jac = np.empty((2, 2))
        for j in range(2):
            dx = np.zeros(2)
            dx[j] = FD_STEP
            rp, _ = ret(x + dx)
            jac[:, j] = (rp - res) / FD_STEP
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        lam = 1.0
        for _ in range(20):
            cand = x + lam * step
            cres, crt = ret(cand)
            if np.linalg.norm(cres) < np.linalg.norm(res):
                x, res, rt = cand, cres, crt
                break
            lam *= 0.5
        else:
            raise NoConvergenceError("shooting line search stalled")
        it += 1
    if np.linalg.norm(res) > tol:
        raise NoConvergenceError(
            f"shooting residual {np.linalg.norm(res):.3e} after {it} steps")
    state = _section_state(system, section, k, x[0], x[1])
    traj = integrate(system, state, rt, dt=dt)
    winding = (0, 0)
    surf = system.surface
    if isinstance(surf, FlatTorus) or hasattr(surf, "lx"):
        d = traj.q[-1] - traj.q[0]
        winding = (int(round(d[0] / surf.lx)), int(round(d[1] / surf.ly)))
    return Orbit(trajectory=traj, period=rt, energy=k,
                 residual=float(np.linalg.norm(res)), winding=winding,
                 section=section, seed=state)


def orbit_curvature_residual(system, orbit):
    """max |kappa(t) - s f(q(t))| over well-resolved samples."""
    s = s_of_energy(orbit.energy)
    traj = orbit.trajectory
    kappa = trajectory_curvature(system, traj)
    mask = ~np.isnan(kappa)
    fvals = np.array([
        float(system.field.eval(int(c), uu, vv))
        for c, uu, vv in zip(traj.chart[mask], traj.q[mask, 0],
                             traj.q[mask, 1])
    ])
    return float(np.max(np.abs(kappa[mask] - s * fvals)))


def fit_circle(points):
    """Algebraic least-squares circle fit; returns (center, radius)."""
    pts = np.asarray(points, dtype=float)
    a = np.column_stack([2 * pts[:, 0], 2 * pts[:, 1],
                         np.ones(len(pts))])
    b = np.sum(pts ** 2, axis=1)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    cx, cy, c = sol
    r = math.sqrt(max(c + cx * cx + cy * cy, 0.0))
    return np.array([cx, cy]), r


def orbit_radius(system, orbit):
    """Geodesic radius of a contractible circular orbit."""
    surf = system.surface
    traj = orbit.trajectory
    if isinstance(surf, RoundSphere):
        amb = np.array([surf.to_ambient(int(c), uu, vv)
                        for c, uu, vv in zip(traj.chart, traj.q[:, 0],
                                             traj.q[:, 1])])
        axis = amb.mean(axis=0)
        norm = np.linalg.norm(axis)
        if norm < 1e-12:
            raise DegenerateInputError("orbit has no well-defined axis")
        axis /= norm
        return float(np.mean(np.arccos(np.clip(amb @ axis, -1.0, 1.0))))
    center, r = fit_circle(traj.q)
    if isinstance(surf, HyperbolicPlane):
        if center[1] <= r:
            raise DegenerateInputError("curve is not a hyperbolic circle")
        return math.atanh(r / center[1])
    return r


# ---------------------------------------------------------------------------
# discrete loops and the free-period action
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class DiscreteLoop:
    """Closed polygonal loop in a single chart with a free period T.

    For torus loops the vertices live in the planar lift and the lattice
    winding closes the last edge.
    """

    vertices: np.ndarray          # (N, 2)
    period: float
    chart: int = 0
    winding: tuple = (0, 0)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or len(self.vertices) < 3:
            raise DegenerateInputError("a loop needs at least three vertices")
        if self.period <= 0:
            raise DegenerateInputError("loop period must be positive")

    @property
    def n(self):
        return len(self.vertices)

    def closure_shift(self, system):
        surf = system.surface
        if self.winding != (0, 0):
            return np.array([self.winding[0] * surf.lx,
                             self.winding[1] * surf.ly])
        return np.zeros(2)

    def deltas(self, system):
        x = self.vertices
        d = np.empty_like(x)
        d[:-1] = x[1:] - x[:-1]
        d[-1] = x[0] + self.closure_shift(system) - x[-1]
        return d

    def midpoints(self, system):
        x = self.vertices
        m = np.empty_like(x)
        m[:-1] = 0.5 * (x[:-1] + x[1:])
        m[-1] = 0.5 * (x[-1] + x[0] + self.closure_shift(system))
        return m


def circle_loop(center, radius, n, period, chart=0, ccw=True, phase=0.0):
    ang = phase + (1.0 if ccw else -1.0) * 2.0 * math.pi * np.arange(n) / n
    verts = np.column_stack([center[0] + radius * np.cos(ang),
                             center[1] + radius * np.sin(ang)])
    return DiscreteLoop(vertices=verts, period=period, chart=chart)


def loop_length(system, loop):
    m = loop.midpoints(system)
    d = loop.deltas(system)
    rho = np.asarray(system.surface.conformal(loop.chart, m[:, 0],
                                              m[:, 1])[0], float)
    return float(np.sum(np.exp(rho) * np.linalg.norm(d, axis=1)))


def loop_l2_energy(system, loop):
    """Discrete Dirichlet energy, integral of |x'|_g^2 in loop parameter."""
    m = loop.midpoints(system)
    d = loop.deltas(system)
    rho = np.asarray(system.surface.conformal(loop.chart, m[:, 0],
                                              m[:, 1])[0], float)
    h = 1.0 / loop.n
    return float(np.sum(np.exp(2.0 * rho) * np.sum(d * d, axis=1)) / h)


def loop_mean_energy(system, loop):
    return loop_l2_energy(system, loop) / (2.0 * loop.period ** 2)


def loop_primitive(system, loop):
    """Primitive of sigma appropriate for the loop's flux term."""
    surf = system.surface
    if hasattr(surf, "lx") and loop.winding != (0, 0):
        try:
            return local_primitive(system, chart=loop.chart)
        except NoGlobalPrimitiveError as exc:
            raise UndefinedActionError(str(exc))
    ref = float(np.min(loop.vertices[:, 1])) - 0.5
    if isinstance(surf, HyperbolicPlane):
        ref = max(ref, 0.05)
    return local_primitive(system, chart=loop.chart, ref_v=ref)


def _primitive_arrays(primitive, chart, mids):
    t1, t2 = primitive.theta(chart, mids[:, 0], mids[:, 1])
    t1 = np.broadcast_to(np.asarray(t1, float), (len(mids),))
    t2 = np.broadcast_to(np.asarray(t2, float), (len(mids),))
    return np.column_stack([t1, t2])


def discrete_action(system, k, loop, primitive=None):
    """Discrete free-period action

        S = sum_i |dx_i|_g^2 / (2 h T) + k T - sum_i theta(m_i) . dx_i

    with h = 1/N and midpoint metric/primitive evaluation.  The flux term
    uses a chart primitive, so it is defined for loops that are either
    contractible or sit over an exact field.
    """
    if primitive is None:
        primitive = loop_primitive(system, loop)
    m = loop.midpoints(system)
    d = loop.deltas(system)
    rho = np.asarray(system.surface.conformal(loop.chart, m[:, 0],
                                              m[:, 1])[0], float)
    h = 1.0 / loop.n
    kin = float(np.sum(np.exp(2.0 * rho) * np.sum(d * d, axis=1))
                / (2.0 * h * loop.period))
    th = _primitive_arrays(primitive, loop.chart, m)
    flux_term = float(np.sum(th * d))
    return kin + k * loop.period - flux_term


def discrete_action_gradient(system, k, loop, primitive=None):
    """Analytic gradient of discrete_action: (d/d vertices, d/dT)."""
    if primitive is None:
        primitive = loop_primitive(system, loop)
    surf = system.surface
    x = loop.vertices
    n, h, t = loop.n, 1.0 / loop.n, loop.period
    m = loop.midpoints(system)
    d = loop.deltas(system)
    rho, ru, rv = surf.conformal(loop.chart, m[:, 0], m[:, 1])
    lam2 = np.exp(2.0 * np.asarray(rho, float))
    grad_lam2 = 2.0 * lam2[:, None] * np.column_stack(
        [np.asarray(ru, float), np.asarray(rv, float)])
    d2 = np.sum(d * d, axis=1)
    # kinetic part
    gk = (0.5 * d2[:, None] * grad_lam2
          - 2.0 * lam2[:, None] * d)
    gk_prev = (0.5 * d2[:, None] * grad_lam2
               + 2.0 * lam2[:, None] * d)
    grad = (gk + np.roll(gk_prev, 1, axis=0)) / (2.0 * h * t)
    # flux part: - sum theta(m_i) . d_i
    th = _primitive_arrays(primitive, loop.chart, m)
    if hasattr(primitive, "jacobian_many"):
        jac = primitive.jacobian_many(loop.chart, m[:, 0], m[:, 1])
    else:
        jac = np.array([primitive.jacobian(loop.chart, mu, mv)
                        for mu, mv in m])
    jtd = np.einsum("iab,ia->ib", jac, d)
    gf = -(0.5 * jtd - th)
    gf_prev = -(0.5 * jtd + th)
    grad += gf + np.roll(gf_prev, 1, axis=0)
    dT = k - float(np.sum(lam2 * d2)) / (2.0 * h * t * t)
    return grad, dT


# ---------------------------------------------------------------------------
# descent to critical loops
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class DescentParams:
    tol: float = 1e-8
    t_min: float = 1e-4
    len_min: float = 1e-3     # Euclidean extent below which the loop is a point
    max_iter: int = 400
    step0: float = 0.05
    refine: bool = True
    refine_max_iter: int = 200


@dataclasses.dataclass
class DescentResult:
    loop: DiscreteLoop
    outcome: str                 # converged | collapsed | max_iter
    grad_norm: float
    action: float
    iterations: int


def _pack(loop):
    return np.concatenate([loop.vertices.ravel(), [loop.period]])


def _unpack(z, loop):
    verts = z[:-1].reshape(-1, 2)
    return DiscreteLoop(vertices=verts, period=max(float(z[-1]), 1e-12),
                        chart=loop.chart, winding=loop.winding)


def descend_to_critical(system, k, loop, params=None):
    """Drive a loop toward a critical point of the discrete action.

    Phase one follows the normalized steepest-descent direction
    -grad / sqrt(1 + |grad|^2) with a backtracking line search; it detects
    period collapse (T below t_min with shrinking length).  Critical points
    of the free-period action are often saddle points, which no descent
    line can reach, so a second stage drives the gradient itself to zero
    with a Jacobian-free Newton-Krylov iteration.
    """
    if params is None:
        params = DescentParams()
    primitive = loop_primitive(system, loop)

    def value(z):
        return discrete_action(system, k, _unpack(z, loop), primitive)

    def grad(z):
        lp = _unpack(z, loop)
        g, dt = discrete_action_gradient(system, k, lp, primitive)
        return np.concatenate([g.ravel(), [dt]])

    z = _pack(loop)
    s_val = value(z)
    step = params.step0
    best_z, best_gn = z, np.inf
    outcome = "max_iter"
    it = 0
    for it in range(1, params.max_iter + 1):
        g = grad(z)
        gn = float(np.linalg.norm(g))
        if gn < best_gn:
            best_z, best_gn = z.copy(), gn
        if gn < params.tol:
            outcome = "converged"
            break
        verts = z[:-1].reshape(-1, 2)
        extent = float(np.max(np.abs(verts - verts.mean(axis=0))))
        if z[-1] < params.t_min or extent < params.len_min:
            outcome = "collapsed"
            break
        direction = -g / math.sqrt(1.0 + gn * gn)
        slope = float(g @ direction)
        alpha = step
        for _ in range(40):
            cand = z + alpha * direction
            if cand[-1] <= 0:
                alpha *= 0.5
                continue
            c_val = value(cand)
            if c_val <= s_val + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        else:
            break
        z, s_val = cand, c_val
        step = min(alpha * 2.0, params.step0)
    if outcome == "max_iter" and params.refine:
        z, gn, ok = _refine_stationary(value, grad, best_z, params)
        if not ok:
            # descent may have drifted off the saddle's basin; retry the
            # root solve from the untouched seed
            z, gn, ok = _refine_stationary(value, grad, _pack(loop), params)
        if ok:
            outcome = "converged"
        if gn < best_gn:
            best_z, best_gn = z, gn
    elif outcome == "converged":
        best_z, best_gn = z, float(np.linalg.norm(grad(z)))
    final = _unpack(best_z, loop)
    return DescentResult(loop=final, outcome=outcome, grad_norm=best_gn,
                         action=value(best_z), iterations=it)


def _refine_stationary(value, grad, z0, params):
    """Solve grad = 0 with a Jacobian-free Newton-Krylov iteration.

    Plain descent cannot terminate on saddle points of the free-period
    action; a root finder on the gradient field lands on them directly.
    """
    from scipy.optimize import root

    try:
        res = root(grad, z0, method="krylov",
                   options={"fatol": 0.1 * params.tol,
                            "maxiter": params.refine_max_iter})
    except Exception:
        return z0, float(np.linalg.norm(grad(z0))), False
    gn = float(np.linalg.norm(grad(res.x)))
    if not np.isfinite(gn) or gn >= params.tol or res.x[-1] < params.t_min:
        return z0, float(np.linalg.norm(grad(z0))), False
    return res.x, gn, True


def loop_from_orbit(orbit, n):
    """Resample an integrated orbit into a discrete loop (same chart only)."""
    traj = orbit.trajectory
    if len(set(traj.chart.tolist())) > 1:
        raise UnsupportedError("orbit crosses charts; cannot build a loop")
    idx = np.linspace(0, len(traj.t) - 1, n, endpoint=False).astype(int)
    return DiscreteLoop(vertices=traj.q[idx], period=orbit.period,
                        chart=int(traj.chart[0]))


def state_from_loop(system, loop, k):
    """Tangent seed at vertex zero with the discrete loop velocity."""
    x = loop.vertices
    shift = loop.closure_shift(system)
    vel = (x[1] - (x[-1] - shift)) / (2.0 / loop.n * loop.period)
    st = TangentState(loop.chart, x[0, 0], x[0, 1], vel[0], vel[1])
    return state_at_energy(system, st, k)


def refine_loop(system, loop):
    """Double the vertex count by edge midpoint insertion."""
    x = loop.vertices
    nxt = np.roll(x, -1, axis=0)
    # the closing edge midpoint must use the lifted endpoint
    nxt[-1] = x[0] + loop.closure_shift(system)
    mids = 0.5 * (x + nxt)
    out = np.empty((2 * len(x), 2))
    out[0::2] = x
    out[1::2] = mids
    return DiscreteLoop(vertices=out, period=loop.period, chart=loop.chart,
                        winding=loop.winding)
