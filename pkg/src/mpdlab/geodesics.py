"""Geodesic flow, closed geodesics by shooting, Jacobi monodromy and unstable Riccati solutions.

Tangent vectors are stored as a base point and a Euclidean direction angle
theta; the velocity is (cos theta, sin theta) rescaled to unit g-length.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _kernel as K
from .errors import ConfigError, ContractViolation, ConvergenceError, CurvatureSignError, NumericalError
from .fuchsian import UnitTangent, axis_seed, evaluate_word, polar_point, translation_length

DEFAULT_STEP = 1e-3
DEFAULT_BURN_IN = 15.0
Y_MIN = 1e-10
NEAR_PARABOLIC = 1e-6


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class Trajectory:
    """Fixed-step orbit: states[i] = (x, y, vx, vy) at times[i]; curvature at half steps if recorded."""

    times: np.ndarray
    states: np.ndarray
    step: float
    curvature: np.ndarray | None = None

    def tangent(self, i):
        x, y, vx, vy = self.states[i]
        return UnitTangent(float(x), float(y), math.atan2(vy, vx))

    @property
    def end(self):
        return self.tangent(-1)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class ClosedGeodesic:
    """Lift of the closed geodesic of a class: phi^T(start) = deck_* start."""

    cls: object
    deck: object
    period: float
    trajectory: Trajectory
    closure_residual: float
    iterations: int

    @property
    def samples(self):
        return [(float(t), self.trajectory.tangent(i)) for i, t in enumerate(self.trajectory.times)]

    @property
    def start(self):
        return self.trajectory.tangent(0)

    @property
    def step(self):
        return self.trajectory.step

    def to_rows(self):
        """Rows (t, x, y, theta) for CSV export."""
        st = self.trajectory.states
        th = np.arctan2(st[:, 3], st[:, 2])
        return np.column_stack([self.trajectory.times, st[:, 0], st[:, 1], th])


@dataclass(frozen=True)
class MonodromyData:
    """Linearized Poincare map on the normal Jacobi coordinates (J, J')."""

    matrix: np.ndarray
    sigma_u: float
    sigma_s: float
    unstable_direction: np.ndarray

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))

    @property
    def log_sigma_u(self):
        return math.log(abs(self.sigma_u))


@dataclass(frozen=True)
class RiccatiTrace:
    """Samples of the positive Riccati solution u along an orbit, after burn-in."""

    times: np.ndarray
    u: np.ndarray
    burn_in: float
    step: float

    def integral(self):
        """Trapezoid integral of u over the retained samples."""
        return float(np.trapezoid(self.u, self.times))


def _velocity(metric, tangent):
    return K.unit_velocity(tangent.x, tangent.y, tangent.theta, metric.packed)


def integrate_geodesic(metric, start, time, step=DEFAULT_STEP, record_curvature=False):
    """Orbit of the unit-speed geodesic flow of ``metric`` from ``start``.

    A negative ``time`` integrates the flow backwards; the samples are then
    ordered in backward time and carry the original orientation.
    """
    if not step > 0:
        raise ConfigError("step must be positive", path="step")
    sign = 1.0 if time >= 0 else -1.0
    n = max(1, int(math.ceil(abs(time) / step)))
    h = abs(time) / n
    th = start.theta if sign > 0 else start.theta + math.pi
    vx, vy = K.unit_velocity(start.x, start.y, th, metric.packed)
    states, ks, ok = K.flow(start.x, start.y, vx, vy, h, n, metric.packed, Y_MIN, record_curvature)
    if not ok:
        raise NumericalError(f"orbit left the numerical validity region after {len(states) - 1} steps")
    if sign < 0:
        states = states.copy()
        states[:, 2:] *= -1.0
    return Trajectory(sign * h * np.arange(n + 1), states, h, ks if record_curvature else None)


class _Shooter:
    """Residual of the closing condition phi^T(v) = deck_* v around an axis seed.

    Unknowns u = (s, w, T): hyperbolic normal offset of the base point, angle
    offset and period.  The offset follows the normal geodesic, so every
    trial start stays in the half-plane.
    """

    def __init__(self, metric, deck, seed):
        self.metric = metric
        self.deck = deck
        self.seed = seed

    def start(self, u):
        s, w, _ = u
        z = complex(polar_point(self.seed.z, s, self.seed.theta + math.pi / 2))
        return UnitTangent(z.real, z.imag, self.seed.theta + w)

    def residual(self, u, nsteps):
        st0 = self.start(u)
        T = u[2]
        if not T > 0:
            raise ConvergenceError("shooting produced a nonpositive period", residual=float("inf"))
        vx, vy = K.unit_velocity(st0.x, st0.y, st0.theta, self.metric.packed)
        end, ok = K.flow_end(st0.x, st0.y, vx, vy, T / nsteps, nsteps, self.metric.packed, Y_MIN)
        if not ok:
            raise NumericalError("shooting orbit left the numerical validity region")
        tgt = st0.pushed(self.deck)
        return np.array([(end[0] - tgt.x) / tgt.y, (end[1] - tgt.y) / tgt.y,
                         _wrap(math.atan2(end[3], end[2]) - tgt.theta)])

    def jacobian(self, u, nsteps, delta=1e-6):
        jac = np.empty((3, 3))
        for k in range(3):
            e = np.zeros(3)
            e[k] = delta
            jac[:, k] = (self.residual(u + e, nsteps) - self.residual(u - e, nsteps)) / (2 * delta)
        return jac


def _newton(shooter, u, cls, levels, max_iter):
    """Damped Newton on the shooting residual over (step, tolerance, reuse-Jacobian) levels."""
    iterations = 0
    jac = None
    res_norm = float("inf")
    for h, level_tol, reuse in levels:
        nsteps = max(1, int(math.ceil(u[2] / h)))
        r = shooter.residual(u, nsteps)
        res_norm = float(np.abs(r).max())
        while res_norm > level_tol:
            if iterations >= max_iter:
                raise ConvergenceError(f"shooting for class {cls} did not converge", residual=res_norm)
            if jac is None or not reuse:
                jac = shooter.jacobian(u, nsteps)
            try:
                du = np.linalg.solve(jac, -r)
            except np.linalg.LinAlgError as exc:
                raise ConvergenceError(f"singular shooting Jacobian for class {cls}", residual=res_norm) from exc
            lam = 1.0
            for _ in range(12):
                cand = u + lam * du
                try:
                    rc = shooter.residual(cand, nsteps)
                    nc = float(np.abs(rc).max())
                except (NumericalError, ConvergenceError):
                    nc = float("inf")
                if nc < res_norm:
                    break
                lam *= 0.5
            else:
                if reuse:
                    # chord step stalled: fall back to a fresh Jacobian
                    reuse = False
                    iterations += 1
                    continue
                raise ConvergenceError(f"shooting for class {cls} stalled", residual=res_norm)
            u, r, res_norm = cand, rc, nc
            iterations += 1
    return u, res_norm, iterations


def find_closed_geodesic(metric, group, cls, step=DEFAULT_STEP, tol=1e-10, max_iter=40,
                         coarse_step=1e-2, max_stages=32):
    """Closed geodesic of ``metric`` in the free homotopy class ``cls``.

    Single shooting with damped Newton on (normal offset, angle offset,
    period), seeded from the axis of the deck transformation.  Iterates
    first at ``coarse_step`` and then refines at ``step``.  The basin of
    single shooting shrinks like exp(-T), so when the direct solve fails the
    perturbation is switched on gradually (continuation in its amplitude),
    halving any continuation stage that fails, up to ``max_stages`` stages.
    """
    deck = evaluate_word(group, cls)
    if abs(deck.trace) - 2.0 < NEAR_PARABOLIC:
        raise NumericalError(f"class {cls} is too close to parabolic")
    seed = axis_seed(deck)
    T0 = translation_length(deck) * math.sqrt(metric.scale)
    if coarse_step > step:
        levels = [(coarse_step, 1e-7, False), (step, tol, True)]
    else:
        levels = [(step, tol, False)]
    u0 = np.array([0.0, 0.0, T0])
    try:
        u, res_norm, iterations = _newton(_Shooter(metric, deck, seed), u0, cls, levels, max_iter)
    except (ConvergenceError, NumericalError) as exc:
        if metric.is_unperturbed:
            raise
        u, res_norm, iterations = _continue(metric, deck, seed, cls, u0, levels, max_iter, max_stages, exc)
    start = _Shooter(metric, deck, seed).start(u)
    T = float(u[2])
    traj = integrate_geodesic(metric, start, T, step, record_curvature=True)
    return ClosedGeodesic(cls, deck, T, traj, res_norm, iterations)


def _continue(metric, deck, seed, cls, u, levels, max_iter, max_stages, first_error):
    """Track the solution from the unperturbed metric (t = 0) to ``metric`` (t = 1)."""
    coarse = [(levels[0][0], levels[0][1], False)]
    t, dt, total = 0.0, 0.25, 0
    for _ in range(max_stages):
        nxt = min(1.0, t + dt)
        try:
            u, res_norm, it = _newton(_Shooter(metric.deformed(nxt), deck, seed), u, cls,
                                      levels if nxt == 1.0 else coarse, max_iter)
        except (ConvergenceError, NumericalError):
            dt /= 2
            continue
        t, total = nxt, total + it
        if t == 1.0:
            return u, res_norm, total
    raise ConvergenceError(f"shooting for class {cls} did not converge under continuation",
                           residual=getattr(first_error, "residual", None)) from first_error


def monodromy(metric, geo, tol=1e-6):
    """Jacobi monodromy over one period of a closed geodesic."""
    if geo.closure_residual > tol:
        raise ContractViolation(f"closure residual {geo.closure_residual:.3g} exceeds {tol}")
    m = K.jacobi_fundamental(geo.trajectory.curvature, geo.trajectory.step)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4 * det
    if disc <= 0:
        raise NumericalError(f"monodromy has non-real eigenvalues (trace {tr:.6g})")
    root = math.sqrt(disc)
    lu = 0.5 * (tr + math.copysign(root, tr))
    ls = det / lu
    # (m - lu) v = 0: take the better conditioned row
    r0 = np.array([m[0, 1], lu - m[0, 0]])
    r1 = np.array([lu - m[1, 1], m[1, 0]])
    vec = r0 if np.linalg.norm(r0) >= np.linalg.norm(r1) else r1
    vec = vec / np.linalg.norm(vec)
    if vec[0] < 0:
        vec = -vec
    return MonodromyData(m, lu, ls, vec)


def riccati_unstable(metric, orbit, burn_in=DEFAULT_BURN_IN, u0=1.0):
    """Positive Riccati solution u' = -u^2 - K along an orbit.

    For a ClosedGeodesic the curvature record is cycled periodically for
    ``burn_in`` time units and one full period is returned.  For a
    Trajectory (with recorded curvature) u is integrated from its start and
    samples with t >= burn_in are kept.
    """
    if burn_in < 0:
        raise ConfigError("burn_in must be nonnegative", path="burn_in")
    if not u0 > 0:
        raise ConfigError("initial Riccati value must be positive", path="u0")
    if isinstance(orbit, ClosedGeodesic):
        traj = orbit.trajectory
        cycles = int(math.ceil(burn_in / orbit.period))
        us = K.riccati_periodic(traj.curvature, traj.step, float(u0), cycles)
        times = traj.times
        used = cycles * orbit.period
    else:
        traj = orbit
        if traj.curvature is None:
            raise ConfigError("trajectory has no curvature record")
        us = K.riccati_path(traj.curvature, traj.step, float(u0))
        keep = np.abs(traj.times) >= burn_in - 1e-12
        times, us = np.abs(traj.times[keep]), us[keep]
        used = burn_in
    if not np.all(np.isfinite(us)) or not np.all(us > 0):
        raise CurvatureSignError("Riccati solution lost positivity; curvature is not negative along the orbit")
    return RiccatiTrace(times, us, used, traj.step)


def unstable_jacobian(metric, v, burn_in=DEFAULT_BURN_IN, step=DEFAULT_STEP):
    """J^u(v): endpoint of a burn-in Riccati integration along the past orbit of v, u0 = 1."""
    out = unstable_jacobians(metric, np.array([v.x]), np.array([v.y]), np.array([v.theta]), burn_in, step)
    return float(out[0])


def unstable_jacobians(metric, xs, ys, thetas, burn_in=DEFAULT_BURN_IN, step=DEFAULT_STEP):
    out = K.unstable_jacobians(np.ascontiguousarray(xs, dtype=float), np.ascontiguousarray(ys, dtype=float),
                               np.ascontiguousarray(thetas, dtype=float), float(burn_in), float(step),
                               metric.packed)
    if not np.all(np.isfinite(out)) or not np.all(out > 0):
        raise CurvatureSignError("Riccati solution lost positivity; curvature is not negative along some orbit")
    return out


def periodic_riccati_integral(u, step):
    """Integral of a periodic sample record u[0..N] (u[N] ~ u[0]) by the periodic trapezoid rule."""
    return float(step * (np.sum(u[:-1]) + 0.5 * (u[-1] - u[0])))


def riccati_solution(curvature, step, u0, duration=None):
    """u' = -u^2 - K on a uniform grid.

    ``curvature`` is either a half-step record of length 2N + 1 or a constant,
    in which case ``duration`` fixes N.  Returns (times, u).
    """
    if np.isscalar(curvature):
        if duration is None:
            raise ConfigError("duration is required for constant curvature", path="duration")
        n = max(1, int(round(duration / step)))
        ks = np.full(2 * n + 1, float(curvature))
    else:
        ks = np.ascontiguousarray(curvature, dtype=float)
        if len(ks) % 2 == 0:
            raise ConfigError("curvature record must have odd length 2N + 1", path="curvature")
        n = (len(ks) - 1) // 2
    return step * np.arange(n + 1), K.riccati_path(ks, float(step), float(u0))
