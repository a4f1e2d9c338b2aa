"""Fiber and unit-tangent-bundle quadrature, mean root curvature and Liouville entropy.

Also hosts the pointwise dimension-3 curvature identities and the second
variation checks of the mean root curvature on surfaces.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernel as K
from .errors import ConfigError, ContractViolation, CurvatureSignError, NumericalError
from .fuchsian import domain_grid
from .geodesics import DEFAULT_BURN_IN, unstable_jacobians
from .tensors import inner, rough_laplacian

ENTROPY_STEP = 2e-2
BIRKHOFF_TIME = 2000.0
BIRKHOFF_DISCARD = 50.0


# --- fiber rules -------------------------------------------------------------

@dataclass(frozen=True)
class SphereQuadrature:
    """Rule on the unit sphere S^{dim-1} with weights summing to 1.

    ``degree`` is the polynomial degree integrated exactly.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    @classmethod
    def circle(cls, n=16):
        """n equally spaced angles; exact for trigonometric polynomials of degree < n."""
        if n < 1:
            raise ConfigError("fiber rule needs at least one node", path="n_fiber")
        a = 2 * np.pi * np.arange(n) / n
        return cls(2, np.column_stack([np.cos(a), np.sin(a)]), np.full(n, 1.0 / n), n - 1)

    @classmethod
    def sphere(cls, n_colat=8, n_lon=16):
        """Gauss-Legendre in cos(colatitude) times uniform longitude."""
        z, wz = np.polynomial.legendre.leggauss(n_colat)
        lon = 2 * np.pi * np.arange(n_lon) / n_lon
        Z, L = np.meshgrid(z, lon, indexing="ij")
        r = np.sqrt(1 - Z ** 2)
        nodes = np.column_stack([(r * np.cos(L)).ravel(), (r * np.sin(L)).ravel(), Z.ravel()])
        w = np.outer(wz / 2, np.full(n_lon, 1.0 / n_lon)).ravel()
        return cls(3, nodes, w, min(2 * n_colat - 1, n_lon - 1))

    @property
    def angles(self):
        if self.dim != 2:
            raise ValueError("angles are defined for circle rules only")
        return np.arctan2(self.nodes[:, 1], self.nodes[:, 0])

    def integrate(self, f):
        """Weighted sum of f(nodes); f maps an (m, dim) array to (m, ...) values."""
        vals = np.asarray(f(self.nodes), dtype=float)
        return np.tensordot(self.weights, vals, axes=(0, 0))


@dataclass(frozen=True)
class SMQuadrature:
    """Liouville rule on the unit tangent bundle of one fundamental domain.

    Base weights are Riemannian area weights divided by the total area, and
    the fiber directions form a g-orthonormal circle at every base node.
    """

    metric: object
    xs: np.ndarray
    ys: np.ndarray
    base_weights: np.ndarray
    volume: float
    fiber: SphereQuadrature
    vectors: np.ndarray  # (n_base, n_fiber, 2) g-unit coordinate vectors

    @property
    def n_base(self):
        return len(self.xs)

    @property
    def mass(self):
        return float(np.sum(self.base_weights))

    def nodes(self):
        """Flattened (xs, ys, vs, weights) over base x fiber."""
        nf = len(self.fiber.weights)
        xs = np.repeat(self.xs, nf)
        ys = np.repeat(self.ys, nf)
        vs = self.vectors.reshape(-1, 2)
        w = np.outer(self.base_weights, self.fiber.weights).ravel()
        return xs, ys, vs, w

    def thetas(self):
        vs = self.vectors.reshape(-1, 2)
        return np.arctan2(vs[:, 1], vs[:, 0])


def orthonormal_frames(g):
    """g-orthonormal frames (e1, e2) by Gram-Schmidt from the coordinate basis; shape (n, 2, 2), rows e1, e2."""
    e1 = np.zeros((len(g), 2))
    e1[:, 0] = 1.0 / np.sqrt(g[:, 0, 0])
    # e2 solves g(e1, e2) = 0 with positive y-component
    e2 = np.column_stack([-g[:, 0, 1], g[:, 0, 0]])
    n2 = np.sqrt(np.einsum("ni,nij,nj->n", e2, g, e2))
    e2 /= n2[:, None]
    return np.stack([e1, e2], axis=1)


def sm_quadrature(metric, n_angle=8, n_radius=12, n_fiber=16):
    """SMQuadrature of ``metric`` over the Dirichlet domain of its group."""
    if metric.group is None:
        raise ConfigError("unit tangent bundle quadrature needs a group", path="group")
    grid = domain_grid(metric.group, n_angle, n_radius)
    xs, ys = grid.xs, grid.ys
    g = metric.tensor_many(xs, ys)
    dens = np.sqrt(np.linalg.det(g)) * ys ** 2  # dvol_g / dvol_{g0}
    w = grid.weights * dens
    vol = float(np.sum(w))
    fiber = SphereQuadrature.circle(n_fiber)
    frames = orthonormal_frames(g)
    vec = np.einsum("fa,nai->nfi", fiber.nodes, frames)
    return SMQuadrature(metric, xs, ys, w / vol, vol, fiber, vec)


def liouville_integral(f, rule):
    """Integral of f(xs, ys, vs) against the normalized Liouville measure."""
    xs, ys, vs, w = rule.nodes()
    vals = np.asarray(f(xs, ys, vs), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("integrand is not finite at some quadrature node")
    return float(np.sum(w * vals))


def pi_star_integrand(S):
    """f(x, v) = S_x(v, v) as a Liouville integrand."""
    return lambda xs, ys, vs: np.einsum("ni,nij,nj->n", vs, S.values(xs, ys), vs)


def trace_average(S, rule):
    """(1 / (n Vol)) int tr_g S dvol_g with n = 2."""
    g = rule.metric.tensor_many(rule.xs, rule.ys)
    tr = np.einsum("nij,nji->n", np.linalg.inv(g), S.values(rule.xs, rule.ys))
    return float(np.sum(rule.base_weights * tr)) / 2.0


# --- mean root curvature and entropy -----------------------------------------

def _checked_curvature(metric, xs, ys):
    k = metric.gauss_curvature_many(xs, ys)
    bad = ~(k < 0)
    if np.any(bad):
        idx = np.flatnonzero(bad)[:5]
        raise CurvatureSignError("curvature is not negative at some quadrature nodes",
                                 points=[(xs[i], ys[i]) for i in idx], values=[float(k[i]) for i in idx])
    return k


def mean_root_curvature(metric, rule):
    """kappa(g): Liouville average of tr((-R(v))^{1/2}) = sqrt(-K) in dimension 2."""
    k = _checked_curvature(metric, rule.xs, rule.ys)
    return float(np.sum(rule.base_weights * np.sqrt(-k)))


@dataclass(frozen=True)
class EntropyEstimate:
    """Liouville entropy by space quadrature of J^u and by a Birkhoff average along one orbit."""

    space: float
    time: float
    burn_in: float
    step: float
    orbit_time: float

    @property
    def spread(self):
        return abs(self.space - self.time)

    def __float__(self):
        return self.space

    def to_dict(self):
        return {"space": self.space, "time": self.time, "spread": self.spread,
                "burn_in": self.burn_in, "step": self.step, "orbit_time": self.orbit_time}


def birkhoff_unstable_average(metric, start, total=BIRKHOFF_TIME, discard=BIRKHOFF_DISCARD, step=ENTROPY_STEP):
    """Time average of the forward Riccati solution u along one orbit, first ``discard`` units dropped."""
    n = int(math.ceil(total / step))
    h = total / n
    vx, vy = metric.unit_velocity(start)
    ks, _ = K.flow_curvature_reduced(start.x, start.y, vx, vy, h, n, metric.packed)
    if not np.all(np.isfinite(ks)):
        raise NumericalError("Birkhoff orbit left the numerical validity region")
    if np.any(ks >= 0):
        raise CurvatureSignError("curvature is not negative along the Birkhoff orbit")
    us = K.riccati_path(ks, h, 1.0)
    keep = us[int(round(discard / h)):]
    return float(h * (np.sum(keep) - 0.5 * (keep[0] + keep[-1])) / (h * (len(keep) - 1)))


def liouville_entropy(metric, rule, burn_in=DEFAULT_BURN_IN, step=ENTROPY_STEP, orbit_time=BIRKHOFF_TIME,
                      discard=BIRKHOFF_DISCARD, start=None):
    """Pesin-formula entropy: Liouville average of J^u, with a Birkhoff cross-check."""
    from .fuchsian import UnitTangent
    _checked_curvature(metric, rule.xs, rule.ys)
    xs, ys, _, w = rule.nodes()
    ju = unstable_jacobians(metric, xs, ys, rule.thetas(), burn_in, step)
    space = float(np.sum(w * ju))
    if start is None:
        start = UnitTangent(0.137, 1.071, 0.731)
    time = birkhoff_unstable_average(metric, start, orbit_time, discard, step) if orbit_time > 0 else float("nan")
    return EntropyEstimate(space, time, burn_in, step, orbit_time)


# --- dimension 3 pointwise identities ----------------------------------------

@dataclass(frozen=True)
class PointTensor3:
    """Symmetric 3x3 tensor at a point with identity metric, and the Ricci-variation factor mu."""

    S: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        if S.shape != (3, 3) or not np.allclose(S, S.T, atol=1e-14):
            raise ConfigError("S must be a symmetric 3x3 matrix", path="S")
        object.__setattr__(self, "S", S)

    @property
    def trace(self):
        return float(np.trace(self.S))

    def require_trace_free(self, tol=1e-12):
        if abs(self.trace) > tol * max(1.0, np.abs(self.S).max()):
            raise ContractViolation(f"tensor is not trace-free (trace {self.trace:.3g})")

    @classmethod
    def random_trace_free(cls, rng, mu=0.0, scale=1.0):
        a = rng.normal(size=(3, 3)) * scale
        a = 0.5 * (a + a.T)
        return cls(a - np.trace(a) / 3 * np.eye(3), mu)


def normal_basis(v):
    """Orthonormal basis (2 x 3, rows) of the plane orthogonal to the unit vector v."""
    v = np.asarray(v, dtype=float)
    k = int(np.argmin(np.abs(v)))
    e = np.zeros(3)
    e[k] = 1.0
    a = e - (e @ v) * v
    a /= np.linalg.norm(a)
    return np.array([a, np.cross(v, a)])


def dim3_curvature_derivative(pt, v):
    """(mu+1) S(v,v) Id + (mu+2) S restricted to v-perp, in the basis ``normal_basis(v)``."""
    pt.require_trace_free()
    v = np.asarray(v, dtype=float)
    if abs(v @ v - 1.0) > 1e-12:
        raise ContractViolation("v must be a unit vector")
    B = normal_basis(v)
    p = float(v @ pt.S @ v)
    return (pt.mu + 1) * p * np.eye(2) + (pt.mu + 2) * (B @ pt.S @ B.T)


def kulkarni_nomizu(h, k):
    """(h o k)_{abcd} = h_ad k_bc + h_bc k_ad - h_ac k_bd - h_bd k_ac."""
    return (np.einsum("ad,bc->abcd", h, k) + np.einsum("bc,ad->abcd", h, k)
            - np.einsum("ac,bd->abcd", h, k) - np.einsum("bd,ac->abcd", h, k))


def corr2_fiber_check(S, mu, rule=None):
    """(lhs, rhs): fiber average of tr((dR(v))^2) against its closed form, pointwise with Vol = 1."""
    pt = S if isinstance(S, PointTensor3) else PointTensor3(S, mu)
    pt = PointTensor3(pt.S, mu)
    pt.require_trace_free()
    rule = rule or SphereQuadrature.sphere()
    vals = np.array([np.trace(np.linalg.matrix_power(dim3_curvature_derivative(pt, v), 2)) for v in rule.nodes])
    lhs = float(rule.weights @ vals)
    p2 = float(rule.weights @ np.einsum("ni,ij,nj->n", rule.nodes, pt.S, rule.nodes) ** 2)
    rhs = (-2 * (mu + 1) + (mu + 2) ** 2) * p2 + (mu + 2) ** 2 / 3 * float(np.trace(pt.S @ pt.S))
    return lhs, rhs


def kappa_hessian_dim3(S, mu=0.0, scal_hessian=None, rule=None):
    """Assembled second variation of kappa at one point of a hyperbolic 3-manifold (Vol = 1).

    Uses the fiber average of tr((dR)^2) and, unless given, the total scalar
    curvature Hessian <S, -1/2 nabla^*nabla S + S> with nabla^*nabla S = (2 mu + 6) S.
    Returns (value, ||pi_2^* S||^2).
    """
    pt = PointTensor3(np.asarray(S.S if isinstance(S, PointTensor3) else S), mu)
    rule = rule or SphereQuadrature.sphere()
    p2 = float(rule.weights @ np.einsum("ni,ij,nj->n", rule.nodes, pt.S, rule.nodes) ** 2)
    norm2 = float(np.trace(pt.S @ pt.S))
    lhs, _ = corr2_fiber_check(pt, mu, rule)
    if scal_hessian is None:
        scal_hessian = (-0.5 * (2 * mu + 6) + 1.0) * norm2
    n = 3
    value = 3 * (n - 1) / 4 * p2 + 0.5 * mu * p2 - 0.25 * lhs - scal_hessian / (2 * n)
    return value, p2


# --- second variation of kappa on surfaces ------------------------------------

@dataclass(frozen=True)
class KappaHessianReport:
    """Second FD of kappa along a volume-normalized family next to the four-term formula."""

    fd_value: float
    term_sphere: float
    term_ricci: float
    term_curvature: float
    term_scalar: float
    noise: float
    inconclusive: bool
    steps: tuple = ()
    fd_values: tuple = ()
    scalar_check: dict = field(default_factory=dict)

    @property
    def formula_value(self):
        return self.term_sphere + self.term_ricci + self.term_curvature + self.term_scalar

    @property
    def relative_error(self):
        f = self.formula_value
        return abs(self.fd_value - f) / abs(f) if f != 0 else float("inf")

    def to_dict(self):
        return {"fd_value": self.fd_value, "formula_value": self.formula_value,
                "terms": [self.term_sphere, self.term_ricci, self.term_curvature, self.term_scalar],
                "relative_error": self.relative_error, "noise": self.noise, "inconclusive": self.inconclusive,
                "steps": list(self.steps), "fd_values": list(self.fd_values), "scalar_check": dict(self.scalar_check)}


def _area(metric, grid):
    g = metric.tensor_many(grid.xs, grid.ys)
    return float(np.sum(grid.weights * np.sqrt(np.linalg.det(g)) * grid.ys ** 2))


def volume_normalized(base, terms, lam, grid):
    """c (g + lam h) with the constant c making the area equal to that of ``base``.

    Area is linear in a constant factor in dimension 2, so c is explicit.
    """
    from .metric import TensorTerm
    raw = base.with_tensors(tuple(base.tensors) + tuple(TensorTerm(t.kind, lam * t.coef, t.field) for t in terms))
    c = _area(base, grid) / _area(raw, grid)
    return raw.scaled(c), c


def total_scalar_curvature(metric, grid):
    """int Scal dvol = 2 int K dA over the fundamental domain."""
    k = metric.gauss_curvature_many(grid.xs, grid.ys)
    g = metric.tensor_many(grid.xs, grid.ys)
    return float(2 * np.sum(grid.weights * k * np.sqrt(np.linalg.det(g)) * grid.ys ** 2))


def _second_fd(fn, h):
    return (fn(h) - 2 * fn(0.0) + fn(-h)) / (h * h)


def scalar_hessian_check(base, tt_terms, n_angle=8, n_radius=12, steps=(2e-2, 1e-2), fd_h=1e-3):
    """Second FD of the total scalar curvature along g + lam S vs <S, -1/2 nabla^*nabla S + S>.

    ``scale`` = <S, S> is the size of each constituent of the formula.
    """
    from .tensors import term_tensor
    grid = domain_grid(base.group, n_angle, n_radius)
    S = term_tensor(tt_terms, base.group)
    from .metric import TensorTerm

    def scal(lam):
        return total_scalar_curvature(
            base.with_tensors(tuple(TensorTerm(t.kind, lam * t.coef, t.field) for t in tt_terms)), grid)

    fds = [_second_fd(scal, h) for h in steps]
    rough = rough_laplacian(S, base, fd_h)
    xs, ys = grid.xs, grid.ys
    w = grid.weights
    ss = float(np.sum(w * inner(S, S, base, xs, ys)))
    srs = float(np.sum(w * inner(S, rough, base, xs, ys)))
    formula = -0.5 * srs + ss
    return {"fd_value": fds[-1], "fd_values": fds, "steps": list(steps), "formula_value": formula,
            "scale": ss, "rough_term": srs, "noise": abs(fds[-1] - fds[0]),
            "relative_error": abs(fds[-1] - formula) / ss}


def kappa_hessian_check(base, terms, n_angle=16, n_radius=24, n_fiber=8, steps=(4e-2, 2e-2), dk_h=1e-4,
                        tt_terms=None):
    """Second variation of kappa along c(lam) (g0 + lam S), S trace-free, against the four-term formula.

    Terms (Liouville averages at g0, v g0-unit):
      3/4 <(pi S)^2>, 1/2 <pi S . dRic(v)>, -1/4 <tr(dR(v)^2)>, -(1 / (4 Vol)) d^2 Scal-total,
    with dRic(v) = dR(v) = dK - pi S on surfaces and dK from a central FD of the curvature.
    """
    from .tensors import term_tensor
    from .metric import TensorTerm
    if not base.is_hyperbolic_base:
        raise ContractViolation("kappa Hessian formula is stated at the hyperbolic metric")
    grid = domain_grid(base.group, n_angle, n_radius)
    rule = sm_quadrature(base, n_angle, n_radius, n_fiber)
    S = term_tensor(terms, base.group)
    xs, ys, vs, w = rule.nodes()
    # trace-freeness w.r.t. g0
    trS = np.einsum("nii->n", S.values(rule.xs, rule.ys)) * rule.ys ** 2
    if np.abs(trS).max() > 1e-10 * max(1.0, np.abs(S.values(rule.xs, rule.ys)).max() * rule.ys.max() ** 2):
        raise ContractViolation("tangent tensor is not trace-free")

    def kappa(lam):
        m, _ = volume_normalized(base, terms, lam, grid)
        return mean_root_curvature(m, sm_quadrature(m, n_angle, n_radius, 1))

    fds = [_second_fd(kappa, h) for h in steps]

    def k_at(lam):
        m = base.with_tensors(tuple(TensorTerm(t.kind, lam * t.coef, t.field) for t in terms))
        return m.gauss_curvature_many(rule.xs, rule.ys)

    dk = (k_at(dk_h) - k_at(-dk_h)) / (2 * dk_h)
    nf = len(rule.fiber.weights)
    p = np.einsum("ni,nij,nj->n", vs, S.values(xs, ys), vs)
    dric = np.repeat(dk, nf) - p
    t1 = 0.75 * float(np.sum(w * p * p))
    t2 = 0.5 * float(np.sum(w * p * dric))
    t3 = -0.25 * float(np.sum(w * dric * dric))

    def scal(lam):
        m, _ = volume_normalized(base, terms, lam, grid)
        return total_scalar_curvature(m, grid)

    t4 = -_second_fd(scal, steps[-1]) / (4 * rule.volume)
    noise = abs(fds[-1] - fds[0])
    formula = t1 + t2 + t3 + t4
    inconclusive = noise > abs(formula)
    sub = scalar_hessian_check(base, tt_terms, n_angle, n_radius) if tt_terms else {}
    return KappaHessianReport(fds[-1], t1, t2, t3, t4, noise, inconclusive, tuple(steps), tuple(fds), sub)


def schouten_curvature_derivative(S, mu, v):
    """dR(v) on v-perp from the dimension-3 reconstruction Rm = P o g of the curvature tensor.

    Differentiates Rm at a hyperbolic point along dg = S with dRic = mu S,
    then reads g0(dR(v) w, w') = dRm(w, v, v, w') + S(w, w'), which accounts
    for the variation of the metric used to lower the index.
    """
    S = np.asarray(S, dtype=float)
    g = np.eye(3)
    ric, scal = -2.0 * g, -6.0
    dric = mu * S
    dscal = np.trace(dric) - np.trace(ric @ S)
    P = ric - scal / 4 * g
    dP = dric - dscal / 4 * g - scal / 4 * S
    dRm = kulkarni_nomizu(dP, g) + kulkarni_nomizu(P, S)
    B = normal_basis(v)
    full = np.einsum("abcd,b,c->ad", dRm, v, v) + S
    return B @ full @ B.T
