"""Group-invariant perturbations of the hyperbolic metric and their curvature.

The metric is

    g = scale * exp(2 phi) * (g0 + sum_k coef_k T_k),     g0 = (dx^2 + dy^2) / y^2,

where phi is an automorphized bump field and every T_k is a symmetric
2-tensor built from an invariant scalar field (conformal multiple of g0,
Hessian, trace-free Hessian, rotated trace-free Hessian) or from a
holomorphic quadratic differential.  A metric with no tensor terms is
CONFORMAL; otherwise it is GENERAL.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import _kernel as K
from .errors import ConfigError, ContractViolation, CurvatureSignError, NumericalError
from .fuchsian import cosh_distance, domain_grid, reduce_to_domain

TENSOR_KINDS = {
    "conformal": K.KIND_CONFORMAL,
    "hessian": K.KIND_HESSIAN,
    "tracefree_hessian": K.KIND_TRACEFREE_HESSIAN,
    "rotated_hessian": K.KIND_ROTATED_HESSIAN,
    "holomorphic": K.KIND_HOLOMORPHIC,
}


@dataclass(frozen=True)
class Bump:
    """psi(z) = amplitude * b(q(z, center) / (cosh(radius) - 1)), b(s) = exp(1 - 1/(1 - s))."""

    center: complex
    radius: float
    amplitude: float

    def __post_init__(self):
        if complex(self.center).imag <= 0:
            raise ConfigError("bump center must lie in the upper half-plane", path="center")
        if not self.radius > 0:
            raise ConfigError("bump radius must be positive", path="radius")


@dataclass(frozen=True)
class BumpField:
    """Sum of bumps, automorphized over group elements of word length <= truncation."""

    bumps: tuple
    truncation: int = 4

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))
        if self.truncation < 0:
            raise ConfigError("truncation must be nonnegative", path="truncation")

    def scaled(self, c):
        return BumpField(tuple(replace(b, amplitude=c * b.amplitude) for b in self.bumps), self.truncation)


@dataclass(frozen=True)
class HolomorphicField:
    """Q(z) = coefficient * sum_gamma (gamma z - conj(pole))^-4 gamma'(z)^2 over words of length <= truncation.

    Without a group Q(z) = coefficient * (z - conj(pole))^-4 on the patch.
    Re(Q dz^2) is trace-free and divergence-free for g0.
    """

    pole: complex
    coefficient: complex = 1.0
    truncation: int = 4


@dataclass(frozen=True)
class TensorTerm:
    kind: str
    coef: float
    field: object

    def __post_init__(self):
        if self.kind not in TENSOR_KINDS:
            raise ConfigError(f"unknown tensor kind {self.kind!r}", path="kind")
        if (self.kind == "holomorphic") != isinstance(self.field, HolomorphicField):
            raise ConfigError("holomorphic terms need a HolomorphicField and vice versa", path="field")


@dataclass(frozen=True)
class CurvatureData:
    """Curvature at a point; in dimension 2, Ric = K g and Scal = 2K."""

    K: float
    ric: np.ndarray
    scal: float
    ric_v: float | None = None


def _orbit_centers(group, center, reach, truncation):
    """Images of ``center`` under words of length <= truncation within ``reach`` of the Dirichlet center."""
    if group is None:
        return [complex(center)]
    c0, _ = reduce_to_domain(group, complex(center))
    out = []
    lim = math.cosh(reach)
    for _, g in group.elements(truncation):
        w = g(c0)
        if cosh_distance(w, group.dirichlet_center) <= lim:
            if all(abs(w - u) > 1e-9 * abs(w) for u in out):
                out.append(w)
    return out


class MetricField:
    """Perturbed hyperbolic metric on the half-plane, invariant under ``group``.

    Parameters
    ----------
    group : FuchsianGroup or None
        Group of deck transformations.  ``None`` means a plain patch of the
        half-plane (no automorphization, no reduction).
    conformal : BumpField, optional
        Conformal exponent phi.
    tensors : sequence of TensorTerm
        Terms of the tensor perturbation h.
    scale : float
        Constant factor of the whole metric (homothety).
    force_general : bool
        Evaluate curvature through the coordinate (Brioschi) route even when
        the perturbation is conformal.
    """

    derivative_order = 4

    def __init__(self, group=None, conformal=None, tensors=(), scale=1.0, force_general=False):
        if not scale > 0:
            raise ConfigError("metric scale must be positive", path="scale")
        self.group = group
        self.conformal = conformal
        self.tensors = tuple(tensors)
        self.scale = float(scale)
        self.force_general = bool(force_general)
        if group is not None:
            grid = domain_grid(group)
            self._domain_radius = grid.circumradius
        else:
            self._domain_radius = None
        self._P = self._pack()

    # --- construction -----------------------------------------------------

    def _pack(self):
        fields = []
        if self.conformal is not None:
            fields.append(self.conformal)
        hol = []
        t_kind, t_coef, t_field = [], [], []
        for term in self.tensors:
            t_kind.append(TENSOR_KINDS[term.kind])
            t_coef.append(float(term.coef))
            if term.kind == "holomorphic":
                t_field.append(len(hol))
                hol.append(term.field)
            else:
                t_field.append(len(fields))
                fields.append(term.field)
        if self.force_general and not t_kind:
            t_kind.append(K.KIND_CONFORMAL)
            t_coef.append(0.0)
            t_field.append(0)
            if not fields:
                fields.append(BumpField(()))
        b_field, b_amp, b_Q, b_cx, b_cy = [], [], [], [], []
        for i, f in enumerate(fields):
            for bump in f.bumps:
                reach = (self._domain_radius or 0.0) + bump.radius + 0.05
                for c in _orbit_centers(self.group, bump.center, reach, f.truncation):
                    b_field.append(i)
                    b_amp.append(bump.amplitude)
                    b_Q.append(math.cosh(bump.radius) - 1.0)
                    b_cx.append(c.real)
                    b_cy.append(c.imag)
        qd_field, qd_a, qd_b = [], [], []
        for i, hf in enumerate(hol):
            wbar = np.conj(complex(hf.pole))
            elems = [((), None)] if self.group is None else self.group.elements(hf.truncation)
            for _, g in elems:
                if g is None:
                    A, B = 1.0 + 0j, -wbar
                else:
                    A, B = g.a - wbar * g.c, g.b - wbar * g.d
                # (A z + B)^-4 carries the coefficient through its fourth root
                r = complex(hf.coefficient) ** -0.25
                qd_field.append(i)
                qd_a.append(A * r)
                qd_b.append(B * r)
        if self.group is not None:
            gens = self.group.move_array()
            cc = self.group.dirichlet_center
        else:
            gens = np.zeros((0, 4))
            cc = 1j
        qa = np.array(qd_a, dtype=complex)
        qb = np.array(qd_b, dtype=complex)
        return (
            gens, float(cc.real), float(cc.imag), self.scale,
            0 if self.conformal is not None else -1, len(fields),
            np.array(b_field, dtype=np.int64), np.array(b_amp, dtype=float), np.array(b_Q, dtype=float),
            np.array(b_cx, dtype=float), np.array(b_cy, dtype=float),
            np.array(t_kind, dtype=np.int64), np.array(t_coef, dtype=float), np.array(t_field, dtype=np.int64),
            len(hol), np.array(qd_field, dtype=np.int64), qa.real.copy(), qa.imag.copy(), qb.real.copy(),
            qb.imag.copy(),
        )

    @property
    def packed(self):
        return self._P

    @property
    def perturbation_kind(self):
        return "CONFORMAL" if not self.tensors else "GENERAL"

    @property
    def is_unperturbed(self):
        amp = 0.0
        if self.conformal is not None:
            amp += sum(abs(b.amplitude) for b in self.conformal.bumps)
        amp += sum(abs(t.coef) for t in self.tensors)
        return amp == 0.0

    @property
    def is_hyperbolic_base(self):
        """True for g0 itself (no perturbation, unit scale)."""
        return self.is_unperturbed and self.scale == 1.0

    def scaled(self, c):
        """The homothetic metric c * g."""
        return MetricField(self.group, self.conformal, self.tensors, self.scale * c, self.force_general)

    def with_tensors(self, tensors, scale=None):
        return MetricField(self.group, self.conformal, tuple(tensors),
                           self.scale if scale is None else scale, self.force_general)

    def with_conformal(self, conformal):
        return MetricField(self.group, conformal, self.tensors, self.scale, self.force_general)

    def deformed(self, t):
        """Same metric with the perturbation (phi and every tensor coefficient) scaled by ``t``."""
        conf = None if self.conformal is None else self.conformal.scaled(t)
        terms = tuple(replace(term, coef=t * term.coef) for term in self.tensors)
        return MetricField(self.group, conf, terms, self.scale, self.force_general)

    def describe(self):
        """JSON-ready description of the metric data."""
        def bf(f):
            return {"truncation": f.truncation,
                    "bumps": [{"center": [f_.center.real, f_.center.imag] if isinstance(f_.center, complex)
                               else [float(np.real(f_.center)), float(np.imag(f_.center))],
                               "radius": f_.radius, "amplitude": f_.amplitude} for f_ in f.bumps]}
        out = {"scale": self.scale, "kind": self.perturbation_kind,
               "conformal": None if self.conformal is None else bf(self.conformal), "tensors": []}
        for t in self.tensors:
            if t.kind == "holomorphic":
                fd = {"pole": [t.field.pole.real, t.field.pole.imag],
                      "coefficient": [complex(t.field.coefficient).real, complex(t.field.coefficient).imag],
                      "truncation": t.field.truncation}
            else:
                fd = bf(t.field)
            out["tensors"].append({"kind": t.kind, "coef": t.coef, "field": fd})
        return out

    # --- evaluation -------------------------------------------------------

    def jets(self, z, order):
        """Jets of (g_xx, g_xy, g_yy); entry [i, p, q] = d^p_x d^q_y g_i / (p! q!)."""
        z = complex(z)
        if order > self.derivative_order:
            from .errors import CapabilityError
            raise CapabilityError(f"derivative order {order} exceeds supported {self.derivative_order}")
        out = K.metric_jets(z.real, z.imag, order, self._P)
        if not np.all(np.isfinite(out)):
            raise NumericalError(f"metric evaluation failed at {z}")
        return out

    def jets_many(self, xs, ys, order):
        return K.metric_jets_many(np.ascontiguousarray(xs, dtype=float),
                                  np.ascontiguousarray(ys, dtype=float), order, self._P)

    def tensor(self, z):
        """Metric matrix at ``z``; positive-definiteness is checked."""
        G = self.jets(z, 0)
        g = np.array([[G[0, 0, 0], G[1, 0, 0]], [G[1, 0, 0], G[2, 0, 0]]])
        if not (g[0, 0] > 0 and np.linalg.det(g) > 0):
            raise NumericalError(f"metric is not positive definite at {complex(z)}")
        return g

    def tensor_many(self, xs, ys):
        G = self.jets_many(xs, ys, 0)
        g = np.empty((len(G), 2, 2))
        g[:, 0, 0] = G[:, 0, 0, 0]
        g[:, 0, 1] = g[:, 1, 0] = G[:, 1, 0, 0]
        g[:, 1, 1] = G[:, 2, 0, 0]
        if not np.all((g[:, 0, 0] > 0) & (np.linalg.det(g) > 0)):
            raise NumericalError("metric is not positive definite at some sample point")
        return g

    def perturbation_many(self, xs, ys, order=0):
        """Jets of phi and of the tensor perturbation h at many points."""
        return K.perturbation_jets_many(np.ascontiguousarray(xs, dtype=float),
                                        np.ascontiguousarray(ys, dtype=float), order, self._P)

    def christoffel_many(self, xs, ys):
        """Christoffel symbols Gamma[n, k, i, j] and their partials dGamma[n, l, k, i, j]."""
        G = self.jets_many(xs, ys, 2)
        return christoffel_from_jets(G)

    def gauss_curvature(self, z):
        z = complex(z)
        return float(K.gauss_curvature(z.real, z.imag, self._P))

    def gauss_curvature_many(self, xs, ys):
        return K.curvature_many(np.ascontiguousarray(xs, dtype=float),
                                np.ascontiguousarray(ys, dtype=float), self._P)

    def unit_velocity(self, tangent):
        return K.unit_velocity(tangent.x, tangent.y, tangent.theta, self._P)

    def norm(self, z, v):
        g = self.tensor(z)
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(v @ g @ v))

    def invariance_defect(self, points):
        """max |gamma^* g - g| over points and generators, relative to |g|."""
        if self.group is None:
            return 0.0
        worst = 0.0
        for z in points:
            g = self.tensor(z)
            for _, el in self.group.reduction_moves():
                d = el.derivative(z)
                jac = np.array([[d.real, -d.imag], [d.imag, d.real]])
                pulled = jac.T @ self.tensor(el(z)) @ jac
                worst = max(worst, np.abs(pulled - g).max() / np.abs(g).max())
        return worst


def christoffel_from_jets(G):
    """Vectorized Christoffel symbols and their first partials from order-2 metric jets.

    Returns Gam[n, k, i, j] and dGam[n, l, k, i, j] = d_l Gamma^k_ij.
    """
    n = G.shape[0]
    g = np.empty((n, 2, 2))
    g[:, 0, 0] = G[:, 0, 0, 0]
    g[:, 0, 1] = g[:, 1, 0] = G[:, 1, 0, 0]
    g[:, 1, 1] = G[:, 2, 0, 0]
    comp = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}
    dg = np.empty((n, 2, 2, 2))     # dg[n, l, i, j]
    ddg = np.empty((n, 2, 2, 2, 2))  # ddg[n, m, l, i, j]
    for (i, j), c in comp.items():
        dg[:, 0, i, j] = G[:, c, 1, 0]
        dg[:, 1, i, j] = G[:, c, 0, 1]
        ddg[:, 0, 0, i, j] = 2.0 * G[:, c, 2, 0]
        ddg[:, 0, 1, i, j] = ddg[:, 1, 0, i, j] = G[:, c, 1, 1]
        ddg[:, 1, 1, i, j] = 2.0 * G[:, c, 0, 2]
    ginv = np.linalg.inv(g)
    # first kind Gamma_{l, ij}
    g1 = 0.5 * (np.einsum("nilj->nlij", dg) + np.einsum("njil->nlij", dg) - dg)
    gam = np.einsum("nkl,nlij->nkij", ginv, g1)
    dg1 = 0.5 * (np.einsum("nmilj->nmlij", ddg) + np.einsum("nmjil->nmlij", ddg) - ddg)
    dginv = -np.einsum("nka,nmab,nbl->nmkl", ginv, dg, ginv)
    dgam = np.einsum("nmkl,nlij->nmkij", dginv, g1) + np.einsum("nkl,nmlij->nmkij", ginv, dg1)
    return gam, dgam


def curvature(metric, point, v=None):
    """Curvature data at ``point``; ``v`` (a coordinate vector) adds Ric(v, v)."""
    z = complex(point)
    if z.imag <= 0:
        raise ConfigError("point must lie in the upper half-plane")
    k = metric.gauss_curvature(z)
    g = metric.tensor(z)
    ric_v = None
    if v is not None:
        v = np.asarray(v, dtype=float)
        ric_v = float(k * (v @ g @ v))
    return CurvatureData(K=k, ric=k * g, scal=2.0 * k, ric_v=ric_v)


def check_negative_curvature(metric, n_angle=8, n_radius=12, margin_min=0.05, refine=True, worst=5):
    """Maximum of K over a quadrature grid of one fundamental domain, returned as the margin -max K.

    Raises CurvatureSignError if max K > -margin_min on the grid or on a
    refined grid.
    """
    if metric.group is None:
        raise ConfigError("negativity check needs a group (fundamental domain grid)")
    sizes = [(n_angle, n_radius)]
    if refine:
        sizes.append((2 * n_angle, 2 * n_radius))
    kmax = -np.inf
    for na, nr in sizes:
        grid = domain_grid(metric.group, na, nr)
        ks = metric.gauss_curvature_many(grid.xs, grid.ys)
        if not np.all(np.isfinite(ks)):
            raise NumericalError("curvature evaluation failed on the domain grid")
        kmax = max(kmax, float(ks.max()))
        if kmax > -margin_min:
            idx = np.argsort(-ks)[:worst]
            raise CurvatureSignError(
                f"curvature max {kmax:.6g} exceeds -{margin_min}",
                points=[(p.real, p.imag) for p in grid.points[idx]], values=ks[idx])
    return -kmax
