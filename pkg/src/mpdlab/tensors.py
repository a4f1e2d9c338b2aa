"""Symmetric tensor fields on the half-plane and the covariant operator stack.

Fields are vectorized: ``S.values(xs, ys)`` returns an array of shape
(N,) + (2,) * rank of coordinate components.  Partial derivatives of field
components use central finite-difference stencils of coordinate step
``h * y`` (second order); Christoffel symbols and their partials come
exactly from the metric jets.

Conventions: the rough Laplacian is nonnegative on functions,
D = Sym(nabla), D* = -tr(nabla), and the curvature satisfies K = -1 for g0.
"""

import itertools
import string

import numpy as np

from .errors import CapabilityError, ContractViolation
from .metric import MetricField, TensorTerm

DEFAULT_H = 1e-3


class TensorField:
    """Covariant tensor field of the given rank with a vectorized evaluator."""

    symmetric = False

    def __init__(self, rank, func, name="", derivative_order=np.inf):
        self.rank = int(rank)
        self._func = func
        self.name = name
        self.derivative_order = derivative_order

    def values(self, xs, ys):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        out = np.asarray(self._func(xs, ys), dtype=float)
        return out.reshape((len(xs),) + (2,) * self.rank)

    def __call__(self, z):
        z = complex(z)
        return self.values(np.array([z.real]), np.array([z.imag]))[0]

    def _combine(self, other, op):
        if isinstance(other, TensorField):
            if other.rank != self.rank:
                raise ValueError("rank mismatch")
            f = lambda xs, ys: op(self.values(xs, ys), other.values(xs, ys))
            order = min(self.derivative_order, other.derivative_order)
            sym = self.symmetric and other.symmetric
        else:
            f = lambda xs, ys: op(self.values(xs, ys), other)
            order = self.derivative_order
            sym = self.symmetric
        cls = SymmetricTensorField if sym else TensorField
        return cls(self.rank, f, derivative_order=order)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        return self._combine(float(c), np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


class SymmetricTensorField(TensorField):
    """Symmetric covariant tensor field; symmetry is exact by construction of the evaluator."""

    symmetric = True

    def symmetry_defect(self, xs, ys):
        v = self.values(xs, ys)
        worst = 0.0
        for perm in itertools.permutations(range(1, self.rank + 1)):
            worst = max(worst, float(np.abs(v - np.transpose(v, (0,) + perm)).max()))
        return worst


# --- constructors ----------------------------------------------------------

def constant_scalar(c):
    return SymmetricTensorField(0, lambda xs, ys: np.full(len(xs), float(c)), name=f"const({c})")


def scalar_field(func, name=""):
    return SymmetricTensorField(0, func, name=name)


def bump_scalar(bump_field, group=None):
    """Automorphized bump field as a rank-0 field."""
    m = MetricField(group, conformal=bump_field)

    def f(xs, ys):
        phi, _ = m.perturbation_many(xs, ys, 0)
        return phi[:, 0, 0]
    return SymmetricTensorField(0, f, name="bump")


def term_tensor(terms, group=None):
    """Rank-2 field sum_k coef_k T_k built from TensorTerm objects."""
    m = MetricField(group, tensors=tuple(terms))

    def f(xs, ys):
        _, h = m.perturbation_many(xs, ys, 0)
        out = np.empty((len(xs), 2, 2))
        out[:, 0, 0] = h[:, 0, 0, 0]
        out[:, 0, 1] = out[:, 1, 0] = h[:, 1, 0, 0]
        out[:, 1, 1] = h[:, 2, 0, 0]
        return out
    return SymmetricTensorField(2, f, name="terms")


def metric_tensor(metric):
    return SymmetricTensorField(2, metric.tensor_many, name="g")


def conformal_multiple(f, metric):
    """f g for a scalar field f."""
    return SymmetricTensorField(2, lambda xs, ys: f.values(xs, ys)[:, None, None] * metric.tensor_many(xs, ys),
                                name="f g")


def hyperbolic_metric():
    return MetricField(None)


# --- finite-difference partials -------------------------------------------

_OFFSETS = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def partials(S, xs, ys, h=DEFAULT_H, second=True):
    """Values, first partials (N, 2, ...) and second partials (N, 2, 2, ...) of components.

    Second-order central stencils: 5 points for the pure second partials, 4
    corner points for the mixed one.  The coordinate step at a point is
    ``h * y``, a fixed hyperbolic size, so the accuracy is the same on every
    lift of a fundamental domain.
    """
    if second and S.derivative_order < 2 or S.derivative_order < 1:
        raise CapabilityError(f"field supports derivative order {S.derivative_order}")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = len(xs)
    hs = h * ys
    offs = _OFFSETS if second else _OFFSETS[:5]
    px = np.concatenate([xs + i * hs for i, _ in offs])
    py = np.concatenate([ys + j * hs for _, j in offs])
    v = S.values(px, py).reshape((len(offs), n) + (2,) * S.rank)
    f0 = v[0]
    hb = hs.reshape((n,) + (1,) * S.rank)
    d = np.empty((n, 2) + (2,) * S.rank)
    d[:, 0] = (v[1] - v[2]) / (2 * hb)
    d[:, 1] = (v[3] - v[4]) / (2 * hb)
    if not second:
        return f0, d, None
    dd = np.empty((n, 2, 2) + (2,) * S.rank)
    dd[:, 0, 0] = (v[1] - 2 * f0 + v[2]) / hb ** 2
    dd[:, 1, 1] = (v[3] - 2 * f0 + v[4]) / hb ** 2
    dd[:, 0, 1] = dd[:, 1, 0] = (v[5] - v[6] - v[7] + v[8]) / (4 * hb ** 2)
    return f0, d, dd


# --- covariant derivatives ---------------------------------------------------

_LETTERS = string.ascii_lowercase.replace("n", "").replace("p", "").replace("l", "")


def _connection(vals, gam, slot_first):
    """sum_a Gamma^p_{l i_a} T_{.. p ..}: returns (N, l, slots...).

    ``vals`` has shape (N,) + (2,)*r; ``gam`` is (N, k, i, j).
    """
    r = vals.ndim - 1
    idx = _LETTERS[:r]
    out = 0.0
    for a in range(r):
        src = idx[:a] + "p" + idx[a + 1:]
        out = out + np.einsum(f"n{src},npl{idx[a]}->nl{idx}", vals, gam)
    return out


def nabla_values(vals, dvals, gam):
    """(nabla T)_{l; I} = d_l T_I - sum_a Gamma^p_{l i_a} T_{..p..}."""
    if vals.ndim == 1:
        return dvals.copy()
    return dvals - _connection(vals, gam, True)


def second_nabla_values(vals, dvals, ddvals, gam, dgam):
    """(nabla nabla T)_{l, k; I} with derivative indices first."""
    r = vals.ndim - 1
    first = nabla_values(vals, dvals, gam)  # (N, k, I)
    # d_l of the first covariant derivative
    d_first = ddvals.copy()  # (N, l, k, I)
    if r > 0:
        idx = _LETTERS[:r]
        for a in range(r):
            src = idx[:a] + "p" + idx[a + 1:]
            d_first -= np.einsum(f"nmpk{idx[a]},n{src}->nmk{idx}", dgam, vals)
            d_first -= np.einsum(f"npk{idx[a]},nm{src}->nmk{idx}", gam, dvals)
    return nabla_values(first, d_first, gam)


def covariant_derivative(S, metric, h=DEFAULT_H):
    """nabla S as a rank+1 field, derivative index first."""
    def f(xs, ys):
        v, d, _ = partials(S, xs, ys, h, second=False)
        gam, _ = metric.christoffel_many(xs, ys)
        return nabla_values(v, d, gam)
    return TensorField(S.rank + 1, f, derivative_order=S.derivative_order - 1)


def symmetrize(vals):
    r = vals.ndim - 1
    perms = list(itertools.permutations(range(1, r + 1)))
    return sum(np.transpose(vals, (0,) + p) for p in perms) / len(perms)


def sym_derivative(p, metric, h=DEFAULT_H):
    """D p = Sym(nabla p)."""
    nab = covariant_derivative(p, metric, h)
    return SymmetricTensorField(p.rank + 1, lambda xs, ys: symmetrize(nab.values(xs, ys)),
                                name=f"D({p.name})", derivative_order=p.derivative_order - 1)


def divergence(S, metric, h=DEFAULT_H):
    """D* S = -tr_g(nabla S), contracting the derivative index with the first slot."""
    if S.rank < 1:
        raise ValueError("divergence needs rank >= 1")
    nab = covariant_derivative(S, metric, h)

    def f(xs, ys):
        ginv = np.linalg.inv(metric.tensor_many(xs, ys))
        return -np.einsum("nkl,nkl...->n...", ginv, nab.values(xs, ys))
    return SymmetricTensorField(S.rank - 1, f, name=f"D*({S.name})", derivative_order=S.derivative_order - 1)


def rough_laplacian(S, metric, h=DEFAULT_H):
    """nabla* nabla S = -g^{lk} (nabla nabla S)_{l k ...}."""
    if S.derivative_order < 2:
        raise CapabilityError("rough Laplacian needs derivative order >= 2")

    def f(xs, ys):
        v, d, dd = partials(S, xs, ys, h)
        gam, dgam = metric.christoffel_many(xs, ys)
        nn = second_nabla_values(v, d, dd, gam, dgam)
        ginv = np.linalg.inv(metric.tensor_many(xs, ys))
        return -np.einsum("nlk,nlk...->n...", ginv, nn)
    return SymmetricTensorField(S.rank, f, name=f"rough({S.name})", derivative_order=S.derivative_order - 2)


def trace(S, metric):
    if S.rank != 2:
        raise ValueError("trace needs rank 2")
    return SymmetricTensorField(
        0, lambda xs, ys: np.einsum("nij,nij->n", np.linalg.inv(metric.tensor_many(xs, ys)), S.values(xs, ys)),
        name=f"tr({S.name})", derivative_order=S.derivative_order)


def hessian(f, metric, h=DEFAULT_H):
    """nabla d f = D D f."""
    return sym_derivative(sym_derivative(f, metric, h), metric, h)


def inner(S, T, metric, xs, ys):
    """Pointwise g-inner product of rank-2 fields."""
    ginv = np.linalg.inv(metric.tensor_many(xs, ys))
    return np.einsum("nac,nbd,nab,ncd->n", ginv, ginv, S.values(xs, ys), T.values(xs, ys))


def trace_decompose(S, metric, point):
    """(S0, S2) with S = S2 + S0 g and tr_g S2 = 0 at ``point``."""
    z = complex(point)
    g = metric.tensor(z)
    s = S(z)
    s0 = float(np.einsum("ij,ij->", np.linalg.inv(g), s)) / 2.0
    return s0, s - s0 * g


def pi_star(S, metric, point, v, tol=1e-10):
    """S_x(v, ..., v) for a g-unit coordinate vector v at ``point``."""
    z = complex(point)
    v = np.asarray(v, dtype=float)
    nrm = metric.norm(z, v)
    if abs(nrm - 1.0) > tol:
        raise ContractViolation(f"vector has g-norm {nrm!r}, expected 1")
    out = S(z)
    for _ in range(S.rank):
        out = out @ v
    return float(out)


def pi_star_many(S, xs, ys, vs):
    """S(v, ..., v) at many points; no normalization check."""
    out = S.values(xs, ys)
    for _ in range(S.rank):
        out = np.einsum("n...i,ni->n...", out, vs)
    return out


# --- curvature operators ---------------------------------------------------

def riemann_endomorphism(metric, xs, ys):
    """R^d_{abc} with R(d_a, d_b) d_c = R^d_{abc} d_d in the convention making R(v) = -Id for g0.

    In dimension 2, R(X, Y) Z = K (g(X, Z) Y - g(Y, Z) X).
    """
    g = metric.tensor_many(xs, ys)
    k = metric.gauss_curvature_many(xs, ys)
    eye = np.eye(2)
    return k[:, None, None, None, None] * (np.einsum("nac,db->nabcd", g, eye) - np.einsum("nbc,da->nabcd", g, eye))


def lichnerowicz(S, metric, h=DEFAULT_H, form="general"):
    """Lichnerowicz Laplacian of a symmetric 2-tensor.

    ``form="general"``: nabla* nabla S + Ric o S + S o Ric - 2 R°(S), with
    R°(S)(X, Y) = -sum_i S(R(e_i, X) Y, e_i) and S o Ric(X, Y) = sum_i S(R(e_i, X) e_i, Y).
    ``form="hyperbolic"``: nabla* nabla S - 2n S + 2 tr(S) g, valid for curvature -1.
    """
    if S.rank != 2:
        raise ValueError("Lichnerowicz Laplacian acts on rank-2 fields")
    rough = rough_laplacian(S, metric, h)
    if form == "hyperbolic":
        def f(xs, ys):
            g = metric.tensor_many(xs, ys)
            s = S.values(xs, ys)
            tr = np.einsum("nij,nij->n", np.linalg.inv(g), s)
            return rough.values(xs, ys) - 4.0 * s + 2.0 * tr[:, None, None] * g
    elif form == "general":
        def f(xs, ys):
            g = metric.tensor_many(xs, ys)
            ginv = np.linalg.inv(g)
            s = S.values(xs, ys)
            # R[n, a, b, c, d] = R^d_{abc}
            R = riemann_endomorphism(metric, xs, ys)
            r_circ = -np.einsum("nab,naxyd,ndb->nxy", ginv, R, s)
            s_ric = np.einsum("nab,naxbd,ndy->nxy", ginv, R, s)
            ric_s = np.transpose(s_ric, (0, 2, 1))
            return rough.values(xs, ys) + ric_s + s_ric - 2.0 * r_circ
    else:
        raise ValueError(f"unknown form {form!r}")
    return SymmetricTensorField(2, f, name=f"lich({S.name})", derivative_order=S.derivative_order - 2)


def operator_R(S, metric, h=DEFAULT_H, trace_hessian_coeff=0.25):
    """R(S) = 1/4 Delta_L S - 1/2 D D* S - c nabla d tr S at the hyperbolic metric.

    c = 1/4 makes R(S) = 1/2 d Ric(S); c = 1/2 is the variant differing by
    the potential tensor D(1/4 d tr S), which has the same X-ray transform.
    """
    if not metric.is_hyperbolic_base:
        raise ContractViolation("operator R is defined at the unperturbed hyperbolic metric only")
    lich = lichnerowicz(S, metric, h)
    ddstar = sym_derivative(divergence(S, metric, h), metric, h)
    hess_tr = hessian(trace(S, metric), metric, h)
    c = float(trace_hessian_coeff)

    def f(xs, ys):
        return 0.25 * lich.values(xs, ys) - 0.5 * ddstar.values(xs, ys) - c * hess_tr.values(xs, ys)
    return SymmetricTensorField(2, f, name=f"R({S.name})", derivative_order=S.derivative_order - 3)


def curvature_variation(S, metric, h=DEFAULT_H):
    """First variation of the Gauss curvature of g + t S at t = 0 (dimension 2 formula).

    dK = 1/2 (D*D* S + Delta tr S) - K/2 tr S, with Delta = -tr nabla d nonnegative.
    """
    ddiv = divergence(divergence(S, metric, h), metric, h)
    tr = trace(S, metric)
    lap = rough_laplacian(tr, metric, h)

    def f(xs, ys):
        k = metric.gauss_curvature_many(xs, ys)
        return 0.5 * (ddiv.values(xs, ys) + lap.values(xs, ys)) - 0.5 * k * tr.values(xs, ys)
    return SymmetricTensorField(0, f, name=f"dK({S.name})", derivative_order=S.derivative_order - 2)
