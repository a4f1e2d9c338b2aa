"""Upper half-plane model, cocompact Fuchsian groups and their conjugacy classes.

Words are strings over single-letter generator labels: a lowercase letter
is a generator, the matching uppercase letter is its inverse.  The
hyperbolic metric on the half-plane is (dx^2 + dy^2) / y^2.
"""

from dataclasses import dataclass, field
from itertools import product
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigError, NonHyperbolicError, NumericalError

DET_TOL = 1e-12
TRACE_TOL = 1e-10
RELATOR_TOL = 1e-9
MAX_REDUCTION_STEPS = 10_000


def inverse_letter(letter):
    return letter.swapcase()


def inverse_word(word):
    return "".join(inverse_letter(ch) for ch in reversed(word))


def free_reduce(word):
    out = []
    for ch in word:
        if out and out[-1] == inverse_letter(ch):
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def cyclically_reduce(word):
    word = free_reduce(word)
    while len(word) > 1 and word[0] == inverse_letter(word[-1]):
        word = word[1:-1]
    return word


def is_cyclically_reduced(word):
    if not word:
        return False
    n = len(word)
    if n == 1:
        return True
    return all(word[i] != inverse_letter(word[(i + 1) % n]) for i in range(n))


def cosh_distance(z, w):
    """cosh of the hyperbolic distance between half-plane points."""
    return 1.0 + abs(z - w) ** 2 / (2.0 * z.imag * w.imag)


def hyperbolic_distance(z, w):
    return math.acosh(max(cosh_distance(z, w), 1.0))


@dataclass(frozen=True)
class GroupElement:
    """An element of SL(2, R) acting on the half-plane by Mobius maps."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det - 1.0) > DET_TOL * max(1.0, abs(self.a * self.d), abs(self.b * self.c)):
            raise ConfigError(f"matrix has determinant {det!r}, expected 1")

    @classmethod
    def from_matrix(cls, m, normalize=False):
        m = np.asarray(m, dtype=float)
        if normalize:
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            if det <= 0:
                raise ConfigError(f"matrix has non-positive determinant {det!r}")
            m = m / math.sqrt(det)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def trace(self):
        return self.a + self.d

    def kind(self, tol=TRACE_TOL):
        t = abs(self.trace)
        if t > 2.0 + tol:
            return "hyperbolic"
        if t < 2.0 - tol:
            return "elliptic"
        return "parabolic"

    def is_hyperbolic(self, tol=TRACE_TOL):
        return self.kind(tol) == "hyperbolic"

    def inverse(self):
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other):
        a = self.a * other.a + self.b * other.c
        b = self.a * other.b + self.b * other.d
        c = self.c * other.a + self.d * other.c
        d = self.c * other.b + self.d * other.d
        # rounding grows with the factors' norms; project back onto det 1
        s = math.sqrt(a * d - b * c)
        return GroupElement(a / s, b / s, c / s, d / s)

    def __call__(self, z):
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivative(self, z):
        return 1.0 / (self.c * z + self.d) ** 2

    def push_tangent(self, z, theta):
        """Image of the tangent (z, theta) with theta the Euclidean direction angle."""
        w = self.c * z + self.d
        return self(z), theta - 2.0 * math.atan2(w.imag, w.real)

    def close_to(self, other, tol=1e-10):
        """Equality in PSL(2, R)."""
        m, n = self.matrix, other.matrix
        return min(np.abs(m - n).max(), np.abs(m + n).max()) <= tol


@dataclass(frozen=True)
class UnitTangent:
    """Unit tangent vector: base point (x, y) and Euclidean direction angle.

    The vector itself is (cos theta, sin theta) rescaled to unit length for
    whichever metric it is used with.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not self.y > 0:
            raise ConfigError(f"tangent base point must lie in the upper half-plane, got y={self.y}")

    @property
    def z(self):
        return complex(self.x, self.y)

    def pushed(self, elem):
        z, th = elem.push_tangent(self.z, self.theta)
        return UnitTangent(z.real, z.imag, th)

    def reversed(self):
        return UnitTangent(self.x, self.y, self.theta + math.pi)


@dataclass(frozen=True)
class ConjugacyClass:
    """Free homotopy class, stored as its lexicographically least cyclic rotation."""

    word: str

    def __post_init__(self):
        if not is_cyclically_reduced(self.word):
            raise ConfigError(f"word {self.word!r} is not cyclically reduced and nonempty")

    @classmethod
    def from_word(cls, word, order=None):
        word = cyclically_reduce(word)
        if not word:
            raise ConfigError("word reduces to the trivial class")
        return cls(canonical_rotation(word, order))

    def inverse(self, order=None):
        return ConjugacyClass.from_word(inverse_word(self.word), order)

    def __len__(self):
        return len(self.word)

    def __str__(self):
        return self.word


def _letter_key(order):
    if order is None:
        return lambda ch: (ch.lower(), ch.isupper())
    rank = {ch: i for i, ch in enumerate(order)}
    return lambda ch: rank[ch]


def canonical_rotation(word, order=None):
    key = _letter_key(order)
    rotations = [word[i:] + word[:i] for i in range(len(word))]
    return min(rotations, key=lambda w: [key(ch) for ch in w])


@dataclass(frozen=True)
class FuchsianGroup:
    """Cocompact Fuchsian group given by labelled hyperbolic generators."""

    generators: dict
    relator: str | None = None
    dirichlet_center: complex = 1j
    _reduction_set: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for label, g in self.generators.items():
            if len(label) != 1 or not label.islower():
                raise ConfigError("generator labels must be single lowercase letters", path=f"generators.{label}")
            if not g.is_hyperbolic():
                raise NonHyperbolicError(f"generator {label!r} is not hyperbolic (trace {g.trace:.12g})")
        if self.dirichlet_center.imag <= 0:
            raise ConfigError("dirichlet center must lie in the upper half-plane")
        if self.relator:
            bad = set(self.relator.lower()) - set(self.generators)
            if bad:
                raise ConfigError(f"relator uses unknown labels {sorted(bad)}", path="relator")
            m = evaluate_word(self, self.relator)
            if not m.close_to(GroupElement.identity(), RELATOR_TOL):
                raise ConfigError(f"relator {self.relator!r} evaluates to {m.matrix.tolist()}, not +-identity",
                                  path="relator")
        moves = []
        for label, g in self.generators.items():
            moves.append((label, g))
            moves.append((label.upper(), g.inverse()))
        object.__setattr__(self, "_reduction_set", tuple(moves))

    @property
    def letters(self):
        """Alphabet in canonical order: a, A, b, B, ..."""
        return "".join(l + l.upper() for l in self.generators)

    @property
    def rank(self):
        return len(self.generators)

    def letter(self, ch):
        try:
            g = self.generators[ch.lower()]
        except KeyError:
            raise ConfigError(f"unknown generator label {ch!r}") from None
        return g.inverse() if ch.isupper() else g

    def reduction_moves(self):
        return self._reduction_set

    def key(self):
        """Hashable identity of the group data."""
        gens = tuple((k, g.a, g.b, g.c, g.d) for k, g in self.generators.items())
        return gens, self.relator, (self.dirichlet_center.real, self.dirichlet_center.imag)

    def move_array(self):
        """Reduction moves as an (M, 4) float array for compiled code."""
        return np.array([[g.a, g.b, g.c, g.d] for _, g in self._reduction_set], dtype=float)

    def elements(self, max_word_length):
        """Distinct group elements (in PSL(2,R)) given by words of length <= max_word_length.

        Returns a list of (word, GroupElement) with the shortest word kept.
        """
        seen = {}
        out = []
        frontier = [("", GroupElement.identity())]
        for _ in range(max_word_length + 1):
            nxt = []
            for word, g in frontier:
                key = _psl_key(g)
                if key in seen:
                    continue
                seen[key] = True
                out.append((word, g))
                for ch in self.letters:
                    if word and word[-1] == inverse_letter(ch):
                        continue
                    nxt.append((word + ch, g @ self.letter(ch)))
            frontier = nxt
        return out


def _psl_key(g, digits=8):
    m = g.matrix.ravel()
    lead = m[np.argmax(np.abs(m) > 1e-9)]
    if lead < 0:
        m = -m
    return tuple(np.round(m, digits) + 0.0)


def evaluate_word(group, word):
    """Ordered matrix product of the letters of ``word`` (identity for the empty word)."""
    if isinstance(word, ConjugacyClass):
        word = word.word
    m = GroupElement.identity()
    for ch in word:
        m = m @ group.letter(ch)
    return m


def translation_length(elem, tol=TRACE_TOL):
    """Hyperbolic translation length 2 arccosh(|tr|/2) of a hyperbolic element."""
    t = abs(elem.trace)
    if t <= 2.0 + tol:
        raise NonHyperbolicError(f"element with |trace| = {t:.12g} has no translation length")
    return 2.0 * math.acosh(t / 2.0)


def enumerate_classes(group, max_word_length):
    """Nontrivial oriented conjugacy classes of cyclically reduced words up to the given length.

    Each class is listed once (up to cyclic rotation), sorted by (length, word)
    in the alphabet order a < A < b < B < ...
    """
    if max_word_length < 1:
        return []
    order = group.letters
    key = _letter_key(order)
    found = set()
    for n in range(1, max_word_length + 1):
        for letters in product(order, repeat=n):
            word = "".join(letters)
            if is_cyclically_reduced(word):
                found.add(canonical_rotation(word, order))
    words = sorted(found, key=lambda w: (len(w), [key(ch) for ch in w]))
    return [ConjugacyClass(w) for w in words]


def axis_seed(elem):
    """Unit tangent on the translation axis of ``elem``, pointing to its attracting fixed point.

    The base point is the orthogonal projection of i onto the axis.
    """
    translation_length(elem)
    vals, vecs = np.linalg.eig(elem.matrix)
    vals, vecs = vals.real, vecs.real
    order = np.argsort(-np.abs(vals))
    m = vecs[:, order]
    if np.linalg.det(m) < 0:
        m[:, 1] = -m[:, 1]
    conj = GroupElement.from_matrix(m, normalize=True)
    # conj maps 0 -> repelling, oo -> attracting; the model axis is the imaginary axis
    p = conj.inverse()(1j)
    w = 1j * abs(p)
    base = conj(w)
    z, theta = conj.push_tangent(w, math.pi / 2)
    return UnitTangent(base.real, base.imag, theta)


def _domain_violation(z, moves, center):
    """Best generator move lowering the distance to the center, or None."""
    q0 = cosh_distance(z, center)
    best, best_q = None, q0
    for label, g in moves:
        q = cosh_distance(g(z), center)
        if q < best_q - 1e-13 * q0:
            best, best_q = (label, g), q
    return best


def reduce_to_domain(group, point):
    """Move ``point`` into the Dirichlet domain of the group centered at ``dirichlet_center``.

    Returns (reduced point, element g) with g(point) = reduced point.
    """
    z = complex(point)
    if z.imag <= 0:
        raise ConfigError("point must lie in the upper half-plane")
    center = group.dirichlet_center
    moves = group.reduction_moves()
    acc = GroupElement.identity()
    for _ in range(MAX_REDUCTION_STEPS):
        move = _domain_violation(z, moves, center)
        if move is None:
            return z, acc
        _, g = move
        z = g(z)
        acc = g @ acc
    raise NumericalError(f"domain reduction did not terminate after {MAX_REDUCTION_STEPS} steps")


def in_domain(group, point, tol=1e-12):
    z = complex(point)
    q0 = cosh_distance(z, group.dirichlet_center)
    return all(cosh_distance(g(z), group.dirichlet_center) >= q0 * (1 - tol) for _, g in group.reduction_moves())


# --- default surface -------------------------------------------------------

OCTAGON_RELATOR = "aBcDAbCd"


def _disk_to_halfplane(m):
    cayley = np.array([[1j, 1j], [-1.0, 1.0]])
    h = cayley @ m @ np.linalg.inv(cayley)
    h = h / np.sqrt(np.linalg.det(h))
    if abs(h.imag).max() > 1e-12:
        raise NumericalError("Cayley transform produced a non-real matrix")
    return h.real


def octagon_generator_matrices():
    """Side pairings of the regular octagon with interior angles pi/4, in the half-plane.

    Each pairing is a disk translation of length 2 arccosh(1 + sqrt 2) along
    the diameter at angle k pi/4, k = 0..3.
    """
    alpha = 1.0 + math.sqrt(2.0)
    beta = math.sqrt(alpha * alpha - 1.0)
    mats = {}
    for k, label in enumerate("abcd"):
        phase = np.exp(1j * k * math.pi / 4)
        disk = np.array([[alpha, beta * phase], [beta * np.conj(phase), alpha]])
        mats[label] = _disk_to_halfplane(disk)
    return mats


def octagon_group():
    """Genus-2 surface group of the regular octagon, Dirichlet domain centered at i."""
    gens = {k: GroupElement.from_matrix(m, normalize=True) for k, m in octagon_generator_matrices().items()}
    return FuchsianGroup(gens, relator=OCTAGON_RELATOR, dirichlet_center=1j)


# inradius / circumradius of the octagon domain (hyperbolic distance from i)
OCTAGON_INRADIUS = math.acosh(1.0 + math.sqrt(2.0))
OCTAGON_CIRCUMRADIUS = math.acosh((1.0 + math.sqrt(2.0)) ** 2)


# --- polar quadrature over the Dirichlet domain ------------------------------

def polar_point(center, rho, theta):
    """Point at hyperbolic polar coordinates (rho, theta) around ``center``.

    theta is measured in the disk model centered at ``center``; theta = pi/2
    points straight up in the half-plane.
    """
    w = np.tanh(np.asarray(rho) / 2.0) * np.exp(1j * (np.asarray(theta) - np.pi / 2))
    return center.real + center.imag * 1j * (1.0 + w) / (1.0 - w)


def _active_move(group, z):
    c = group.dirichlet_center
    q0 = cosh_distance(z, c)
    gaps = [cosh_distance(g(z), c) - q0 for _, g in group.reduction_moves()]
    return int(np.argmin(gaps)), min(gaps)


def _boundary_radius(group, theta, tol=1e-14):
    c = group.dirichlet_center
    hi = 1.0
    while in_domain(group, complex(polar_point(c, hi, theta)), tol=0.0):
        hi *= 2.0
        if hi > 64:
            raise NumericalError("Dirichlet domain is not bounded in this direction")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if in_domain(group, complex(polar_point(c, mid, theta)), tol=0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DomainGrid:
    """Product Gauss-Legendre rule in hyperbolic polar coordinates over one Dirichlet domain.

    ``weights`` are hyperbolic area weights: sum(weights) is the area of the domain.
    """

    points: np.ndarray
    weights: np.ndarray
    vertex_angles: np.ndarray
    circumradius: float
    inradius: float

    @property
    def area(self):
        return float(self.weights.sum())

    @property
    def xs(self):
        return self.points.real.copy()

    @property
    def ys(self):
        return self.points.imag.copy()


_GRID_CACHE = {}


def domain_grid(group, n_angle=8, n_radius=12, scan=256):
    """Quadrature over the Dirichlet domain in hyperbolic polar coordinates.

    Each side contributes two half-wedges, from its foot of perpendicular to
    its end points, parametrized by arclength along the side.  The rule is
    Gauss-Legendre with ``n_angle`` nodes per half-wedge and ``n_radius``
    radial nodes, so it converges spectrally.
    """
    key = (group.key(), n_angle, n_radius, scan)
    if key in _GRID_CACHE:
        return _GRID_CACHE[key]
    c = group.dirichlet_center
    thetas = np.linspace(0.0, 2 * np.pi, scan, endpoint=False)
    active = [_active_move(group, complex(polar_point(c, _boundary_radius(group, t, 1e-9), t)))[0]
              for t in thetas]
    vertices = []
    for i in range(scan):
        j = (i + 1) % scan
        if active[i] == active[j]:
            continue
        lo, hi = thetas[i], thetas[i] + 2 * np.pi / scan
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            m = _active_move(group, complex(polar_point(c, _boundary_radius(group, mid, 1e-12), mid)))[0]
            if m == active[i]:
                lo = mid
            else:
                hi = mid
        vertices.append(0.5 * (lo + hi) % (2 * np.pi))
    vertices = np.sort(np.array(vertices))
    if len(vertices) < 3:
        raise NumericalError("could not locate the vertices of the Dirichlet domain")
    ga, wa = np.polynomial.legendre.leggauss(n_angle)
    gr, wr = np.polynomial.legendre.leggauss(n_radius)
    pts, wts = [], []
    feet = []
    for k in range(len(vertices)):
        t0 = vertices[k]
        t1 = vertices[(k + 1) % len(vertices)] + (2 * np.pi if k + 1 == len(vertices) else 0.0)
        # each side is a geodesic segment: tanh(rho) cos(theta - tk) = tanh(a)
        res = minimize_scalar(lambda t: _boundary_radius(group, t, 1e-13), bounds=(t0, t1),
                              method="bounded", options={"xatol": 1e-11})
        tk, a = res.x, _boundary_radius(group, res.x)
        feet.append(a)
        # arclength s along the side from the foot: tan(theta - tk) = tanh(s) / sinh(a)
        s0 = np.arctanh(np.sinh(a) * np.tan(t0 - tk))
        s1 = np.arctanh(np.sinh(a) * np.tan(t1 - tk))
        # split at the foot: the integrand has complex poles near s = 0
        nodes = [(0.5 * (lo - hi) * xa + 0.5 * (lo + hi), 0.5 * (hi - lo) * w_)
                 for lo, hi in ((s0, 0.0), (0.0, s1)) for xa, w_ in zip(ga, wa)]
        for s, ws in nodes:
            th = tk + np.arctan(np.tanh(s) / np.sinh(a))
            dth = (1.0 / np.cosh(s) ** 2 / np.sinh(a)) / (1.0 + (np.tanh(s) / np.sinh(a)) ** 2)
            rb = np.arccosh(np.cosh(a) * np.cosh(s))
            rho = 0.5 * rb * (gr + 1.0)
            pts.append(polar_point(c, rho, th))
            wts.append(ws * dth * 0.5 * rb * wr * np.sinh(rho))
    vr = [_boundary_radius(group, t) for t in vertices]
    grid = DomainGrid(np.concatenate(pts), np.concatenate(wts), vertices,
                      float(max(vr)), float(min(feet)))
    _GRID_CACHE[key] = grid
    return grid
