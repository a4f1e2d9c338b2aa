"""Per-class spectral invariants, X-ray transforms and first-derivative checks.

For a class c with closed geodesic gamma of period T, the log marked
Poincare determinant is computed by two routes:

* route A, log sigma_u of the Jacobi monodromy over one period;
* route B, the integral over one period of the periodic positive Riccati solution u.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .errors import InconsistencyError, MPDError
from .fuchsian import enumerate_classes
from .geodesics import (DEFAULT_BURN_IN, DEFAULT_STEP, find_closed_geodesic, monodromy,
                        periodic_riccati_integral, riccati_unstable)
from .tensors import operator_R, pi_star_many

INCONSISTENCY_TOL = 1e-4


@dataclass(frozen=True)
class SpectrumEntry:
    word: str
    length: float
    log_mpd: float
    lambda_: float
    route_discrepancy: float

    def to_dict(self):
        return {"word": self.word, "length": self.length, "log_mpd": self.log_mpd,
                "lambda": self.lambda_, "route_discrepancy": self.route_discrepancy}


@dataclass(frozen=True)
class DerivativeReport:
    """Finite-difference value of a first derivative next to the closed formula."""

    word: str
    fd_value: float
    formula_value: float
    step: float
    relative_error: float
    fd_values: tuple = ()
    steps: tuple = ()
    richardson: float | None = None

    def to_dict(self):
        out = asdict(self)
        out["fd_values"] = list(self.fd_values)
        out["steps"] = list(self.steps)
        return out


class Spectrum(list):
    """List of SpectrumEntry; ``failures`` maps words to error payloads."""

    def __init__(self, entries=(), failures=None):
        super().__init__(entries)
        self.failures = dict(failures or {})

    def to_dicts(self):
        return [e.to_dict() for e in self]


def mpd_routes(metric, geo, burn_in=DEFAULT_BURN_IN):
    """(route A, route B) for the log Poincare determinant along ``geo``."""
    a = monodromy(metric, geo).log_sigma_u
    trace = riccati_unstable(metric, geo, burn_in)
    b = periodic_riccati_integral(trace.u, geo.step)
    return a, b


def mpd(metric, geo, burn_in=DEFAULT_BURN_IN, tol=INCONSISTENCY_TOL):
    """(log_mpd, route_discrepancy): the Riccati route and its relative gap to the monodromy route."""
    a, b = mpd_routes(metric, geo, burn_in)
    disc = abs(a - b) / abs(a)
    if disc > tol:
        raise InconsistencyError(f"MPD routes disagree: monodromy {a:.12g} vs Riccati {b:.12g}")
    return b, disc


def spectrum_entry(metric, group, cls, step=DEFAULT_STEP, burn_in=DEFAULT_BURN_IN):
    geo = find_closed_geodesic(metric, group, cls, step=step)
    log_mpd, disc = mpd(metric, geo, burn_in)
    return SpectrumEntry(str(cls), geo.period, log_mpd, log_mpd / geo.period, disc), geo


def spectrum(metric, group, max_word_length, step=DEFAULT_STEP, burn_in=DEFAULT_BURN_IN, classes=None):
    """One entry per enumerated class, in enumeration order; failures are collected."""
    if classes is None:
        classes = enumerate_classes(group, max_word_length) if max_word_length >= 1 else []
    entries, failures = [], {}
    for cls in classes:
        try:
            entry, _ = spectrum_entry(metric, group, cls, step, burn_in)
            entries.append(entry)
        except MPDError as exc:
            failures[str(cls)] = exc.to_payload()
    return Spectrum(entries, failures)


def xray(S, geo, stride=1):
    """Integral of pi_2^* S along one period of ``geo`` by the periodic trapezoid rule."""
    traj = geo.trajectory
    n = len(traj.times) - 1
    if n % stride:
        raise ValueError(f"stride {stride} does not divide the {n} orbit steps")
    st = traj.states[::stride]
    vals = pi_star_many(S, st[:, 0], st[:, 1], st[:, 2:4])
    h = traj.step * stride
    return float(h * (np.sum(vals[:-1]) + 0.5 * (vals[-1] - vals[0])))


def _stride_for(geo, target):
    n = len(geo.trajectory.times) - 1
    want = max(1, int(round(target / geo.step)))
    for s in range(want, 0, -1):
        if n % s == 0:
            return s
    return 1


class MetricFamily:
    """One-parameter family g_lam with tangent S = d/dlam g_lam at lam = 0.

    ``conformal(metric, phi)``: e^{2 lam phi} g, tangent 2 phi g.
    ``linear(metric, terms)``: g + lam h with h = sum of tensor terms, tangent h.
    """

    def __init__(self, at, tangent, kind):
        self._at = at
        self.tangent = tangent
        self.kind = kind

    def at(self, lam):
        return self._at(lam)

    @classmethod
    def conformal(cls, metric, phi):
        from .tensors import bump_scalar, conformal_multiple
        if metric.conformal is not None:
            raise ValueError("conformal family needs a metric without conformal part")
        S = conformal_multiple(bump_scalar(phi, metric.group), metric) * 2.0
        return cls(lambda lam: metric.with_conformal(phi.scaled(lam)), S, "conformal")

    @classmethod
    def linear(cls, metric, terms):
        from .metric import TensorTerm
        from .tensors import term_tensor
        S = term_tensor(terms, metric.group)
        return cls(lambda lam: metric.with_tensors(
            tuple(metric.tensors) + tuple(TensorTerm(t.kind, lam * t.coef, t.field) for t in terms)),
            S, "linear")


def _central(fn, h):
    return (fn(h) - fn(-h)) / (2 * h)


def _report(word, fds, steps, formula):
    rich = (4 * fds[-1] - fds[-2]) / 3 if len(fds) >= 2 and steps[-2] == 2 * steps[-1] else None
    best = fds[-1]
    scale = abs(formula) if formula != 0 else 1.0
    return DerivativeReport(word, best, formula, steps[-1], abs(best - formula) / scale,
                            tuple(fds), tuple(steps), rich)


def length_derivative_check(family, group, cls, steps=(1e-2, 5e-3), step=DEFAULT_STEP, xray_stride=None):
    """Central FD of the length of the closed geodesic vs 1/2 xray(S, gamma_0)."""
    base = family.at(0.0)
    geo0 = find_closed_geodesic(base, group, cls, step=step)
    stride = xray_stride or _stride_for(geo0, 1e-2)
    formula = 0.5 * xray(family.tangent, geo0, stride)
    fds = []
    for hstep in steps:
        fds.append(_central(lambda lam: find_closed_geodesic(family.at(lam), group, cls, step=step).period, hstep))
    return _report(str(cls), fds, list(steps), formula)


def log_mpd_value(metric, group, cls, step=DEFAULT_STEP, burn_in=DEFAULT_BURN_IN):
    geo = find_closed_geodesic(metric, group, cls, step=step)
    return mpd(metric, geo, burn_in)[0]


def mpd_derivative_check(family, group, cls, steps=(1e-2, 5e-3), step=DEFAULT_STEP,
                         burn_in=DEFAULT_BURN_IN, fd_h=1e-3, xray_stride=None, trace_hessian_coeff=0.25):
    """Central FD of Phi_lam(c) = D_lam(c) / D_0(c) vs xray(R(S), gamma_0) / D_0(c)."""
    base = family.at(0.0)
    geo0 = find_closed_geodesic(base, group, cls, step=step)
    d0 = mpd(base, geo0, burn_in)[0]
    stride = xray_stride or _stride_for(geo0, 1e-2)
    rs = operator_R(family.tangent, base, fd_h, trace_hessian_coeff)
    formula = xray(rs, geo0, stride) / d0
    fds = []
    for hstep in steps:
        fds.append(_central(lambda lam: log_mpd_value(family.at(lam), group, cls, step, burn_in) / d0, hstep))
    return _report(str(cls), fds, list(steps), formula)
