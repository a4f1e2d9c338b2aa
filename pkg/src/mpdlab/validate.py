"""Invariant suite run by ``mpdlab validate``: each check reports measured value and bound."""

import math

import numpy as np

from .errors import MPDError


def _check(name, measured, bound, passed=None):
    measured = float(measured)
    ok = bool(measured <= bound) if passed is None else bool(passed)
    return {"name": name, "measured": measured, "bound": bound, "passed": ok}


def _safe(name, fn, results):
    try:
        results.extend(fn())
    except MPDError as exc:
        results.append({"name": name, "measured": None, "bound": None, "passed": False, "error": exc.to_payload()})


def run_invariants(cfg, n_classes=4):
    from . import _kernel as K
    from .fiber import (PointTensor3, SphereQuadrature, corr2_fiber_check, dim3_curvature_derivative,
                        liouville_integral, pi_star_integrand, schouten_curvature_derivative, sm_quadrature,
                        trace_average)
    from .fuchsian import domain_grid, enumerate_classes, evaluate_word, translation_length
    from .geodesics import find_closed_geodesic
    from .metric import check_negative_curvature
    from .spectra import mpd, mpd_routes, xray
    from .tensors import metric_tensor, term_tensor

    num = cfg.numerics
    group = cfg.group
    metric = cfg.metric()
    base = cfg.base_metric()
    classes = enumerate_classes(group, 2)[:n_classes]
    rng = np.random.default_rng(cfg.seed)
    results = []

    def geometry():
        grid = domain_grid(group)
        genus = group.rank // 2
        return [_check("domain area = 4 pi (genus - 1)", abs(grid.area - 4 * math.pi * (genus - 1)), 1e-8),
                _check("negativity margin > 0", check_negative_curvature(metric), 0.0,
                       passed=check_negative_curvature(metric) > 0)]

    def unperturbed():
        worst = 0.0
        for c in classes:
            geo = find_closed_geodesic(base, group, c, step=num["ode_step"])
            ell = translation_length(evaluate_word(group, c))
            worst = max(worst, abs(mpd(base, geo)[0] - ell) / ell)
        return [_check("constant curvature: log_mpd = length", worst, 1e-6)]

    def routes():
        worst, sym, hom_mpd, hom_len, xr = 0.0, 0.0, 0.0, 0.0, 0.0
        g = metric_tensor(metric)
        for c in classes:
            geo = find_closed_geodesic(metric, group, c, step=num["ode_step"])
            a, b = mpd_routes(metric, geo, num["burn_in"])
            worst = max(worst, abs(a - b) / abs(a))
            inv = find_closed_geodesic(metric, group, c.inverse(group.letters), step=num["ode_step"])
            sym = max(sym, abs(mpd(metric, inv)[0] - b) / b)
            scaled = metric.scaled(2.0)
            geo2 = find_closed_geodesic(scaled, group, c, step=num["ode_step"])
            hom_mpd = max(hom_mpd, abs(mpd(scaled, geo2)[0] - b))
            hom_len = max(hom_len, abs(geo2.period / geo.period - math.sqrt(2.0)))
            xr = max(xr, abs(xray(g, geo) - geo.period) / geo.period)
        return [_check("dual-route MPD discrepancy", worst, 1e-6),
                _check("inverse-class symmetry", sym, 1e-6),
                _check("homothety: log_mpd unchanged", hom_mpd, 1e-8),
                _check("homothety: length scales by sqrt 2", hom_len, 1e-8),
                _check("xray(g) = length", xr, 1e-8)]

    def fibers():
        rule = sm_quadrature(metric, 6, 8, 8)
        terms = cfg.tensors or None
        from .metric import Bump, BumpField, TensorTerm
        if terms is None:
            terms = (TensorTerm("hessian", 0.3, BumpField((Bump(complex(-0.3, 0.9), 1.0, 1.0),))),)
        S = term_tensor(terms, group)
        out = [_check("Liouville mass = 1", abs(rule.mass - 1.0), 1e-12),
               _check("fiber identity", abs(liouville_integral(pi_star_integrand(S), rule) - trace_average(S, rule)),
                      1e-6)]
        sph = SphereQuadrature.sphere()
        err = abs(sph.integrate(lambda n: n[:, 0] ** 2 * n[:, 1] ** 2 * n[:, 2] ** 2) - 1 / 105)
        out.append(_check("sphere rule exactness (x^2 y^2 z^2)", err, 1e-12))
        worst, corr = 0.0, 0.0
        for _ in range(20):
            pt = PointTensor3.random_trace_free(rng, float(rng.uniform(-2, 1)))
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            worst = max(worst, np.abs(dim3_curvature_derivative(pt, v)
                                      - schouten_curvature_derivative(pt.S, pt.mu, v)).max())
            lhs, rhs = corr2_fiber_check(pt, pt.mu)
            corr = max(corr, abs(lhs - rhs))
        out.append(_check("dim-3 curvature derivative vs Schouten reconstruction", worst, 1e-12))
        out.append(_check("fiber average of tr(dR^2) vs closed form", corr, 1e-6))
        t = np.linspace(0, 10, 1001)
        ks = np.full(2 * (len(t) - 1) + 1, -1.0)
        u = K.riccati_path(ks, t[1] - t[0], 2.0)
        out.append(_check("Riccati closed form coth(t + artanh 1/2)",
                          np.abs(u - 1 / np.tanh(t + np.arctanh(0.5))).max(), 1e-8))
        return out

    _safe("geometry", geometry, results)
    _safe("unperturbed", unperturbed, results)
    _safe("routes", routes, results)
    _safe("fibers", fibers, results)
    return results
