"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary.

Every criterion is implemented as stated.  Where a stated identity does not
hold, the test fails and its line also reports the corrected quantity.
"""

import math
import time

import numpy as np
import pytest

from mpdlab.fiber import (PointTensor3, corr2_fiber_check, dim3_curvature_derivative, kappa_hessian_check,
                          kappa_hessian_dim3, liouville_entropy, liouville_integral, mean_root_curvature,
                          pi_star_integrand, schouten_curvature_derivative, sm_quadrature, trace_average)
from mpdlab.fuchsian import ConjugacyClass, enumerate_classes, evaluate_word, polar_point
from mpdlab.geodesics import find_closed_geodesic, riccati_solution
from mpdlab.metric import Bump, BumpField, HolomorphicField, MetricField, TensorTerm
from mpdlab.spectra import MetricFamily, mpd, mpd_derivative_check, spectrum, xray
from mpdlab.tensors import (conformal_multiple, divergence, lichnerowicz, operator_R, rough_laplacian,
                            scalar_field, sym_derivative, term_tensor, trace)

PERTURBATION = BumpField((Bump(0.2 + 1.1j, 1.2, 0.05),))


def random_bump(rng, radius=(0.8, 1.5), amplitude=1.0):
    z = complex(polar_point(1j, rng.uniform(0.0, 1.5), rng.uniform(0, 2 * np.pi)))
    return Bump(z, rng.uniform(*radius), amplitude)


def free_length(group, cls):
    return 2 * math.acosh(abs(evaluate_word(group, cls).trace) / 2)


def test_constant_curvature_mpd_identity(group, hyperbolic, record_criterion):
    t0 = time.perf_counter()
    classes = enumerate_classes(group, 3)
    sp = spectrum(hyperbolic, group, 3, classes=classes)
    errs = [abs(e.log_mpd - free_length(group, c)) / free_length(group, c) for e, c in zip(sp, classes)]
    runtime = time.perf_counter() - t0
    ok = len(sp) == len(classes) >= 20 and not sp.failures and max(errs) <= 1e-6 and runtime <= 60
    assert record_criterion(1, "log MPD equals length at curvature -1", ok,
                            f"{len(sp)} classes, max rel err {max(errs):.2e} (bound 1e-6), {runtime:.0f} s")


def test_dual_route_mpd(group, record_criterion):
    t0 = time.perf_counter()
    metric = MetricField(group, conformal=PERTURBATION)
    sp = spectrum(metric, group, 3)
    worst = max(e.route_discrepancy for e in sp)
    runtime = time.perf_counter() - t0
    n = len(enumerate_classes(group, 3))
    ok = len(sp) == n and not sp.failures and worst <= 1e-6 and runtime <= 300
    assert record_criterion(2, "monodromy and Riccati routes agree", ok,
                            f"{len(sp)}/{n} classes, max discrepancy {worst:.2e} (bound 1e-6), {runtime:.0f} s")


def test_riccati_closed_forms(record_criterion):
    t, u = riccati_solution(-1.0, 1e-3, 2.0, 10.0)
    coth = np.abs(u - 1 / np.tanh(t + math.atanh(0.5))).max()
    fixed = max(np.abs(riccati_solution(k, 1e-3, math.sqrt(-k), 10.0)[1] - math.sqrt(-k)).max() for k in (-1.0, -4.0))
    ok = coth <= 1e-8 and fixed <= 1e-10
    assert record_criterion(3, "Riccati closed forms", ok,
                            f"coth sup err {coth:.2e} (bound 1e-8), fixed-point err {fixed:.2e} (bound 1e-10)")


def test_homothety_invariance(group, record_criterion):
    metric = MetricField(group, conformal=PERTURBATION)
    scaled = metric.scaled(2.0)
    len_err = mpd_err = 0.0
    classes = enumerate_classes(group, 2)
    for cls in classes:
        g1 = find_closed_geodesic(metric, group, cls)
        g2 = find_closed_geodesic(scaled, group, cls)
        len_err = max(len_err, abs(g2.period / g1.period - math.sqrt(2)) / math.sqrt(2))
        mpd_err = max(mpd_err, abs(mpd(scaled, g2)[0] - mpd(metric, g1)[0]))
    ok = len_err <= 1e-8 and mpd_err <= 1e-8
    assert record_criterion(4, "homothety c = 2", ok,
                            f"{len(classes)} classes, length ratio err {len_err:.2e} (bound 1e-8), "
                            f"log MPD change {mpd_err:.2e} (bound 1e-8)")


def test_xray_vanishes_on_potentials(group, hyperbolic, record_criterion):
    rng = np.random.default_rng(5)
    pool = enumerate_classes(group, 3)
    classes = [pool[i] for i in rng.choice(len(pool), 10, replace=False)]
    geos = [find_closed_geodesic(hyperbolic, group, c) for c in classes]
    worst = 0.0
    for _ in range(3):
        terms = [TensorTerm(str(rng.choice(["hessian", "rotated_hessian"])), float(rng.normal()),
                            BumpField((random_bump(rng),))) for _ in range(2)]
        S = term_tensor(terms, group)
        worst = max(worst, max(abs(xray(S, g)) / g.period for g in geos))
    ok = worst <= 1e-6
    assert record_criterion(5, "X-ray vanishes on potential tensors", ok,
                            f"3 tensors x 10 classes, max |xray|/length {worst:.2e} (bound 1e-6)")


def test_fiber_identity(group, record_criterion):
    rng = np.random.default_rng(6)
    metric = MetricField(group, conformal=PERTURBATION)
    rule = sm_quadrature(metric, 8, 12, 8)
    kinds = ["conformal", "hessian", "tracefree_hessian", "rotated_hessian"]
    worst = 0.0
    for _ in range(5):
        terms = [TensorTerm(str(rng.choice(kinds)), float(rng.normal()), BumpField((random_bump(rng),)))]
        terms.append(TensorTerm("holomorphic", float(rng.normal()),
                                HolomorphicField(complex(polar_point(1j, rng.uniform(0, 1), rng.uniform(0, 6))))))
        S = term_tensor(terms, group)
        worst = max(worst, abs(liouville_integral(pi_star_integrand(S), rule) - trace_average(S, rule)))
    ok = worst <= 1e-6
    assert record_criterion(6, "Liouville average of S(v, v) equals trace average", ok,
                            f"5 random fields, max abs diff {worst:.2e} (bound 1e-6)")


def test_lichnerowicz_identities(record_criterion):
    m0 = MetricField(None)
    rng = np.random.default_rng(7)
    xs, ys = rng.uniform(-0.4, 0.6, 12), rng.uniform(0.8, 1.6, 12)
    steps = (4e-3, 2e-3, 1e-3)
    # (a) Delta_L (f g0) = (Delta f) g0 with Delta f from exact jets
    phi = BumpField((Bump(0.1 + 1.1j, 0.8, 1.0),))
    ph, _ = MetricField(None, conformal=phi).perturbation_many(xs, ys, 2)
    exact = (-ys ** 2 * 2 * (ph[:, 2, 0] + ph[:, 0, 2]))[:, None, None] * m0.tensor_many(xs, ys)
    f = scalar_field(lambda x, y: MetricField(None, conformal=phi).perturbation_many(x, y, 0)[0][:, 0, 0])
    ea = [np.abs(lichnerowicz(conformal_multiple(f, m0), m0, h).values(xs, ys) - exact).max()
          / np.abs(exact).max() for h in steps]
    ok_a = ea[-1] <= 1e-4 and all(3.0 < ea[i] / ea[i + 1] < 5.0 for i in range(2))
    # (b) Delta_L S = 2 S on TT tensors
    stated, corrected = [], []
    for pole in (0.2 + 0.5j, -0.4 + 1.3j, 0.6 + 0.9j):
        S = term_tensor([TensorTerm("holomorphic", 1.0, HolomorphicField(pole))])
        s = S.values(xs, ys)
        sc = np.abs(s).max()
        L = [lichnerowicz(S, m0, h).values(xs, ys) for h in steps]
        stated.append([np.abs(x - 2 * s).max() / sc for x in L])
        corrected.append([np.abs(x + 2 * s).max() / sc for x in L])
    st = np.max(stated, axis=0)
    co = np.max(corrected, axis=0)
    ok_b = st[-1] <= 1e-4 and all(st[i] / st[i + 1] > 3.0 for i in range(2))
    ok = ok_a and ok_b
    detail = (f"(a) rel err {ea[0]:.1e}, {ea[1]:.1e}, {ea[2]:.1e} over h = 4e-3, 2e-3, 1e-3; "
              f"(b) |Delta_L S - 2S|/|S| = {st[0]:.3f}, {st[1]:.3f}, {st[2]:.3f} (no decay); "
              f"corrected |Delta_L S + 2S|/|S| = {co[0]:.1e}, {co[1]:.1e}, {co[2]:.1e}")
    assert record_criterion(7, "Lichnerowicz identities", ok, detail)


def test_R_of_divergence_free_tensor(record_criterion):
    m0 = MetricField(None)
    rng = np.random.default_rng(8)
    xs, ys = rng.uniform(-0.4, 0.6, 12), rng.uniform(0.8, 1.6, 12)
    h = 1e-3

    def sup(T):
        return np.abs(T.values(xs, ys)).max()

    # calibrate C on TT tensors, where R(S) = -S/2 is divergence-free
    ratios = []
    for pole in (0.2 + 0.5j, -0.4 + 1.3j):
        S = term_tensor([TensorTerm("holomorphic", 1.0, HolomorphicField(pole))])
        r = sup(divergence(S, m0, h)) / sup(S)
        ratios.append(sup(divergence(operator_R(S, m0, h), m0, h)) / sup(S) / (r + h * h))
    C = 10 * max(ratios)
    rows, corrected, ok = [], [], True
    for _ in range(3):
        field = BumpField((Bump(complex(rng.uniform(0.0, 0.4), rng.uniform(1.0, 1.3)), 2.4, 1.0),))
        jets = MetricField(None, conformal=field)

        def lap_plus_psi(x, y, jets=jets):
            ph, _ = jets.perturbation_many(x, y, 2)
            return -y ** 2 * 2 * (ph[:, 2, 0] + ph[:, 0, 2]) + ph[:, 0, 0]

        # D*(nabla d psi) = d Delta psi + d psi at curvature -1, so S is divergence-free
        S = conformal_multiple(scalar_field(lap_plus_psi), m0) + term_tensor([TensorTerm("hessian", 1.0, field)])
        scale = sup(S)
        r = sup(divergence(S, m0, h)) / scale
        lhs = sup(divergence(operator_R(S, m0, h), m0, h)) / scale
        bound = C * (r + h * h)
        ok = ok and lhs <= bound
        rows.append(f"|D*R(S)| {lhs:.2e} vs C(r + h^2) = {C:.1f} x ({r:.1e} + {h * h:.0e}) = {bound:.1e}")
        trS = trace(S, m0)
        fix = sym_derivative(rough_laplacian(trS, m0, h) + trS, m0, h)
        diff = divergence(operator_R(S, m0, h), m0, h).values(xs, ys) + 0.25 * fix.values(xs, ys)
        corrected.append(np.abs(diff).max() / scale)
    detail = "; ".join(rows) + f"; corrected D*R(S) = -1/4 d(Delta tr S + tr S): residual {max(corrected):.1e}"
    assert record_criterion(8, "R preserves divergence-free tensors", ok, detail)


def test_mpd_first_derivative(group, hyperbolic, record_criterion):
    t0 = time.perf_counter()
    fam = MetricFamily.conformal(hyperbolic, BumpField((Bump(0.2 + 1.1j, 0.8, 1.0),)))
    # classes whose geodesics cross the bump support
    words = ["a", "ab", "ac", "aC", "aD"]
    rows, ok, corrected = [], True, 0.0
    for w in words:
        rep = mpd_derivative_check(fam, group, ConjugacyClass.from_word(w), steps=(1e-2, 5e-3))
        errs = [abs(v - rep.formula_value) / abs(rep.formula_value) for v in rep.fd_values]
        ok = ok and errs[-1] <= 5e-2 and errs[-1] <= errs[0]
        corrected = max(corrected, abs(rep.richardson + rep.formula_value) / abs(rep.formula_value))
        rows.append(f"{w}: rel err {errs[0]:.3f} -> {errs[-1]:.3f}")
    gauge = []
    for kind in ("hessian", "rotated_hessian"):
        g_fam = MetricFamily.linear(hyperbolic, (TensorTerm(kind, 1.0, BumpField((Bump(0.2 + 1.1j, 0.8, 1.0),))),))
        for w in ("a", "ab"):
            rep = mpd_derivative_check(g_fam, group, ConjugacyClass.from_word(w), steps=(2e-3, 1e-3))
            gauge.append(abs(rep.richardson))
    ok = ok and max(gauge) <= 1e-4
    runtime = time.perf_counter() - t0
    ok = ok and runtime <= 900
    detail = (", ".join(rows) + f" (bound 5e-2); gauge |FD| {max(gauge):.1e} (bound 1e-4); "
              f"Richardson FD vs minus formula rel err {corrected:.1e}; {runtime:.0f} s")
    assert record_criterion(9, "first derivative of the normalized MPD", ok, detail)


def test_dimension_three_identities(record_criterion):
    rng = np.random.default_rng(10)
    lemma = 0.0
    for _ in range(100):
        mu = rng.uniform(-3, 3)
        pt = PointTensor3.random_trace_free(rng, mu)
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        diff = dim3_curvature_derivative(pt, v) - schouten_curvature_derivative(pt.S, mu, v)
        lemma = max(lemma, np.abs(diff).max() / max(1.0, np.abs(pt.S).max()))
    fiber = 0.0
    for mu in (-1.5, 0.0, 1.0):
        for _ in range(5):
            lhs, rhs = corr2_fiber_check(PointTensor3.random_trace_free(rng, mu), mu)
            fiber = max(fiber, abs(lhs - rhs) / abs(rhs))
    combo = 0.0
    for _ in range(5):
        val, p2 = kappa_hessian_dim3(PointTensor3.random_trace_free(rng, 0.0), 0.0)
        combo = max(combo, abs(val - p2) / p2)
    ok = lemma <= 1e-12 and fiber <= 1e-6 and combo <= 1e-6
    assert record_criterion(10, "dimension-3 pointwise identities", ok,
                            f"curvature derivative vs Kulkarni-Nomizu {lemma:.1e} (bound 1e-12), "
                            f"fiber average {fiber:.1e} (bound 1e-6), mu = 0 combination {combo:.1e} (bound 1e-6)")


def test_entropy_dominates_mean_root_curvature(group, hyperbolic, record_criterion):
    t0 = time.perf_counter()
    rule0 = sm_quadrature(hyperbolic, 4, 6, 4)
    k0 = mean_root_curvature(hyperbolic, rule0)
    e0 = liouville_entropy(hyperbolic, rule0)
    ok = max(abs(k0 - 1), abs(e0.space - 1), abs(e0.time - 1)) <= 1e-3
    rows = [f"unperturbed kappa {k0:.6f}, h {e0.space:.6f} / {e0.time:.6f}"]
    specs = [((0.2 + 1.1j, 1.2, 0.05),), ((-0.3 + 0.9j, 1.5, -0.05),),
             ((0.2 + 1.1j, 1.2, 0.04), (0.5 + 1.6j, 1.3, -0.03))]
    for spec in specs:
        m = MetricField(group, conformal=BumpField(tuple(Bump(*b) for b in spec)))
        rule = sm_quadrature(m, 8, 12, 8)
        k = mean_root_curvature(m, rule)
        e = liouville_entropy(m, rule)
        ok = ok and k <= e.space + 2e-3
        rows.append(f"kappa {k:.5f} <= h {e.space:.5f} (orbit {e.time:.5f})")
    runtime = time.perf_counter() - t0
    ok = ok and runtime <= 600
    assert record_criterion(11, "entropy versus mean root curvature", ok, "; ".join(rows) + f"; {runtime:.0f} s")


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_kappa_second_variation(hyperbolic, record_criterion):
    t0 = time.perf_counter()
    terms = (TensorTerm("tracefree_hessian", 1e-3, BumpField((Bump(0.2 + 1.1j, 2.4, 1.0),))),)
    tt = (TensorTerm("holomorphic", 0.05, HolomorphicField(0.1 + 1.2j)),)
    rep = kappa_hessian_check(hyperbolic, terms, 16, 24, 8, (4e-2, 2e-2), tt_terms=tt)
    sub = rep.scalar_check
    runtime = time.perf_counter() - t0
    if rep.inconclusive:
        detail = f"INCONCLUSIVE: noise {rep.noise:.2e} exceeds formula {rep.formula_value:.2e}"
        ok = False
    else:
        ok = rep.relative_error <= 0.1 and sub["relative_error"] <= 5e-2 and runtime <= 1800
        detail = (f"FD {rep.fd_value:.5e} vs four-term sum {rep.formula_value:.5e}, rel err "
                  f"{rep.relative_error:.1e} (bound 0.1), noise {rep.noise:.1e}; scalar-curvature term "
                  f"FD {sub['fd_value']:.2e} vs {sub['formula_value']:.2e}, err/<S,S> "
                  f"{sub['relative_error']:.1e} (bound 5e-2); {runtime:.0f} s")
    assert record_criterion(12, "second variation of kappa", ok, detail)
