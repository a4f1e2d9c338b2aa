import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpdlab.errors import ConfigError, CurvatureSignError
from mpdlab.fuchsian import domain_grid
from mpdlab.metric import (Bump, BumpField, HolomorphicField, MetricField, TensorTerm, check_negative_curvature,
                           curvature)

PTS = np.array([0.1 + 1.0j, -0.3 + 0.7j, 0.25 + 1.6j, 0.0 + 1.2j])


def _conformal_curvature(metric, zs):
    """e^{-2 phi} (-1 - y^2 (phi_xx + phi_yy)) from the jets of phi."""
    ph, _ = metric.perturbation_many(zs.real, zs.imag, 2)
    lap = 2.0 * (ph[:, 2, 0] + ph[:, 0, 2])
    return np.exp(-2.0 * ph[:, 0, 0]) * (-1.0 - zs.imag ** 2 * lap)


def test_unperturbed_curvature_is_minus_one(hyperbolic):
    grid = domain_grid(hyperbolic.group, 8, 12)
    assert np.allclose(hyperbolic.gauss_curvature_many(grid.xs, grid.ys), -1.0, atol=1e-12)


def test_unperturbed_tensor_is_poincare(hyperbolic):
    for z in PTS:
        assert np.allclose(hyperbolic.tensor(z), np.eye(2) / z.imag ** 2, rtol=1e-14)


def test_conformal_curvature_closed_form(perturbed):
    ks = perturbed.gauss_curvature_many(PTS.real, PTS.imag)
    assert np.allclose(ks, _conformal_curvature(perturbed, PTS), atol=1e-10)


def test_general_route_matches_conformal_route(group, bump):
    conf = MetricField(group, conformal=bump)
    gen = MetricField(group, conformal=bump, force_general=True)
    assert np.allclose(conf.gauss_curvature_many(PTS.real, PTS.imag),
                       gen.gauss_curvature_many(PTS.real, PTS.imag), atol=1e-9)


def test_conformal_kind_tensor_equals_conformal_factor(group):
    # g0 + coef * phi g0 with small coef agrees with exp(2 phi') g0 where exp(2 phi') = 1 + coef phi
    field = BumpField((Bump(0.2 + 1.1j, 0.8, 1.0),))
    m = MetricField(group, tensors=(TensorTerm("conformal", 0.05, field),))
    ref = MetricField(group, conformal=field)
    ph, _ = ref.perturbation_many(PTS.real, PTS.imag, 0)
    g = m.tensor_many(PTS.real, PTS.imag)
    expected = (1 + 0.05 * ph[:, 0, 0])[:, None, None] * np.eye(2) / PTS.imag[:, None, None] ** 2
    assert np.allclose(g, expected, rtol=1e-12)


@pytest.mark.parametrize("kind", ["hessian", "tracefree_hessian", "rotated_hessian"])
def test_tensor_perturbations_are_invariant(group, kind):
    field = BumpField((Bump(0.2 + 1.1j, 0.8, 1.0),))
    m = MetricField(group, tensors=(TensorTerm(kind, 1e-3, field),))
    assert m.invariance_defect(PTS[:2]) < 1e-8


def test_holomorphic_perturbation_is_trace_free(group):
    m = MetricField(group, tensors=(TensorTerm("holomorphic", 1.0, HolomorphicField(0.1 + 1.2j)),))
    _, h = m.perturbation_many(PTS.real, PTS.imag, 0)
    assert np.allclose(h[:, 0, 0, 0] + h[:, 2, 0, 0], 0.0, atol=1e-12)


def test_conformal_metric_is_invariant(perturbed):
    assert perturbed.invariance_defect(PTS) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.floats(0.25, 4.0))
def test_homothety_scales_curvature(c):
    from mpdlab.fuchsian import octagon_group
    m = MetricField(octagon_group(), conformal=BumpField((Bump(0.2 + 1.1j, 0.8, 0.05),)))
    k1 = m.gauss_curvature_many(PTS.real, PTS.imag)
    kc = m.scaled(c).gauss_curvature_many(PTS.real, PTS.imag)
    assert np.allclose(kc, k1 / c, rtol=1e-10)


def test_curvature_data_in_dimension_two(perturbed):
    z = PTS[0]
    v = np.array([0.3, -0.2])
    cd = curvature(perturbed, z, v)
    g = perturbed.tensor(z)
    assert cd.scal == pytest.approx(2 * cd.K)
    assert np.allclose(cd.ric, cd.K * g)
    assert cd.ric_v == pytest.approx(cd.K * v @ g @ v)


def test_curvature_rejects_lower_half_plane(perturbed):
    with pytest.raises(ConfigError):
        curvature(perturbed, 0.1 - 1j)


def test_negativity_margin(hyperbolic, perturbed):
    assert check_negative_curvature(hyperbolic) == pytest.approx(1.0)
    assert 0.05 < check_negative_curvature(perturbed) < 1.5


def test_negativity_failure_reports_points(group):
    m = MetricField(group, conformal=BumpField((Bump(0.2 + 1.1j, 0.8, 3.0),)))
    with pytest.raises(CurvatureSignError) as info:
        check_negative_curvature(m)
    payload = info.value.to_payload()
    assert payload["kind"] == "curvature-sign"
    assert payload["points"] and all(len(p) == 2 for p in payload["points"])
    assert max(payload["values"]) > -0.05


@pytest.mark.parametrize("bad", [dict(center=0.1 - 1j, radius=1.0), dict(center=1j, radius=0.0)])
def test_bump_validation(bad):
    with pytest.raises(ConfigError):
        Bump(amplitude=1.0, **bad)


def test_holomorphic_term_needs_holomorphic_field():
    with pytest.raises(ConfigError):
        TensorTerm("holomorphic", 1.0, BumpField(()))
    with pytest.raises(ConfigError):
        TensorTerm("nonsense", 1.0, BumpField(()))


def test_bump_support_radius():
    # outside the geodesic ball the bump field vanishes exactly
    m = MetricField(None, conformal=BumpField((Bump(1j, 0.5, 1.0),)))
    inside = 1j * math.exp(0.49)
    outside = 1j * math.exp(0.51)
    ph, _ = m.perturbation_many(np.array([0.0, 0.0]), np.array([inside.imag, outside.imag]), 0)
    assert ph[0, 0, 0] > 0
    assert ph[1, 0, 0] == 0.0
