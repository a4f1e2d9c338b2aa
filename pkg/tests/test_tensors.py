import numpy as np
import pytest

from mpdlab.errors import ContractViolation
from mpdlab.metric import Bump, BumpField, HolomorphicField, MetricField, TensorTerm
from mpdlab.tensors import (bump_scalar, conformal_multiple, covariant_derivative, curvature_variation, divergence,
                            hessian, hyperbolic_metric, inner, lichnerowicz, metric_tensor, operator_R, pi_star,
                            rough_laplacian, scalar_field, sym_derivative, term_tensor, trace, trace_decompose)

XS = np.array([0.1, 0.3, -0.2])
YS = np.array([1.0, 0.7, 1.5])
G0 = hyperbolic_metric()
PHI = BumpField((Bump(0.1 + 1j, 0.8, 0.3),))


def tt_tensor(pole=0.2 + 0.5j):
    return term_tensor([TensorTerm("holomorphic", 1.0, HolomorphicField(pole, 1.0))])


def exact_laplacian(field):
    """Nonnegative Laplacian -y^2 (f_xx + f_yy) of a bump field from its jets."""
    ph, _ = MetricField(None, conformal=field).perturbation_many(XS, YS, 2)
    return -YS ** 2 * 2.0 * (ph[:, 2, 0] + ph[:, 0, 2])


@pytest.mark.parametrize("s", [0.3, 0.5, 2.0])
def test_rough_laplacian_on_power_of_y(s):
    f = scalar_field(lambda x, y: y ** s)
    assert np.allclose(rough_laplacian(f, G0).values(XS, YS), s * (1 - s) * YS ** s, rtol=1e-5)


def test_trace_of_hessian_is_minus_laplacian():
    f = scalar_field(lambda x, y: y ** 0.3 + x * y)
    lap = rough_laplacian(f, G0).values(XS, YS)
    assert np.allclose(trace(hessian(f, G0), G0).values(XS, YS), -lap, atol=1e-5)


def test_metric_is_parallel_to_second_order():
    errs = [np.abs(covariant_derivative(metric_tensor(G0), G0, h).values(XS, YS)).max() for h in (2e-3, 1e-3)]
    assert errs[1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_sym_derivative_of_function_is_differential():
    f = scalar_field(lambda x, y: x ** 2 * y)
    d = sym_derivative(f, G0).values(XS, YS)
    assert np.allclose(d, np.column_stack([2 * XS * YS, XS ** 2]), atol=1e-6)


@pytest.mark.parametrize("pole", [0.2 + 0.5j, -0.4 + 1.3j])
def test_holomorphic_tensor_is_transverse_traceless(pole):
    S = tt_tensor(pole)
    scale = np.abs(S.values(XS, YS)).max()
    assert np.abs(trace(S, G0).values(XS, YS)).max() < 1e-10 * scale
    assert np.abs(divergence(S, G0).values(XS, YS)).max() < 1e-5 * scale


@pytest.mark.parametrize("form", ["general", "hyperbolic"])
def test_tt_eigenvalues(form):
    # rough Laplacian 2 S, hence Lichnerowicz -2 S and R(S) = -S/2 on TT tensors at curvature -1
    S = tt_tensor()
    s = S.values(XS, YS)
    assert np.allclose(rough_laplacian(S, G0).values(XS, YS), 2 * s, rtol=1e-4)
    assert np.allclose(lichnerowicz(S, G0, form=form).values(XS, YS), -2 * s, rtol=1e-4)


def test_operator_R_on_tt_is_minus_half():
    S = tt_tensor()
    assert np.allclose(operator_R(S, G0).values(XS, YS), -0.5 * S.values(XS, YS), rtol=1e-4)


def test_lichnerowicz_forms_agree_on_generic_tensor():
    S = term_tensor([TensorTerm("hessian", 1.0, PHI)]) + tt_tensor()
    a = lichnerowicz(S, G0, form="general").values(XS, YS)
    b = lichnerowicz(S, G0, form="hyperbolic").values(XS, YS)
    assert np.allclose(a, b, atol=1e-8 * np.abs(a).max())


@pytest.mark.parametrize("h", [4e-3, 2e-3])
def test_lichnerowicz_of_conformal_multiple(h):
    # Delta_L (f g0) = (Delta f) g0
    f = bump_scalar(PHI)
    L = lichnerowicz(conformal_multiple(f, G0), G0, h).values(XS, YS)
    expected = exact_laplacian(PHI)[:, None, None] * G0.tensor_many(XS, YS)
    assert np.abs(L - expected).max() < 1e-4 * np.abs(expected).max()


def test_curvature_variation_of_conformal_direction():
    # g_t = exp(2 t phi) g0 has K_t = exp(-2 t phi)(-1 + t Delta phi), so dK = 2 phi + Delta phi
    S = conformal_multiple(bump_scalar(PHI), G0) * 2.0
    phi = bump_scalar(PHI).values(XS, YS)
    expected = 2 * phi + exact_laplacian(PHI)
    assert np.allclose(curvature_variation(S, G0).values(XS, YS), expected, atol=2e-3)


def test_operator_R_is_half_ricci_variation():
    # R(S) = 1/2 dRic(S) = 1/2 (dK g0 + K S) with K = -1
    S = conformal_multiple(bump_scalar(PHI), G0) * 2.0
    dk = 2 * bump_scalar(PHI).values(XS, YS) + exact_laplacian(PHI)
    g = G0.tensor_many(XS, YS)
    expected = 0.5 * (dk[:, None, None] * g - S.values(XS, YS))
    got = operator_R(S, G0).values(XS, YS)
    assert np.abs(got - expected).max() < 5e-3 * np.abs(expected).max()


def test_operator_R_requires_hyperbolic_base(perturbed):
    with pytest.raises(ContractViolation):
        operator_R(tt_tensor(), perturbed)


def test_trace_decomposition():
    S = term_tensor([TensorTerm("hessian", 1.0, PHI)])
    z = XS[0] + 1j * YS[0]
    s0, s2 = trace_decompose(S, G0, z)
    g = G0.tensor(z)
    assert np.einsum("ij,ij->", np.linalg.inv(g), s2) == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(s2 + s0 * g, S(z))


def test_inner_of_metric_is_dimension():
    g = metric_tensor(G0)
    assert np.allclose(inner(g, g, G0, XS, YS), 2.0)


def test_pi_star_checks_unit_length():
    g = metric_tensor(G0)
    z = XS[0] + 1j * YS[0]
    assert pi_star(g, G0, z, [YS[0], 0.0]) == pytest.approx(1.0)
    with pytest.raises(ContractViolation):
        pi_star(g, G0, z, [1.0, 1.0])


def test_field_arithmetic():
    S = tt_tensor()
    T = term_tensor([TensorTerm("hessian", 1.0, PHI)])
    assert np.allclose((S + T - S).values(XS, YS), T.values(XS, YS))
    assert np.allclose((-S * 2.0).values(XS, YS), -2 * S.values(XS, YS))
