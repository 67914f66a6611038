import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_lab.errors import ParameterError, PositivityError
from bergman_lab.geometry import (ModelSurface, build_family_weight, certification_grid,
                                  certify_semipositive, change_chart, curvature_at,
                                  curvature_field, curvature_on_grid, default_psi,
                                  fd_complex_hessian, harmonic_weight, remainder_check,
                                  residual_grid, taylor_jet, zero_weight)

coord = st.floats(-3, 3, allow_nan=False)


def test_fs_volume(cp1, cp2):
    assert cp1.volume == 1.0
    assert cp2.volume == 0.5


@given(coord, coord)
@settings(max_examples=30, deadline=None)
def test_fs_curvature_is_one(x, y):
    cs = curvature_at(ModelSurface(1), zero_weight(1), [complex(x, y)])
    assert cs.zeta_local == pytest.approx(1.0, abs=1e-12)
    assert cs.volume_ratio == pytest.approx(1.0, abs=1e-12)


def test_family_floor_at_degeneracy(cp1, fam05):
    cs = curvature_at(cp1, fam05, [0j])
    assert cs.zeta_local == pytest.approx(0.5, abs=1e-10)


@given(st.floats(0, 5), st.floats(0, 2 * np.pi), st.floats(0.05, 1.0))
@settings(max_examples=30, deadline=None)
def test_family_ratio_closed_form(r, t, zeta):
    # omega/theta = zeta + 2 (1 - zeta) u on CP^1, u = r^2 / (1 + r^2)
    S = ModelSurface(1)
    w = default_psi(1).scaled(1 - zeta)
    z = r * np.exp(1j * t)
    u = r**2 / (1 + r**2)
    f = curvature_field(S, w, [z])
    assert f.volume_ratio[0] == pytest.approx(zeta + 2 * (1 - zeta) * u, abs=1e-10)


def test_family_cp2_eigenvalues(cp2):
    w = build_family_weight(cp2, 0.5, default_psi(2))
    z = np.array([0.1, 0.2j])
    u = np.sum(np.abs(z) ** 2) / (1 + np.sum(np.abs(z) ** 2))
    ev = curvature_field(cp2, w, z).eigenvalues[0]
    np.testing.assert_allclose(ev, [0.5 + 0.5 * u, 0.5 + u], atol=1e-10)


@pytest.mark.parametrize("weight", [default_psi(1), harmonic_weight(1, 0.1)], ids=["psi", "harm"])
@pytest.mark.parametrize("z", [0.3 + 0.4j, -1.2 + 0.1j, 2.5j])
def test_hessian_matches_finite_differences(weight, z):
    fd = fd_complex_hessian(lambda x: weight.phi(x), [z], 1)
    an = weight.hessian([z])
    np.testing.assert_allclose(an, fd, atol=1e-7)


def test_hessian_cp2_matches_finite_differences(cp2):
    w = harmonic_weight(2, 0.1)
    z = np.array([0.3 - 0.2j, 0.5 + 0.1j])
    np.testing.assert_allclose(w.hessian(z), fd_complex_hessian(lambda x: w.phi(x), z, 2), atol=1e-7)


def test_harmonic_floor_and_max(cp1):
    w = harmonic_weight(1, 0.1)
    f = curvature_on_grid(cp1, w, certification_grid(cp1))
    assert f.zeta_local.min() == pytest.approx(0.6, abs=1e-3)
    assert f.volume_ratio.max() == pytest.approx(1.4, abs=1e-3)


@pytest.mark.parametrize("weight", [default_psi(1), harmonic_weight(1, 0.1)], ids=["psi", "harm"])
def test_weights_are_global_functions(weight):
    z = np.array([[0.7 + 0.2j]])
    w1 = change_chart(z, 0, 1)
    assert weight.phi(z, 0)[0] == pytest.approx(weight.phi(w1, 1)[0], abs=1e-13)


def test_curvature_chart_independent(cp1):
    w = harmonic_weight(1, 0.1)
    z = np.array([[0.7 + 0.2j]])
    a = curvature_field(cp1, w, z, 0).volume_ratio[0]
    b = curvature_field(cp1, w, change_chart(z, 0, 1), 1).volume_ratio[0]
    assert a == pytest.approx(b, abs=1e-12)


def test_residual_grid_dedup(cp1, cp2):
    g = residual_grid(cp1, 5, 6)
    assert len(g) == len({(c, complex(x[0])) for c, x in zip(g.charts, g.coords)})
    assert len(certification_grid(cp1)) >= 10_000
    assert len(residual_grid(cp2, 5, 6)) > 0


def test_certify_rejects_non_psh(cp1):
    with pytest.raises(PositivityError) as exc:
        certify_semipositive(cp1, default_psi(1).scaled(3.0))
    assert exc.value.worst_value < 0
    assert exc.value.worst_point is not None


def test_family_parameter_domain(cp1):
    for z in (0.0, 1.5, -0.1):
        with pytest.raises(ParameterError):
            build_family_weight(cp1, z)


def test_family_at_one_is_flat(cp1):
    w = build_family_weight(cp1, 1.0)
    np.testing.assert_allclose(w.phi([0.3j, 2.0]), 0.0, atol=1e-15)


def test_taylor_jet_reproduces_quadratic():
    w = default_psi(1)
    jet = taylor_jet(w, [0.5])
    Z = np.array([1e-4 + 2e-4j])
    assert abs(w.phi(0.5 + Z)[0] - jet(Z)[0]) < 1e-10


def test_remainder_stable_under_radius_halving():
    w = default_psi(1)
    q1 = remainder_check(w, [0.5], 0.2)
    q2 = remainder_check(w, [0.5], 0.1)
    assert abs(q2 / q1 - 1) < 0.25


def test_remainder_finite_at_symmetric_point():
    # psi is radial: no cubic term at 0, so the quotient shrinks with the radius
    q = remainder_check(default_psi(1), [0.0], 0.2)
    assert np.isfinite(q) and q < 1.0


def test_remainder_radius_guard():
    with pytest.raises(ParameterError):
        remainder_check(default_psi(1), [0.0], 0.9)


def test_derivative_norm_linear_and_report():
    psi = default_psi(1)
    a = psi.derivative_sup_norm(2)
    b = psi.scaled(2.0).derivative_sup_norm(2)
    assert b == pytest.approx(2 * a, rel=1e-12)
    assert psi.norm_report(2) == pytest.approx(1 + a, rel=1e-12)
    assert zero_weight(1).norm_report(3) == 1.0
