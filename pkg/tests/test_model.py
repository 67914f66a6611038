import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_lab.bergman import BergmanEvaluator
from bergman_lab.errors import ParameterError, PositivityError
from bergman_lab.geometry import ModelSurface, default_psi, harmonic_weight, residual_grid, zero_weight
from bergman_lab.model import (comparison_grid, diagonal_residual_field, kappa, model_kernel,
                               model_params, near_diagonal_residual)

cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("z", [0j, 1 + 1j, -4j])
def test_params_fs(cp1, zero1, z):
    mp = model_params(cp1, zero1, [z])
    np.testing.assert_allclose(mp.a, [2 * np.pi], rtol=1e-12)


def test_params_family_degeneracy(cp1, fam05):
    mp = model_params(cp1, fam05, [0j])
    assert mp.a[0] == pytest.approx(np.pi, abs=1e-5)
    assert abs(mp.frame[0, 0]) == pytest.approx(np.sqrt(np.pi), rel=1e-12)


def test_params_cp2(cp2):
    mp = model_params(cp2, zero_weight(2), [0, 0])
    np.testing.assert_allclose(mp.a, [2 * np.pi] * 2, rtol=1e-12)


@pytest.mark.parametrize("x0", [[0.3 + 0.2j, -0.1j], [1.0, 0.5 - 0.5j]])
def test_frame_normalizes_metric(cp2, x0):
    w = harmonic_weight(2, 0.1)
    mp = model_params(cp2, w, x0)
    F = mp.frame
    g = 2 * cp2.theta_matrix(np.array(x0))[0]
    np.testing.assert_allclose(F.T @ g @ F.conj(), np.eye(2), atol=1e-10)
    om = g / 2 + w.hessian(np.array(x0))[0] / np.pi
    np.testing.assert_allclose(F.T @ om @ F.conj(), np.diag(mp.a / (2 * np.pi)) / 2, atol=1e-10)
    assert np.all(mp.a >= 2 * np.pi * 0.6 - 1e-9)


def test_params_reject_nonpositive(cp1):
    w = default_psi(1)  # omega vanishes at 0
    with pytest.raises(PositivityError):
        model_params(cp1, w, [0j])


def test_model_kernel_unit_values():
    a = [2 * np.pi]
    assert model_kernel(a, [0j], [0j])[0] == pytest.approx(1.0, abs=1e-12)
    assert model_kernel(a, [0.7 - 2j], [0.7 - 2j])[0] == pytest.approx(1.0, abs=1e-12)
    assert abs(model_kernel(a, [1.0], [0j])[0]) == pytest.approx(np.exp(-np.pi / 2), abs=1e-12)
    assert model_kernel([1.0, 3.0], [[0.1, 0.2]], [[0.1, 0.2]])[0] == pytest.approx(3 / (4 * np.pi**2))


@given(cplx, cplx, st.floats(0.5, 20))
@settings(max_examples=50, deadline=None)
def test_model_kernel_symmetry_and_scaling(z, zp, lam):
    a = np.array([2 * np.pi])
    k = model_kernel(a, [z], [zp])[0]
    assert k == pytest.approx(np.conj(model_kernel(a, [zp], [z])[0]), abs=1e-14)
    s = np.sqrt(lam)
    assert model_kernel(lam * a, [z], [zp])[0] == pytest.approx(
        lam * model_kernel(a, [s * z], [s * zp])[0], rel=1e-9, abs=1e-300)


def test_model_kernel_positive_definite(rng):
    pts = rng.standard_normal((30, 2)) + 1j * rng.standard_normal((30, 2))
    a = [2.0, 5.0]
    K = np.array([[model_kernel(a, [x], [y])[0] for y in pts] for x in pts])
    assert np.linalg.eigvalsh(K)[0] > -1e-10


def test_kappa(cp1, fam05):
    mp = model_params(cp1, fam05, [0.4j])
    assert kappa(mp, [0j])[0] == 1.0
    k = kappa(mp, comparison_grid(1, 0.5))
    assert np.all(k > 0)


@pytest.mark.parametrize("p", [16, 40])
def test_near_diagonal_fs_origin(cp1, zero1, p):
    ev = BergmanEvaluator.build(cp1, zero1, p)
    mp = model_params(cp1, zero1, [0j])
    r = near_diagonal_residual(ev, mp, p, Z=[[0j]])
    assert r.sup == pytest.approx(1 / p, abs=1e-8)


def test_near_diagonal_fs_closed_form(cp1, zero1):
    # p^{-1}|P_p(F Z/sqrt p, 0)| = (p+1)/p (1 + pi|Z|^2/p)^{-p/2}, kappa^{1/2} = (1 + pi|Z|^2/p)^{-1}
    p = 20
    ev = BergmanEvaluator.build(cp1, zero1, p)
    mp = model_params(cp1, zero1, [0j])
    Z = comparison_grid(1)
    r = near_diagonal_residual(ev, mp, p, Z=Z)
    t = 1 + np.pi * np.abs(Z[:, 0]) ** 2 / p
    exact = np.abs((p + 1) / p * t ** (-p / 2) / t - np.exp(-np.pi * np.abs(Z[:, 0]) ** 2 / 2))
    np.testing.assert_allclose(r.residuals, exact, atol=1e-12)


def test_kappa_half_power_sign(cp1, fam05):
    # kappa^{+1/2} beats kappa^{-1/2} away from Z = 0 (both share the diagonal error there)
    p = 64
    ev = BergmanEvaluator.build(cp1, fam05, p)
    mp = model_params(cp1, fam05, [0j])
    Z = comparison_grid(1)
    r = near_diagonal_residual(ev, mp, p, Z=Z)
    x = mp.chart_point(Z / np.sqrt(p))
    pmod = np.abs(ev.kernel_offdiag(x, np.repeat(mp.x0[None, :], len(x), axis=0))) / p
    flipped = np.abs(pmod / np.sqrt(kappa(mp, Z / np.sqrt(p)))
                     - np.abs(model_kernel(mp, Z, np.zeros_like(Z))))
    far = np.abs(Z[:, 0]) >= 1.5
    assert r.residuals[far].max() < 0.5 * flipped[far].max()


def test_near_diagonal_equals_diagonal_at_zero(cp1):
    w = harmonic_weight(1, 0.1)
    x0 = np.array([0.3 + 0.1j])
    ev = BergmanEvaluator.build(cp1, w, 24)
    mp = model_params(cp1, w, x0)
    r = near_diagonal_residual(ev, mp, Z=[[0j]])
    from bergman_lab.geometry import curvature_at
    diag = abs(ev.kernel_diagonal(x0)[0] / 24 - curvature_at(cp1, w, x0).volume_ratio)
    assert r.sup == pytest.approx(diag, abs=1e-12)


def test_near_diagonal_guards(cp1, zero1):
    ev = BergmanEvaluator.build(cp1, zero1, 4)
    mp = model_params(cp1, zero1, [0j])
    with pytest.raises(ParameterError):
        near_diagonal_residual(ev, mp, 4)          # sigma/sqrt(p) > 1
    ev = BergmanEvaluator.build(cp1, zero1, 16)
    with pytest.raises(ParameterError):
        near_diagonal_residual(ev, mp, 16, Z=[[3.5]])


@pytest.mark.parametrize("p", [8, 64])
def test_diagonal_residual_fs(cp1, zero1, p):
    ev = BergmanEvaluator.build(cp1, zero1, p)
    res = diagonal_residual_field(ev, zero1, residual_grid(cp1, 12, 12))
    np.testing.assert_allclose(res.values, 1 / p, atol=1e-8)
    assert res.sup == pytest.approx(1 / p, abs=1e-8)
