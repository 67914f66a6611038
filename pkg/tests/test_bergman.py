import math

import numpy as np
import pytest

from bergman_lab import bergman as B
from bergman_lab.bergman import (BergmanEvaluator, gram, kernel_diagonal, kernel_on_grid,
                                 orthonormalize)
from bergman_lab.errors import FactorizationError, ParameterError, PrecisionEscalation
from bergman_lab.geometry import (ModelSurface, change_chart, default_psi, harmonic_weight,
                                  residual_grid, zero_weight)
from bergman_lab.quadrature import build_rule, integrate
from bergman_lab.sections import basis_for


@pytest.mark.parametrize("p", [1, 5, 40])
def test_fs_diagonal_exact(cp1, zero1, p):
    ev = BergmanEvaluator.build(cp1, zero1, p)
    z = np.array([0, 0.1 - 3j, 17.0, 1e-3j])
    np.testing.assert_allclose(ev.kernel_diagonal(z), p + 1, atol=1e-9)
    np.testing.assert_allclose(kernel_diagonal(ev, zero1, z, chart=1), p + 1, atol=1e-9)


def test_fs_diagonal_cp2(cp2):
    ev = BergmanEvaluator.build(cp2, zero_weight(2), 6)
    z = np.array([[0, 0], [0.3 + 1j, -2.0], [5.0, 0.1j]])
    np.testing.assert_allclose(ev.kernel_diagonal(z), 7 * 8, atol=1e-9)


@pytest.mark.parametrize("weight", [default_psi(1), harmonic_weight(1, 0.1)], ids=["psi", "harm"])
def test_gram_hermitian_pd(cp1, weight):
    b = basis_for(cp1, 12)
    G = gram(b, weight, build_rule(cp1, 12))
    np.testing.assert_allclose(G.scaled, G.scaled.conj().T, atol=0)
    np.testing.assert_allclose(np.diag(G.scaled).real, 1.0, atol=1e-14)
    assert np.linalg.eigvalsh(G.scaled)[0] > 0


@pytest.mark.parametrize("n,p", [(1, 16), (2, 6)])
def test_torus_route_matches_node_sums(n, p):
    S = ModelSurface(n)
    w = harmonic_weight(n, 0.1)
    b, r = basis_for(S, p), build_rule(S, p)
    G1, l1 = B._gram_torus(b, w, r)
    G2, l2 = B._gram_nodes(b, w, r)
    E1 = np.exp(l1)[:, None] * G1 * np.exp(l1)[None, :]
    E2 = np.exp(l2)[:, None] * G2 * np.exp(l2)[None, :]
    assert np.abs(E1 - E2).max() <= 1e-13 * np.abs(E2).max()


def test_gram_against_direct_integral(cp1):
    # entry (j, k) as an independent weighted integral
    w = harmonic_weight(1, 0.1)
    p = 6
    b, r = basis_for(cp1, p), build_rule(cp1, p)
    G = gram(b, w, r).entries
    z = r.nodes[:, 0]
    h = np.exp(-2 * p * w.phi(r.nodes)) * (1 + np.abs(z) ** 2) ** (-p)
    for j, k in [(0, 0), (1, 3), (6, 2)]:
        f = b.precond[j] * b.precond[k] * np.conj(z**j) * z**k * h
        assert integrate(r, f) == pytest.approx(G[j, k], rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("weight", [default_psi(1), harmonic_weight(1, 0.1)], ids=["psi", "harm"])
def test_extremal_equals_sum(cp1, rng, weight):
    ev = BergmanEvaluator.build(cp1, weight, 24)
    z = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    a, b = ev.kernel_diagonal(z), ev.kernel_diagonal_extremal(z)
    np.testing.assert_allclose(a, b, rtol=1e-8)


@pytest.mark.parametrize("n,p", [(1, 20), (2, 5)])
def test_trace_identity(n, p):
    S = ModelSurface(n)
    w = harmonic_weight(n, 0.1)
    ev = BergmanEvaluator.build(S, w, p)
    rule = build_rule(S, p + 6)
    tr = integrate(rule, ev.kernel_diagonal(rule.nodes))
    assert tr == pytest.approx(math.comb(p + n, n), rel=1e-10)


def test_cauchy_schwarz_and_offdiag_symmetry(cp1, rng):
    ev = BergmanEvaluator.build(cp1, harmonic_weight(1, 0.1), 16)
    z = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    zp = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    K = ev.kernel_offdiag(z, zp)
    bound = np.sqrt(ev.kernel_diagonal(z) * ev.kernel_diagonal(zp))
    assert np.all(np.abs(K) <= bound * (1 + 1e-12))
    np.testing.assert_allclose(K, np.conj(ev.kernel_offdiag(zp, z)), atol=1e-12)


def test_offdiag_modulus_chart_invariant(cp1):
    ev = BergmanEvaluator.build(cp1, harmonic_weight(1, 0.1), 10)
    z, zp = np.array([[0.4 + 0.2j]]), np.array([[1.5 - 0.7j]])
    a = ev.kernel_offdiag_modulus(z, zp)
    b = ev.kernel_offdiag_modulus(change_chart(z, 0, 1), zp, chart=1, chart_p=0)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_quadrature_refinement_stable(cp1):
    w = harmonic_weight(1, 0.1)
    p = 24
    z = residual_grid(cp1, 8, 8)
    ev1 = BergmanEvaluator.build(cp1, w, p)
    ev2 = BergmanEvaluator.build(cp1, w, p, rule=build_rule(cp1, p, n_radial=3 * p + 30,
                                                           n_angular=6 * p + 10))
    k1, k2 = kernel_on_grid(ev1, z), kernel_on_grid(ev2, z)
    assert np.max(np.abs(k1 / k2 - 1)) < 1e-10


def test_condition_recorded_and_equilibrated(cp1):
    ev = BergmanEvaluator.build(cp1, default_psi(1), 128)
    # radial weight: diagonal Gram, condition 1 after equilibration
    assert ev.condition_estimate == pytest.approx(1.0, abs=1e-10)
    assert ev.gram.precision == "double"


def test_double_policy_raises_escalation(cp1):
    with pytest.raises(PrecisionEscalation) as exc:
        BergmanEvaluator.build(cp1, harmonic_weight(1, 0.1), 16, precision="double", threshold=10.0)
    assert exc.value.condition > 10


def test_auto_escalates_and_agrees(cp1):
    w = harmonic_weight(1, 0.1)
    z = np.array([0, 0.3 + 0.2j, 2.0])
    d = BergmanEvaluator.build(cp1, w, 16, precision="double")
    e = BergmanEvaluator.build(cp1, w, 16, precision="auto", threshold=10.0, extra_bits=40)
    assert e.extended and e.gram.precision == "extended"
    np.testing.assert_allclose(e.kernel_diagonal(z), d.kernel_diagonal(z), rtol=1e-11)
    np.testing.assert_allclose(e.kernel_diagonal_extremal(z), e.kernel_diagonal(z), rtol=1e-11)


def test_extended_precision_beats_double_at_p64(cp1):
    # condition ~6e10: double loses ~5 more digits than the longdouble route
    w = harmonic_weight(1, 0.1)
    z = np.array([0.3 + 0.2j, 2.0])
    d = BergmanEvaluator.build(cp1, w, 64, precision="double")
    e = BergmanEvaluator.build(cp1, w, 64, precision="extended")
    assert d.condition_estimate > 1e10
    np.testing.assert_allclose(d.kernel_diagonal(z), e.kernel_diagonal(z), rtol=1e-6)
    np.testing.assert_allclose(e.kernel_diagonal_extremal(z), e.kernel_diagonal(z), rtol=1e-9)


def test_indefinite_gram_reports_min_eigenvalue(cp1):
    G = gram(basis_for(cp1, 4), zero_weight(1), build_rule(cp1, 4))
    G.scaled = G.scaled - 2 * np.eye(5)
    with pytest.raises(FactorizationError) as exc:
        orthonormalize(G, precision="double")
    assert exc.value.min_eigenvalue < 0


def test_weight_mismatch(cp1, zero1):
    ev = BergmanEvaluator.build(cp1, zero1, 4)
    with pytest.raises(ParameterError):
        kernel_diagonal(ev, default_psi(1), [0j])
    with pytest.raises(ParameterError):
        BergmanEvaluator.build(cp1, zero1, 4, precision="quad")


def test_rule_too_coarse(cp1, zero1):
    with pytest.raises(ParameterError):
        BergmanEvaluator.build(cp1, zero1, 10, rule=build_rule(cp1, 4))
