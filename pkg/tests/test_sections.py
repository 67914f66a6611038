import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_lab.errors import SizingError
from bergman_lab.geometry import ModelSurface, change_chart, default_psi, zero_weight
from bergman_lab.sections import basis_for, dimension, eval_log, eval_weighted


def test_preconditioning_constants(cp1):
    b = basis_for(cp1, 2)
    np.testing.assert_allclose(b.precond, [np.sqrt(3), np.sqrt(6), np.sqrt(3)])
    v = eval_weighted(b, zero_weight(1), [0j])
    np.testing.assert_allclose(v, [[np.sqrt(3), 0, 0]])


@pytest.mark.parametrize("n,p", [(1, 5), (2, 4), (2, 7)])
def test_dimension(n, p):
    assert len(basis_for(ModelSurface(n), p)) == dimension(n, p)


@given(st.integers(1, 64), st.floats(0, 30), st.floats(0, 6.3))
@settings(max_examples=40, deadline=None)
def test_fs_pointwise_sum(p, r, t):
    # the preconditioned basis is FS-orthonormal: sum |v|^2 = dim at every point
    b = basis_for(ModelSurface(1), p)
    v = eval_weighted(b, zero_weight(1), [r * np.exp(1j * t)])
    assert np.sum(np.abs(v) ** 2) == pytest.approx(p + 1, rel=1e-11)


def test_fs_pointwise_sum_cp2(cp2):
    b = basis_for(cp2, 5)
    v = eval_weighted(b, zero_weight(2), [[0.4 - 1j, 2.0]])
    # volume 1/2, so the diagonal is dim / vol = (p+1)(p+2)
    assert np.sum(np.abs(v) ** 2) == pytest.approx(6 * 7, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_pointwise_norms_chart_invariant(n):
    S = ModelSurface(n)
    b = basis_for(S, 6)
    w = default_psi(n)
    z = np.array([[0.6 + 0.3j] + [0.2 - 0.5j] * (n - 1)])
    for c in range(1, n + 1):
        lm0, _ = eval_log(b, w, z, 0)
        lmc, _ = eval_log(b, w, change_chart(z, 0, c), c)
        np.testing.assert_allclose(lm0, lmc, atol=1e-12)


def test_log_domain_survives_underflow(cp1):
    b = basis_for(cp1, 400)
    lm, _ = eval_log(b, zero_weight(1), [1e3])
    assert np.all(np.isfinite(lm))
    assert lm.min() < -1000  # e^{lm} underflows, the logs do not
    assert np.isneginf(eval_log(b, zero_weight(1), [0j])[0][0, 1])


def test_degree_guard(cp1, cp2):
    with pytest.raises(SizingError):
        basis_for(cp1, 10_000)
    with pytest.raises(SizingError):
        basis_for(cp2, 0)
