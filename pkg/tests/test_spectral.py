import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from erwg.graph import make_config, memory_matrix, two_elephants
from erwg.spectral import (Regime, analyze, classify, d_scale, d_scale_product, matrix_power,
                           matrix_power_expm)

from conftest import walk_configs


@pytest.mark.parametrize("p,regime,eta", [(0.6, Regime.DIFFUSIVE, 0.2),
                                          (0.75, Regime.CRITICAL, 0.5),
                                          (0.9, Regime.SUPERDIFFUSIVE, 0.8)])
def test_two_elephant_regimes(p, regime, eta):
    sp = analyze(memory_matrix(two_elephants(p)))
    assert sp.eta == pytest.approx(eta)
    assert classify(sp).global_regime is regime
    assert sp.symmetric and sp.real_diagonalizable


def test_ordering_descending_real_then_imag():
    B = memory_matrix(make_config(3, [(1, 2), (2, 3), (3, 1)], 1.0, 0.5))
    vals = analyze(B).eigenvalues
    assert vals[0] == pytest.approx(1.0)
    assert vals[1].imag > vals[2].imag
    assert vals[1].real == pytest.approx(vals[2].real)


def test_non_diagonalizable_flagged():
    sp = analyze(np.array([[0.3, 1.0], [0.0, 0.3]]))
    assert not sp.diagonalizable and sp.T is None
    assert sp.nu is None
    assert analyze(np.array([[0.3, 1.0], [0.0, 0.3]]), multiplicity=2).nu == 2


def test_eigenvectors_diagonalize():
    B = memory_matrix(make_config(2, [(1, 1), (2, 1), (1, 2)], [0.9, 0.2], 0.5))
    sp = analyze(B)
    T = sp.require_diagonalizable()
    assert np.allclose(np.linalg.inv(T) @ B @ T, np.diag(sp.eigenvalues), atol=1e-12)


def test_classify_tolerance():
    sp = analyze(np.array([[0.5 + 1e-12]]))
    assert classify(sp).global_regime is Regime.CRITICAL
    assert classify(sp, 1e-13).global_regime is Regime.SUPERDIFFUSIVE
    with pytest.raises(ValueError):
        classify(sp, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.999, 1.0), st.integers(2, 1000))
def test_d_scale_matches_product(lam, n):
    assert d_scale(lam, n) == pytest.approx(d_scale_product(lam, n), rel=1e-10, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.9, 1.0), st.floats(-0.9, 0.9))
def test_d_scale_complex_matches_product(a, b):
    lam = complex(a, b)
    assert d_scale(lam, 300) == pytest.approx(d_scale_product(lam, 300), rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(-0.9, 1.0))
def test_d_scale_asymptotics(lam):
    n = 1e6
    assert d_scale(lam, n) * gamma(lam + 2) / n ** lam == pytest.approx(1.0, abs=1e-5)


def test_d_scale_at_minus_one():
    # the product starts at l = 2 so the l = 1 zero factor never appears
    assert d_scale(-1.0, 10) == pytest.approx(1.0 / 9)
    with pytest.raises(ValueError):
        d_scale(0.5, 1)


@settings(max_examples=100, deadline=None)
@given(walk_configs(k_max=4), st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_matrix_power_semigroup(config, x, y):
    B = memory_matrix(config)
    lhs = matrix_power(x * y, B)
    rhs = matrix_power(x, B) @ matrix_power(y, B)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9)
    assert np.allclose(matrix_power(x, B), matrix_power_expm(x, B), rtol=1e-9, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(walk_configs(k_max=5))
def test_symmetric_basis_orthogonal(config):
    B = memory_matrix(config)
    sp = analyze(B)
    if sp.symmetric:
        assert np.allclose(sp.T.T @ sp.T, np.eye(config.k), atol=1e-10)
    assert sp.eta == pytest.approx(np.max(np.linalg.eigvals(B).real), abs=1e-9)
    order = [(-round(z.real, 12), -round(z.imag, 12)) for z in sp.eigenvalues]
    assert order == sorted(order)
