import numpy as np
import pytest

from erwg import _kernels
from erwg.gaussian_approx import (BoundRow, brownian_rescale, c_product, comparison_weights,
                                  default_matrix_set, gaussian_comparison, lambda_grid,
                                  matrix_bound_constants, matrix_power, product_bounds_check,
                                  scalar_bound_constants)
from erwg.graph import memory_matrix, two_elephants

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _scalar_oracle(lam, N, sub=8):
    """Plain double loop with running products, no log tables."""
    r1 = r2 = r3 = 0.0
    for j in range(1, N):
        prod = 1.0 + 0j
        for n in range(j + 1, N + 1):
            prod *= (n - 1 + lam) / n
            rhs = (j / n) ** (1 - lam.real)
            r1 = max(r1, abs(prod) / rhs)
            r2 = max(r2, abs(prod - (j / n) ** (1 - lam)) * j * j / rhs)
            for m in range(sub + 1):
                x = j + m / sub
                num = abs((j / n) ** (-lam) - (x / n) ** (-lam))
                r3 = max(r3, num * j / (j / n) ** (-lam.real))
    return np.array([r1, r2, r3])


@pytest.mark.parametrize("lam", [0.5, -0.3 + 0.4j, 1.0, -1.0, 0.0, 0.2 - 0.9j])
def test_scalar_constants_match_oracle(lam):
    got = scalar_bound_constants(complex(lam), 60, backend="numpy")
    want = _scalar_oracle(complex(lam), 60)
    assert np.allclose(got, want, rtol=1e-9, atol=1e-10)


def _matrix_oracle(B, N, sub=8):
    k = B.shape[0]
    eta = max(np.linalg.eigvals(B).real)
    r1 = r2 = r3 = 0.0
    for j in range(1, N):
        for n in range(j + 1, N + 1):
            C = c_product(j, n, B)
            rhs = (j / n) ** (1 - eta)
            r1 = max(r1, np.linalg.norm(C, 2) / rhs)
            D = C - matrix_power(j / n, np.eye(k) - B)
            r2 = max(r2, np.linalg.norm(D, 2) * j * j / rhs)
            for m in range(sub + 1):
                x = j + m / sub
                E = matrix_power(j / n, -B) - matrix_power(x / n, -B)
                r3 = max(r3, np.linalg.norm(E, 2) * j / (j / n) ** (-eta))
    return np.array([r1, r2, r3])


@pytest.mark.parametrize("name", ["two-elephant p=0.6", "shared in-edge p=(0.9,0.2)",
                                  "rotation p=(0.05,0.7)"])
def test_matrix_constants_match_oracle(name):
    B = default_matrix_set()[name]
    got = matrix_bound_constants(B, 25, backend="numpy")
    assert np.allclose(got, _matrix_oracle(B, 25), rtol=1e-8)


@needs_numba
def test_bound_backends_agree():
    for lam in (0.5, -0.7 + 0.2j, -1.0):
        a = scalar_bound_constants(complex(lam), 300, backend="numba")
        b = scalar_bound_constants(complex(lam), 300, backend="numpy")
        assert np.allclose(a, b, rtol=1e-12)
    B = default_matrix_set()["rotation p=(0.9,0.2)"]
    assert np.allclose(matrix_bound_constants(B, 200, "numba"),
                       matrix_bound_constants(B, 200, "numpy"), rtol=1e-12)


def test_c_product_approaches_matrix_power():
    B = memory_matrix(two_elephants(0.7))
    C = c_product(500, 2000, B)
    P = matrix_power(500 / 2000, np.eye(2) - B)
    assert np.abs(C - P).max() < 1e-3
    assert np.array_equal(c_product(5, 5, B), np.eye(2))
    with pytest.raises(ValueError):
        c_product(0, 3, B)


def test_lambda_grid():
    g = lambda_grid()
    assert len(g) == 317 and np.all(np.abs(g) <= 1 + 1e-12)
    assert 0.5 in g and -1 in g


def test_bound_row_growth():
    assert BoundRow("x", "b", 2.0, 2.04).stable()
    assert not BoundRow("x", "b", 2.0, 4.0).stable()
    assert BoundRow("x", "b", 1e-9, 6e-9).growth == 1.0


def test_correction_rate_is_one_over_j():
    # the product minus its power-law limit is O(1/j) relative to the envelope
    rep = product_bounds_check(lambdas=[0.5], matrices={}, N_small=200, N_large=400)
    rows = {r.bound: r for r in rep.rows}
    assert rows["scalar-1"].stable() and rows["scalar-3"].stable()
    assert rows["scalar-2"].growth == pytest.approx(2.0, rel=0.02)


def test_gaussian_comparison_covariance():
    B = memory_matrix(two_elephants(0.6))
    n, R = 400, 20_000
    G = gaussian_comparison(B, n, R, seed=5)
    W = comparison_weights(B, n)
    exact = np.einsum("jab,jac->bc", W, W)
    assert np.allclose(G.exact_cov, exact)
    assert np.allclose(np.cov(G.G.T) / n, exact / n, atol=4 * np.sqrt(2 / R) * 1.5)
    head = gaussian_comparison(B, n, 5000, seed=5)
    assert np.array_equal(G.G[:4096], head.G[:4096])


def test_brownian_rescale():
    b = np.sqrt(np.arange(1, 101))
    v, W = brownian_rescale(b, R=4000, seed=1)
    assert v[-1] == pytest.approx(5050)
    assert np.var(W[:, -1]) == pytest.approx(5050, rel=0.1)
    inc = np.ones((1, 3))
    assert np.allclose(brownian_rescale([1.0, 2.0, 3.0], increments=inc)[1], [[1, 3, 6]])
    with pytest.raises(ValueError):
        brownian_rescale(2.0 ** -np.arange(1, 60))
