import numpy as np
import pytest
from hypothesis import given, settings

from erwg.errors import NoSubCriticalProjections, NotCritical, NotDiffusive, Singular
from erwg.graph import make_config, memory_matrix, two_elephants
from erwg.limits import (finite_n_covariance, lil_ellipsoid, limit_report, sigma1, sigma1_eigen,
                         sigma1_quadrature, sigma2, sigma_lambda, sub_block_covariances,
                         superdiffusive_profile, two_elephant_sigma1, two_elephant_sigma2)
from erwg.moments import second_moment_recursion
from erwg.spectral import analyze

from conftest import walk_configs


def test_sigma1_two_elephants():
    S = sigma1(memory_matrix(two_elephants(0.6)))
    assert np.allclose(S, np.array([[1, 0.4], [0.4, 1]]) / 0.84, atol=1e-12)


def test_sigma2_two_elephants():
    assert np.allclose(sigma2(memory_matrix(two_elephants(0.75))), 0.5 * np.ones((2, 2)))
    assert np.allclose(sigma2(memory_matrix(two_elephants(0.25))),
                       0.5 * np.array([[1, -1], [-1, 1]]))


def test_regime_errors():
    with pytest.raises(NotDiffusive):
        sigma1(memory_matrix(two_elephants(0.75)))
    with pytest.raises(NotCritical):
        sigma2(memory_matrix(two_elephants(0.6)))
    with pytest.raises(NoSubCriticalProjections):
        sub_block_covariances(analyze(memory_matrix(make_config(1, [(1, 1)], 0.95, 0.5))))
    with pytest.raises(Singular):
        lil_ellipsoid(np.ones((2, 2)))


@settings(max_examples=60, deadline=None)
@given(walk_configs(k_max=4))
def test_sigma1_three_routes(config):
    B = memory_matrix(config)
    sp = analyze(B)
    if sp.eta >= 0.45:
        return
    S = sigma1(B)
    assert np.allclose(S, S.T) and np.linalg.eigvalsh(S).min() > 0
    if sp.symmetric:
        assert np.allclose(S, np.linalg.inv(np.eye(config.k) - 2 * B), atol=1e-10)
    # the eigenbasis route loses about log10(cond T) digits near defective spectra
    if sp.diagonalizable and np.linalg.cond(sp.T) < 1e4:
        assert np.allclose(S, sigma1_eigen(sp), atol=1e-8)


def test_sigma1_quadrature_nonsymmetric():
    B = memory_matrix(make_config(2, [(1, 2), (2, 1)], [0.05, 0.7], 0.5))
    assert np.allclose(sigma1(B), sigma1_quadrature(B), atol=1e-6)


def test_sigma_lambda_branches():
    sp = analyze(memory_matrix(two_elephants(0.9)))
    # eigenvalues 0.8 (sum) and -0.8 (difference), T orthonormal
    # unit-norm projection (s1 + s2)/sqrt(2), so each coordinate carries half of this
    assert sigma_lambda(sp, 0) == pytest.approx(two_elephant_sigma1(0.9) ** 2)
    assert sigma_lambda(sp, 1) == pytest.approx(1 / 2.6)
    assert sigma_lambda(analyze(memory_matrix(two_elephants(0.75))), 0) == pytest.approx(1.0)


def test_two_elephant_constants():
    assert two_elephant_sigma1(0.9) ** 2 == pytest.approx(4.6843689, rel=1e-6)
    assert two_elephant_sigma2(0.1) == pytest.approx(two_elephant_sigma1(0.9))


def test_superdiffusive_profile():
    prof = superdiffusive_profile(two_elephants(0.9, 1.0, 1.0))
    (proj,) = prof["projections"]
    assert proj.lam == pytest.approx(0.8)
    assert np.allclose(proj.coordinate_mean, [1.8, 1.8])
    assert prof["limit_mean_coordinates"] == pytest.approx(1.8)
    low = superdiffusive_profile(two_elephants(0.1, 1.0, 0.0))
    assert np.allclose(low["projections"][0].coordinate_mean, [1.8, -1.8])


def test_sub_blocks_mixed():
    sp = analyze(memory_matrix(two_elephants(0.75)))
    sb = sub_block_covariances(sp)
    assert (sb.k1, sb.k2) == (1, 1)
    assert sb.sigma_tilde1 is None and sb.sigma_tilde2 is not None
    assert sb.sigma1_star[0, 0] == pytest.approx(1 / 2)


def test_finite_n_covariance_against_oracle():
    B = memory_matrix(two_elephants(0.6))
    n = 2000
    M = second_moment_recursion(B, (0.5, 0.5), n)[n] / n
    G = finite_n_covariance(B, n)
    assert np.allclose(G, M, rtol=0.02)
    assert np.allclose(finite_n_covariance(B, 100_000), sigma1(B), rtol=2e-3)


def test_ellipsoid_contains():
    E = lil_ellipsoid(np.diag([4.0, 1.0]))
    assert E.contains([1.9, 0.0]) and not E.contains([0.0, 1.1])


@pytest.mark.parametrize("p,has", [(0.6, "sigma1"), (0.75, "sigma2"), (0.9, "superdiff")])
def test_limit_report(p, has):
    rep = limit_report(two_elephants(p, 1.0, 1.0))
    assert getattr(rep, has) is not None
    assert '"regime"' in rep.to_json()


def test_limit_report_non_diagonalizable_is_flagged():
    # upper-triangular coupling via a self loop plus a one-way edge
    c = make_config(2, [(1, 1), (2, 2), (1, 2)], [0.6, 0.8], 0.5)
    rep = limit_report(c)
    assert rep.to_dict()["regime"]["global"]
