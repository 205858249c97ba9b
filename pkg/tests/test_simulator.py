import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erwg import _kernels
from erwg.errors import NotDiagonalizable, ProbabilityOutOfRange
from erwg.graph import make_config, memory_matrix, two_elephants
from erwg.moments import mean_recursion, second_moment_recursion
from erwg.simulator import (MomentAccumulator, checkpoint_grid, project, read_ensemble_csv,
                            sa_view, simulate_conditional, simulate_ensemble, simulate_literal)
from erwg.spectral import analyze

from conftest import walk_configs

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def test_checkpoint_grid():
    ck = checkpoint_grid(1000)
    assert ck[0] == 10 and ck[-1] == 1000
    assert np.all(np.diff(ck) > 0)
    assert checkpoint_grid(5).tolist() == [5]


@settings(max_examples=60, deadline=None)
@given(walk_configs(k_max=4), st.integers(0, 2**64 - 1), st.sampled_from(["literal", "conditional"]))
def test_trajectory_invariants(config, seed, mech):
    sim = simulate_literal if mech == "literal" else simulate_conditional
    traj = sim(config, seed, 60)
    traj.check()
    assert traj.S.shape == (61, config.k)
    assert np.array_equal(traj.S, sim(config, seed, 60).S)


def test_forced_first_step():
    traj = simulate_conditional(two_elephants(1.0), 5, 50, first_step=(1, -1))
    assert traj.X[0].tolist() == [1, -1]
    with pytest.raises(ValueError):
        simulate_conditional(two_elephants(1.0), 5, 50, first_step=(1, 0))


def test_full_memory_self_loop_repeats_first_step():
    c = make_config(1, [(1, 1)], 1.0, 0.5)
    S = simulate_literal(c, 11, 100).S[:, 0]
    assert abs(S[-1]) == 100


@needs_numba
@pytest.mark.parametrize("mech", ["literal", "conditional"])
def test_backends_bit_identical(mech):
    c = make_config(3, [(1, 2), (2, 3), (3, 1), (1, 1)], [0.9, 0.3, 0.6], [0.2, 0.5, 0.9])
    a = simulate_ensemble(c, 300, 400, 9, mechanism=mech, backend="numba")
    b = simulate_ensemble(c, 300, 400, 9, mechanism=mech, backend="numpy")
    assert np.array_equal(a.S, b.S)


def test_backend_env_flag(monkeypatch):
    monkeypatch.setenv("ERWG_DISABLE_NUMBA", "1")
    assert _kernels.resolve_backend(None) == "numpy"
    monkeypatch.delenv("ERWG_DISABLE_NUMBA")
    monkeypatch.setenv("ERWG_BACKEND", "numpy")
    assert _kernels.resolve_backend(None) == "numpy"
    with pytest.raises(ValueError):
        _kernels.resolve_backend("cuda")


def test_workers_do_not_change_results():
    c = two_elephants(0.7, 0.3, 0.8)
    one = simulate_ensemble(c, 5000, 200, 123, workers=1)
    three = simulate_ensemble(c, 5000, 200, 123, workers=3)
    assert np.array_equal(one.S, three.S)
    tail = simulate_ensemble(c, 1000, 200, 123, replica_offset=4000)
    assert np.array_equal(one.S[4000:], tail.S)


def test_ensemble_csv_roundtrip(tmp_path):
    ens = simulate_ensemble(two_elephants(0.6), 7, 100, 1)
    csv, meta = ens.write(tmp_path)
    ck, S = read_ensemble_csv(csv)
    assert np.array_equal(ck, ens.checkpoints) and np.array_equal(S, ens.S)
    assert len(csv.read_text().splitlines()) == 1 + 7 * len(ens.checkpoints)
    assert '"config_hash"' in meta.read_text()
    with pytest.raises(KeyError):
        ens.at(11)


def test_probability_out_of_range(monkeypatch):
    import erwg.simulator as sim

    c = two_elephants(0.5)
    monkeypatch.setattr(sim, "memory_matrix", lambda cfg: np.array([[0.0, 3.0], [3.0, 0.0]]))
    with pytest.raises(ProbabilityOutOfRange):
        sim.simulate_ensemble(c, 10, 50, 0)


def test_ensemble_moments_match_recursion():
    c = make_config(2, [(1, 1), (2, 1), (1, 2)], [0.9, 0.2], [0.8, 0.3])
    B = memory_matrix(c)
    n, R = 100, 40_000
    S = simulate_ensemble(c, R, n, 77, checkpoints=[n]).at(n)
    mu = mean_recursion(B, c.q, n)[n]
    M = second_moment_recursion(B, c.q, n)[n]
    se = S.std(axis=0) / np.sqrt(R)
    assert np.all(np.abs(S.mean(axis=0) - mu) <= 4 * se)
    emp = S.T.astype(float) @ S / R
    assert np.allclose(emp, M, rtol=0.05, atol=2.0)


def test_moment_accumulator_merge_exact():
    rng = np.random.default_rng(0)
    S = rng.integers(-10**6, 10**6, size=(1000, 3))
    whole = MomentAccumulator.from_samples(S)
    parts = MomentAccumulator.from_samples(S[:300]).merge(MomentAccumulator.from_samples(S[300:]))
    assert whole.count == parts.count
    assert np.array_equal(whole.mean(), parts.mean())
    assert np.array_equal(whole.cov(), parts.cov())
    assert np.allclose(whole.cov(), np.cov(S.T))


def test_projection_martingale_start():
    c = two_elephants(0.9)
    sp = analyze(memory_matrix(c))
    traj = simulate_conditional(c, 4, 500)
    P = project(traj, sp)
    assert np.allclose(P.S_hat, traj.S @ sp.T)
    assert np.isnan(P.L[2]).all() and np.isfinite(P.L[3:]).all()
    assert np.allclose(P.d[2], 1.0)


def test_projection_needs_diagonalizable():
    sp = analyze(np.array([[0.3, 1.0], [0.0, 0.3]]))
    traj = simulate_conditional(two_elephants(0.6), 1, 10)
    with pytest.raises(NotDiagonalizable):
        project(traj, sp)


@settings(max_examples=40, deadline=None)
@given(walk_configs(k_max=4), st.integers(0, 2**32))
def test_stochastic_approximation_identity(config, seed):
    traj = simulate_conditional(config, seed, 300)
    rep = sa_view(traj, memory_matrix(config))
    assert rep.max_residual <= 1e-12
    assert rep.delta_M.shape == (299, config.k)
