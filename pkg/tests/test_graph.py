import json

import numpy as np
import pytest
from hypothesis import given, settings

from erwg.errors import DuplicateEdge, InvalidConfig, ZeroInDegree
from erwg.graph import (build_graph, config_from_dict, cycle, load_config, make_config,
                        memory_matrix, self_loop, two_elephants)

from conftest import walk_configs


def test_two_elephant_matrix():
    B = memory_matrix(two_elephants(0.6))
    assert np.allclose(B, [[0, 0.2], [0.2, 0]])


def test_self_loop_is_scalar():
    assert memory_matrix(self_loop(0.9)).tolist() == [[pytest.approx(0.8)]]


def test_shared_in_edge_divides_by_degree():
    c = make_config(2, [(1, 1), (2, 1), (1, 2)], [0.9, 0.2], 0.5)
    B = memory_matrix(c)
    assert np.allclose(B, [[0.4, -0.6], [0.4, 0.0]])


def test_zero_in_degree_rejected():
    with pytest.raises(ZeroInDegree):
        build_graph(2, [(1, 2)])


def test_duplicate_edge_rejected():
    with pytest.raises(DuplicateEdge):
        build_graph(2, [(1, 2), (2, 1), (1, 2)])


@pytest.mark.parametrize("bad", [[(0, 1)], [(1, 3)], [(1, 2, 3)]])
def test_bad_edges_rejected(bad):
    with pytest.raises(InvalidConfig):
        build_graph(2, bad)


def test_probability_range_checked():
    with pytest.raises(InvalidConfig):
        make_config(1, [(1, 1)], 1.5, 0.5)
    with pytest.raises(InvalidConfig):
        make_config(1, [(1, 1)], 0.5, float("nan"))


def test_strong_connectivity():
    assert cycle(4, 1.0).graph.is_strongly_connected()
    assert not make_config(2, [(1, 1), (1, 2)], 1.0, 0.5).graph.is_strongly_connected()


def test_config_roundtrip(tmp_path):
    c = make_config(3, [(1, 2), (2, 3), (3, 1)], [0.1, 0.2, 0.3], [0.4, 0.5, 0.6])
    path = tmp_path / "c.json"
    path.write_text(json.dumps(c.to_dict()))
    assert load_config(path) == c
    assert config_from_dict(c.to_dict()).config_hash() == c.config_hash()
    with pytest.raises(InvalidConfig):
        config_from_dict({"k": 1, "edges": [[1, 1]], "p": [0.5]})


def _oracle_matrix(config):
    k = config.k
    B = np.zeros((k, k))
    for v in range(1, k + 1):
        src = [u for u, w in config.graph.edges if w == v]
        for u in src:
            B[u - 1, v - 1] += (2 * config.p[v - 1] - 1) / len(src)
    return B


@settings(max_examples=1000, deadline=None)
@given(walk_configs())
def test_memory_matrix_properties(config):
    B = memory_matrix(config)
    assert np.array_equal(B, _oracle_matrix(config))
    col = np.abs(B).sum(axis=0)
    assert np.allclose(col, np.abs(2 * np.asarray(config.p) - 1), atol=1e-12)
    assert np.max(np.abs(np.linalg.eigvals(B))) <= 1 + 1e-9
    # drift of the next step: E[X_{n+1} | S_n] = S_n B / n against a per-vertex sum
    rng = np.random.default_rng(config.k)
    n = 7
    S = rng.integers(-n, n + 1, size=config.k)
    for v in range(config.k):
        src = config.graph.in_neighbours[v]
        direct = sum((2 * config.p[v] - 1) * S[u - 1] / n for u in src) / len(src)
        assert (S @ B / n)[v] == pytest.approx(direct, abs=1e-12)
