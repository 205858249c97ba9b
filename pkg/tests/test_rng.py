import numpy as np

from erwg.rng import derive_seed, philox, replica_keys, uniforms


def test_replica_keys_are_prefix_stable():
    a = replica_keys(42, 10)
    b = replica_keys(42, np.arange(5, 10))
    assert np.array_equal(a[5:], b)
    assert len(set(replica_keys(42, 1000).tolist())) == 1000


def test_uniforms_range_and_moments():
    u = uniforms(replica_keys(1, 1)[0], np.arange(200_000))
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / u.size)


def test_derive_seed_depends_on_labels():
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert philox(3, "x").random() == philox(3, "x").random()
