import numpy as np
from hypothesis import strategies as st

from erwg.graph import make_config


@st.composite
def walk_configs(draw, k_max: int = 5, k_min: int = 1):
    """Random valid walk: every vertex gets at least one in-neighbour."""
    k = draw(st.integers(k_min, k_max))
    edges = set()
    for v in range(1, k + 1):
        src = draw(st.lists(st.integers(1, k), min_size=1, max_size=k, unique=True))
        edges.update((u, v) for u in src)
    prob = st.floats(0.0, 1.0, allow_nan=False)
    p = draw(st.lists(prob, min_size=k, max_size=k))
    q = draw(st.lists(prob, min_size=k, max_size=k))
    return make_config(k, sorted(edges), p, q)


def rel_err(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / max(1.0, np.max(np.abs(b))))
