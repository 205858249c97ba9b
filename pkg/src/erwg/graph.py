"""Interaction graphs, walk parameters and the memory matrix.

Vertices are 1-based. An edge ``(u, v)`` means elephant ``v`` reads the step
history of elephant ``u`` (``u`` is an in-neighbour of ``v``).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateEdge, InvalidConfig, ZeroInDegree

EIG_TOL = 1e-9


@dataclass(frozen=True)
class DirectedGraph:
    k: int
    edges: tuple[tuple[int, int], ...]
    in_neighbours: tuple[tuple[int, ...], ...] = field(repr=False)
    in_degree: tuple[int, ...] = field(repr=False)

    def adjacency(self) -> np.ndarray:
        """0/1 matrix with ``A[u-1, v-1] = 1`` for every edge ``(u, v)``."""
        a = np.zeros((self.k, self.k), dtype=np.int64)
        for u, v in self.edges:
            a[u - 1, v - 1] = 1
        return a

    def is_strongly_connected(self) -> bool:
        a = self.adjacency().astype(bool)
        for mat in (a, a.T):
            seen = {0}
            stack = [0]
            while stack:
                u = stack.pop()
                for v in np.flatnonzero(mat[u]):
                    if v not in seen:
                        seen.add(int(v))
                        stack.append(int(v))
            if len(seen) != self.k:
                return False
        return True

    def neighbour_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded 0-based in-neighbour table ``(k, max_deg)`` and degrees."""
        deg = np.asarray(self.in_degree, dtype=np.int64)
        table = np.zeros((self.k, int(deg.max())), dtype=np.int64)
        for v, nbrs in enumerate(self.in_neighbours):
            table[v, : len(nbrs)] = [u - 1 for u in nbrs]
        return table, deg


def build_graph(k: int, edges: Iterable[Sequence[int]]) -> DirectedGraph:
    """Validate ``edges`` on vertices ``1..k`` and cache in-neighbour lists.

    Raises ZeroInDegree for a vertex nobody points to and DuplicateEdge for a
    repeated ordered pair.
    """
    k = int(k)
    if k < 1:
        raise InvalidConfig("k must be >= 1")
    seen: set[tuple[int, int]] = set()
    ordered: list[tuple[int, int]] = []
    for e in edges:
        if len(e) != 2:
            raise InvalidConfig(f"edge {e!r} is not a pair")
        u, v = int(e[0]), int(e[1])
        if not (1 <= u <= k and 1 <= v <= k):
            raise InvalidConfig(f"edge {(u, v)} outside vertex range 1..{k}")
        if (u, v) in seen:
            raise DuplicateEdge((u, v))
        seen.add((u, v))
        ordered.append((u, v))
    nbrs = [sorted(u for u, w in ordered if w == v) for v in range(1, k + 1)]
    for v, lst in enumerate(nbrs, start=1):
        if not lst:
            raise ZeroInDegree(v)
    return DirectedGraph(
        k=k,
        edges=tuple(ordered),
        in_neighbours=tuple(tuple(lst) for lst in nbrs),
        in_degree=tuple(len(lst) for lst in nbrs),
    )


@dataclass(frozen=True)
class WalkConfig:
    graph: DirectedGraph
    p: tuple[float, ...]
    q: tuple[float, ...]

    def __post_init__(self):
        k = self.graph.k
        if len(self.p) != k or len(self.q) != k:
            raise InvalidConfig(f"p and q must have length k={k}")
        for name, vec in (("p", self.p), ("q", self.q)):
            for x in vec:
                if not (0.0 <= x <= 1.0) or x != x:
                    raise InvalidConfig(f"{name} entries must lie in [0, 1], got {x}")

    @property
    def k(self) -> int:
        return self.graph.k

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "edges": [list(e) for e in self.graph.edges],
            "p": list(self.p),
            "q": list(self.q),
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_config(k: int, edges, p, q) -> WalkConfig:
    k = int(k)
    p = [float(x) for x in np.broadcast_to(np.asarray(p, dtype=float), (k,))]
    q = [float(x) for x in np.broadcast_to(np.asarray(q, dtype=float), (k,))]
    return WalkConfig(build_graph(k, edges), tuple(p), tuple(q))


def config_from_dict(d: dict) -> WalkConfig:
    missing = {"k", "edges", "p", "q"} - set(d)
    if missing:
        raise InvalidConfig(f"walk config missing fields: {sorted(missing)}")
    return make_config(d["k"], d["edges"], d["p"], d["q"])


def load_config(path: str | Path) -> WalkConfig:
    with open(path) as fh:
        d = json.load(fh)
    return config_from_dict(d.get("walk", d))


def two_elephants(p: float, q1: float = 0.5, q2: float = 0.5) -> WalkConfig:
    """Two walkers that each reinforce only from the other's history."""
    return make_config(2, [(1, 2), (2, 1)], [p, p], [q1, q2])


def self_loop(p: float, q: float = 0.5) -> WalkConfig:
    """The classic single elephant walk."""
    return make_config(1, [(1, 1)], [p], [q])


def cycle(k: int, p, q=0.5) -> WalkConfig:
    edges = [(i, i % k + 1) for i in range(1, k + 1)]
    return make_config(k, edges, p, q)


def memory_matrix(config: WalkConfig) -> np.ndarray:
    """``B[i, j] = (2 p_j - 1) / d_j`` on edges ``(i, j)``, zero elsewhere."""
    g = config.graph
    B = np.zeros((g.k, g.k))
    for u, v in g.edges:
        B[u - 1, v - 1] = (2.0 * config.p[v - 1] - 1.0) / g.in_degree[v - 1]
    col = np.abs(B).sum(axis=0)
    expected = np.abs(2.0 * np.asarray(config.p) - 1.0)
    if not np.allclose(col, expected, rtol=0, atol=1e-12) or np.any(col > 1 + 1e-12):
        raise AssertionError("memory matrix column sums violate |2p-1| <= 1")
    if g.k and np.max(np.abs(np.linalg.eigvals(B))) > 1.0 + EIG_TOL:
        raise AssertionError("memory matrix has an eigenvalue outside the unit disk")
    B.setflags(write=False)
    return B
