"""Exact first and second moments of the walk.

The recursions follow from the conditional law of the next step: given the
past, the coordinates of ``X_{n+1}`` are independent with mean ``m = S_n B / n``,
so

    E[S_{n+1}]          = E[S_n] (I + B/n)
    E[S_{n+1}' S_{n+1}] = (I + B/n)' M_n (I + B/n) + I - Diag(B' M_n B) / n^2

with ``M_n = E[S_n' S_n]``. :func:`brute_force_distribution` enumerates the
memory mechanism directly and is the independent oracle for both.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import TooLarge
from .graph import WalkConfig, memory_matrix
from .spectral import d_scale

EXACT_LIMIT = 1000
BRUTE_N = 8
BRUTE_K = 3


def _initial_mean(q) -> np.ndarray:
    return 2.0 * np.asarray(q, dtype=float) - 1.0


def mean_recursion(B, q, n_max: int) -> np.ndarray:
    """Array ``(n_max + 1, k)`` whose row ``n`` is ``E[S_n]`` (row 0 is zero)."""
    B = np.asarray(B, dtype=float)
    k = B.shape[0]
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    out = np.zeros((n_max + 1, k))
    out[1] = _initial_mean(q)
    I = np.eye(k)
    for n in range(1, n_max):
        out[n + 1] = out[n] @ (I + B / n)
    return out


def _initial_second(q) -> np.ndarray:
    m = _initial_mean(q)
    M = np.outer(m, m)
    np.fill_diagonal(M, 1.0)
    return M


def second_moment_recursion(B, q, n_max: int, *, exact: bool = False):
    """Array ``(n_max + 1, k, k)`` whose slice ``n`` is ``E[S_n' S_n]``.

    With ``exact=True`` the recursion runs in rational arithmetic on the exact
    binary values of ``B`` and ``q`` and returns an object array of Fractions;
    this mode is limited to ``n_max <= 1000``.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if exact:
        return _second_moment_exact(B, q, n_max)
    B = np.asarray(B, dtype=float)
    k = B.shape[0]
    out = np.zeros((n_max + 1, k, k))
    out[1] = _initial_second(q)
    I = np.eye(k)
    for n in range(1, n_max):
        M = out[n]
        A = I + B / n
        nxt = A.T @ M @ A + I - np.diag(np.diag(B.T @ M @ B)) / (n * n)
        out[n + 1] = 0.5 * (nxt + nxt.T)
    return out


def _second_moment_exact(B, q, n_max: int) -> np.ndarray:
    if n_max > EXACT_LIMIT:
        raise TooLarge(f"exact mode supports n_max <= {EXACT_LIMIT}")
    B = np.asarray(B, dtype=float)
    k = B.shape[0]
    Bf = [[Fraction(float(x)) for x in row] for row in B]
    m = [2 * Fraction(float(x)) - 1 for x in q]
    M = [[Fraction(1) if i == j else m[i] * m[j] for j in range(k)] for i in range(k)]
    out = np.empty((n_max + 1, k, k), dtype=object)
    out[0] = [[Fraction(0)] * k for _ in range(k)]
    out[1] = M
    for n in range(1, n_max):
        A = [[Fraction(int(i == j)) + Bf[i][j] / n for j in range(k)] for i in range(k)]
        MA = [[sum(M[i][r] * A[r][j] for r in range(k)) for j in range(k)] for i in range(k)]
        new = [[sum(A[r][i] * MA[r][j] for r in range(k)) for j in range(k)] for i in range(k)]
        for j in range(k):
            bmb = sum(Bf[r][j] * M[r][s] * Bf[s][j] for r in range(k) for s in range(k))
            new[j][j] += 1 - bmb / (n * n)
        M = new
        out[n + 1] = M
    return out


def moment_table(B, q, n_max: int):
    """Rows ``n, mean_1..mean_k, M_11, M_12, ...`` for ``n = 1..n_max``."""
    mu = mean_recursion(B, q, n_max)
    M = second_moment_recursion(B, q, n_max)
    k = mu.shape[1]
    cols = ["n"] + [f"mean_{j + 1}" for j in range(k)] + [
        f"M_{i + 1}{j + 1}" for i in range(k) for j in range(k)]
    rows = np.column_stack([np.arange(1, n_max + 1), mu[1:], M[1:].reshape(n_max, k * k)])
    return cols, rows


def write_moment_table(path: str | Path, B, q, n_max: int) -> None:
    cols, rows = moment_table(B, q, n_max)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join([str(int(r[0]))] + [repr(float(x)) for x in r[1:]]) + "\n")


# --------------------------------------------------------------------------
# brute force

@dataclass(frozen=True)
class ExactLaw:
    n: int
    support: np.ndarray  # (m, k) positions
    probs: np.ndarray  # (m,)

    @property
    def mean(self) -> np.ndarray:
        return self.probs @ self.support

    @property
    def second_moment(self) -> np.ndarray:
        X = self.support.astype(float)
        return (X * self.probs[:, None]).T @ X

    @property
    def cov(self) -> np.ndarray:
        m = self.mean
        return self.second_moment - np.outer(m, m)


def brute_force_distribution(config: WalkConfig, n: int) -> ExactLaw:
    """Exact law of ``S_n`` by enumerating the memory mechanism.

    The mechanism picks a past time uniformly, so the next-step law only
    depends on how many times each step pattern in ``{-1, +1}^k`` has occurred.
    Histories are therefore merged by their pattern counts, which keeps the
    enumeration exact while avoiding the ``2^(kn)`` blow-up of raw histories.
    For each elephant the probability of a ``+1`` is obtained by summing over
    its in-neighbours, the past patterns and the repeat/flip coin.
    """
    k = config.k
    if n > BRUTE_N or k > BRUTE_K:
        raise TooLarge(f"brute force supports n <= {BRUTE_N} and k <= {BRUTE_K}")
    if n < 1:
        raise ValueError("n must be >= 1")
    patterns = list(itertools.product((-1, 1), repeat=k))
    P = len(patterns)
    p, q = config.p, config.q
    nbrs = [[u - 1 for u in lst] for lst in config.graph.in_neighbours]

    states: dict[tuple[int, ...], float] = {}
    for a, pat in enumerate(patterns):
        pr = 1.0
        for v in range(k):
            pr *= q[v] if pat[v] == 1 else 1.0 - q[v]
        if pr > 0:
            cnt = [0] * P
            cnt[a] = 1
            states[tuple(cnt)] = states.get(tuple(cnt), 0.0) + pr

    for t in range(1, n):
        nxt: dict[tuple[int, ...], float] = {}
        for cnt, w in states.items():
            up = []
            for v in range(k):
                s = 0.0
                for u in nbrs[v]:
                    for a, pat in enumerate(patterns):
                        if cnt[a]:
                            past = pat[u]
                            repeat_up = p[v] if past == 1 else 1.0 - p[v]
                            s += (cnt[a] / t) * repeat_up / len(nbrs[v])
                up.append(s)
            for a, pat in enumerate(patterns):
                pr = w
                for v in range(k):
                    pr *= up[v] if pat[v] == 1 else 1.0 - up[v]
                if pr > 0:
                    c2 = list(cnt)
                    c2[a] += 1
                    key = tuple(c2)
                    nxt[key] = nxt.get(key, 0.0) + pr
        states = nxt

    law: dict[tuple[int, ...], float] = {}
    pats = np.asarray(patterns, dtype=np.int64)
    for cnt, w in states.items():
        pos = tuple(int(x) for x in np.asarray(cnt) @ pats)
        law[pos] = law.get(pos, 0.0) + w
    keys = sorted(law)
    return ExactLaw(n=n, support=np.asarray(keys, dtype=np.int64).reshape(len(keys), k),
                    probs=np.asarray([law[x] for x in keys]))


# --------------------------------------------------------------------------
# two-elephant closed forms

def two_elephant_mean_sum(p: float, q1: float, q2: float, n):
    """``E[s^1_n + s^2_n] = 4p (q1 + q2 - 1) d_n(2p - 1)`` for ``n >= 2``."""
    return 4.0 * p * (q1 + q2 - 1.0) * d_scale(2.0 * p - 1.0, n)


def two_elephant_mean_diff(p: float, q1: float, q2: float, n):
    """``E[s^1_n - s^2_n] = 4(1 - p)(q1 - q2) d_n(1 - 2p)`` for ``n >= 2``."""
    return 4.0 * (1.0 - p) * (q1 - q2) * d_scale(1.0 - 2.0 * p, n)


def two_elephant_second_moment(p: float, q1: float, q2: float, n_max: int) -> np.ndarray:
    """The ``k = 2`` recursion written out with the swap-diagonal correction."""
    b = 2.0 * p - 1.0
    out = np.zeros((n_max + 1, 2, 2))
    m1, m2 = 2 * q1 - 1, 2 * q2 - 1
    out[1] = [[1.0, m1 * m2], [m1 * m2, 1.0]]
    B = np.array([[0.0, b], [b, 0.0]])
    for n in range(1, n_max):
        M = out[n]
        A = np.eye(2) + B / n
        corr = (b * b / (n * n)) * np.diag([M[1, 1], M[0, 0]])
        out[n + 1] = A.T @ M @ A + np.eye(2) - corr
    return out


def config_moments(config: WalkConfig, n_max: int):
    B = memory_matrix(config)
    return mean_recursion(B, config.q, n_max), second_moment_recursion(B, config.q, n_max)
