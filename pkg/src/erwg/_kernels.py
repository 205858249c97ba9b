"""Hot loops: replica simulation, with a numba path and a pure-numpy path.

The backend is chosen by the ``ERWG_BACKEND`` environment variable
(``numba`` or ``numpy``); ``ERWG_DISABLE_NUMBA=1`` forces numpy. Both paths
consume the same counter-based streams and perform the same floating point
operations in the same order, so they return bit-identical arrays.

Counter layout per replica, with ``t`` the 0-based step index:
conditional mechanism uses counter ``t*k + j``; literal mechanism uses
``(t*k + j)*3 + slot`` with slots (neighbour, past time, repeat/flip).
"""

from __future__ import annotations

import os

import numpy as np

from .rng import GOLDEN, INV53, mix64, uniforms

PROB_TOL = 1e-12

try:  # pragma: no cover - exercised implicitly
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    nb = None
    HAVE_NUMBA = False


def default_backend() -> str:
    if os.environ.get("ERWG_DISABLE_NUMBA", "") not in ("", "0"):
        return "numpy"
    env = os.environ.get("ERWG_BACKEND", "").strip().lower()
    if env in ("numpy", "python"):
        return "numpy"
    if env == "numba" and not HAVE_NUMBA:
        raise RuntimeError("ERWG_BACKEND=numba but numba is not importable")
    return "numba" if HAVE_NUMBA else "numpy"


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


# --------------------------------------------------------------------------
# numpy path

def conditional_numpy(keys, B, q, first, forced, horizon, ckpts):
    keys = np.asarray(keys, dtype=np.uint64)
    R, k = keys.shape[0], B.shape[0]
    C = ckpts.shape[0]
    out = np.zeros((R, C, k), dtype=np.int64)
    bad = np.zeros(R, dtype=np.int8)
    S = np.zeros((R, k), dtype=np.int64)
    kk = keys[:, None]
    jj = np.arange(k, dtype=np.uint64)[None, :]
    c = 0
    if forced:
        X = np.broadcast_to(first.astype(np.int64), (R, k)).copy()
    else:
        u = uniforms(kk, jj)
        X = np.where(u < q[None, :], 1, -1).astype(np.int64)
    S += X
    if c < C and ckpts[c] == 1:
        out[:, c] = S
        c += 1
    for t in range(1, horizon):
        prob = np.empty((R, k))
        for j in range(k):
            acc = np.zeros(R)
            for i in range(k):
                acc = acc + S[:, i] * B[i, j]
            prob[:, j] = 0.5 + 0.5 * (acc / t)
        bad |= np.any((prob < -PROB_TOL) | (prob > 1.0 + PROB_TOL), axis=1).astype(np.int8)
        u = uniforms(kk, np.uint64(t * k) + jj)
        S += np.where(u < prob, 1, -1)
        if c < C and ckpts[c] == t + 1:
            out[:, c] = S
            c += 1
    return out, bad


def literal_numpy(keys, p, q, nbr, deg, first, forced, horizon, ckpts):
    keys = np.asarray(keys, dtype=np.uint64)
    R, k = keys.shape[0], p.shape[0]
    C = ckpts.shape[0]
    out = np.zeros((R, C, k), dtype=np.int64)
    H = np.zeros((R, horizon, k), dtype=np.int8)
    S = np.zeros((R, k), dtype=np.int64)
    kk = keys[:, None]
    jj = np.arange(k, dtype=np.uint64)[None, :]
    rows = np.arange(R)[:, None]
    c = 0
    if forced:
        X = np.broadcast_to(first.astype(np.int64), (R, k)).copy()
    else:
        u = uniforms(kk, jj * np.uint64(3))
        X = np.where(u < q[None, :], 1, -1).astype(np.int64)
    H[:, 0] = X
    S += X
    if c < C and ckpts[c] == 1:
        out[:, c] = S
        c += 1
    for t in range(1, horizon):
        base = (np.uint64(t * k) + jj) * np.uint64(3)
        a = uniforms(kk, base)
        b = uniforms(kk, base + np.uint64(1))
        g = uniforms(kk, base + np.uint64(2))
        idx = np.minimum((a * deg[None, :]).astype(np.int64), deg[None, :] - 1)
        src = nbr[np.arange(k)[None, :], idx]
        D = np.minimum((b * t).astype(np.int64), t - 1)
        Y = np.where(g < p[None, :], 1, -1).astype(np.int8)
        X = Y * H[rows, D, src]
        H[:, t] = X
        S += X
        if c < C and ckpts[c] == t + 1:
            out[:, c] = S
            c += 1
    return out, np.zeros(R, dtype=np.int8)


# --------------------------------------------------------------------------
# numba path

if HAVE_NUMBA:
    _G = np.uint64(GOLDEN)

    @nb.njit(cache=True, nogil=True, inline="always")
    def _mix(z):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    @nb.njit(cache=True, nogil=True, inline="always")
    def _unif(key, counter):
        z = _mix(key + (np.uint64(counter) + np.uint64(1)) * np.uint64(0x9E3779B97F4A7C15))
        return np.float64(z >> np.uint64(11)) * INV53

    @nb.njit(cache=True, nogil=True)
    def conditional_numba(keys, B, q, first, forced, horizon, ckpts):
        R = keys.shape[0]
        k = B.shape[0]
        C = ckpts.shape[0]
        out = np.zeros((R, C, k), dtype=np.int64)
        bad = np.zeros(R, dtype=np.int8)
        S = np.zeros(k, dtype=np.int64)
        X = np.zeros(k, dtype=np.int64)
        for r in range(R):
            key = keys[r]
            c = 0
            for j in range(k):
                if forced:
                    S[j] = first[j]
                else:
                    S[j] = 1 if _unif(key, j) < q[j] else -1
            if c < C and ckpts[c] == 1:
                for j in range(k):
                    out[r, c, j] = S[j]
                c += 1
            for t in range(1, horizon):
                for j in range(k):
                    acc = 0.0
                    for i in range(k):
                        acc = acc + S[i] * B[i, j]
                    prob = 0.5 + 0.5 * (acc / t)
                    if prob < -PROB_TOL or prob > 1.0 + PROB_TOL:
                        bad[r] = 1
                    X[j] = 1 if _unif(key, t * k + j) < prob else -1
                for j in range(k):
                    S[j] += X[j]
                if c < C and ckpts[c] == t + 1:
                    for j in range(k):
                        out[r, c, j] = S[j]
                    c += 1
        return out, bad

    @nb.njit(cache=True, nogil=True)
    def literal_numba(keys, p, q, nbr, deg, first, forced, horizon, ckpts):
        R = keys.shape[0]
        k = p.shape[0]
        C = ckpts.shape[0]
        out = np.zeros((R, C, k), dtype=np.int64)
        H = np.zeros((horizon, k), dtype=np.int8)
        S = np.zeros(k, dtype=np.int64)
        for r in range(R):
            key = keys[r]
            c = 0
            for j in range(k):
                if forced:
                    x = first[j]
                else:
                    x = 1 if _unif(key, 3 * j) < q[j] else -1
                H[0, j] = x
                S[j] = x
            if c < C and ckpts[c] == 1:
                for j in range(k):
                    out[r, c, j] = S[j]
                c += 1
            for t in range(1, horizon):
                for v in range(k):
                    base = (t * k + v) * 3
                    a = _unif(key, base)
                    b = _unif(key, base + 1)
                    g = _unif(key, base + 2)
                    idx = min(np.int64(a * deg[v]), deg[v] - 1)
                    src = nbr[v, idx]
                    D = min(np.int64(b * t), t - 1)
                    y = 1 if g < p[v] else -1
                    H[t, v] = y * H[D, src]
                for v in range(k):
                    S[v] += H[t, v]
                if c < C and ckpts[c] == t + 1:
                    for j in range(k):
                        out[r, c, j] = S[j]
                    c += 1
        return out, np.zeros(R, dtype=np.int8)


def run_conditional(keys, B, q, first, forced, horizon, ckpts, backend=None):
    backend = resolve_backend(backend)
    args = (
        np.ascontiguousarray(keys, dtype=np.uint64),
        np.ascontiguousarray(B, dtype=np.float64),
        np.ascontiguousarray(q, dtype=np.float64),
        np.ascontiguousarray(first, dtype=np.int64),
        bool(forced),
        int(horizon),
        np.ascontiguousarray(ckpts, dtype=np.int64),
    )
    fn = conditional_numba if backend == "numba" else conditional_numpy
    return fn(*args)


def run_literal(keys, p, q, nbr, deg, first, forced, horizon, ckpts, backend=None):
    backend = resolve_backend(backend)
    args = (
        np.ascontiguousarray(keys, dtype=np.uint64),
        np.ascontiguousarray(p, dtype=np.float64),
        np.ascontiguousarray(q, dtype=np.float64),
        np.ascontiguousarray(nbr, dtype=np.int64),
        np.ascontiguousarray(deg, dtype=np.int64),
        np.ascontiguousarray(first, dtype=np.int64),
        bool(forced),
        int(horizon),
        np.ascontiguousarray(ckpts, dtype=np.int64),
    )
    fn = literal_numba if backend == "numba" else literal_numpy
    return fn(*args)


__all__ = ["run_conditional", "run_literal", "default_backend", "resolve_backend",
           "HAVE_NUMBA", "mix64"]
