"""Comparison Gaussian sums, the product matrices ``C_{j,n}`` and bound sweeps.

The walk is close in law to ``G_n = sum_{j<=n} Y_j (j/n)^{-B}`` with i.i.d.
standard normal rows ``Y_j``. Only the distributional content can be checked
from simulation output: a pathwise coupling lives on an enlarged probability
space that a simulator cannot build, so this module samples ``G_n`` on its own
and the verify suites compare covariances and marginal laws.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import HAVE_NUMBA, resolve_backend
from .rng import philox
from .spectral import analyze, matrix_power

if HAVE_NUMBA:
    import numba as nb

BLOCK = 4096
TIME_BLOCK = 256


def c_product(j: int, n: int, B) -> np.ndarray:
    """``C_{j,n} = prod_{l=j+1}^{n} ((l-1)/l I + B/l)``, accumulated left to right."""
    B = np.asarray(B, dtype=float)
    if not 1 <= j <= n:
        raise ValueError("need 1 <= j <= n")
    k = B.shape[0]
    I = np.eye(k)
    C = I.copy()
    for l in range(j + 1, n + 1):
        C = C @ ((l - 1) / l * I + B / l)
    return C


@dataclass(frozen=True)
class ComparisonEnsemble:
    n: int
    G: np.ndarray  # (R, k)
    exact_cov: np.ndarray  # covariance of G_n (unnormalized)
    seed: int


def comparison_weights(B, n: int) -> np.ndarray:
    """Stack of ``(j/n)^{-B}`` for ``j = 1..n``."""
    B = np.asarray(B, dtype=float)
    return np.stack([matrix_power(j / n, -B) for j in range(1, n + 1)])


def gaussian_comparison(B, n: int, R: int, seed: int) -> ComparisonEnsemble:
    """Draw ``R`` independent copies of ``G_n``.

    Replica block ``b`` and time block ``t`` use the Philox stream keyed by
    ``(seed, "comparison", b, t)``; both block sizes are fixed, so output does
    not depend on how the work is scheduled.
    """
    B = np.asarray(B, dtype=float)
    k = B.shape[0]
    W = comparison_weights(B, n)
    exact = np.einsum("jab,jac->bc", W, W)
    out = np.empty((R, k))
    for b, start in enumerate(range(0, R, BLOCK)):
        rows = min(BLOCK, R - start)
        acc = np.zeros((rows, k))
        for t, j0 in enumerate(range(0, n, TIME_BLOCK)):
            Wc = W[j0:j0 + TIME_BLOCK]
            Y = philox(seed, "comparison", b, t).standard_normal((rows, Wc.shape[0], k))
            acc += np.einsum("rja,jab->rb", Y, Wc)
        out[start:start + rows] = acc
    return ComparisonEnsemble(n=n, G=out, exact_cov=0.5 * (exact + exact.T), seed=int(seed))


def brownian_rescale(b, R: int = 1, seed: int = 0, increments=None):
    """Realize ``W(v_n) = sum_{j<=n} b_j (Z(j) - Z(j-1))`` with ``v_n = sum b_j^2``.

    ``increments`` (shape ``(R, n)``) are unit-time increments of standard
    Brownian motions; drawn from ``philox(seed, "brownian")`` when omitted.
    Raises ValueError when the variance clock ``v_n`` has visibly stopped
    growing, i.e. the last half of the horizon adds less than 1e-3 of it.
    """
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise ValueError("b must be positive")
    n = b.shape[0]
    v = np.cumsum(b * b)
    if n >= 2 and v[-1] - v[n // 2 - 1] < 1e-3 * v[-1]:
        raise ValueError("sum of b_j^2 does not appear to diverge over this horizon")
    if increments is None:
        increments = philox(seed, "brownian").standard_normal((R, n))
    dZ = np.asarray(increments, dtype=float)
    return v, np.cumsum(dZ * b, axis=1)


# --------------------------------------------------------------------------
# deterministic bound sweeps

SUB_X = 8  # sup over [j, j+1] taken at x = j + m/8
ZERO_FLOOR = 1e-6  # fitted constants below this are roundoff, treated as zero


def _kahan_log_prefix(lam: complex, N: int):
    """Compensated prefix sums of ``log((l - 1 + lam)/l)`` for ``l = 2..N``.

    Zero factors (only ``lam = -1`` at ``l = 2``) are skipped and their
    position returned so callers can zero the affected products.
    """
    P = np.zeros(N + 1, dtype=complex)
    zero_at = 0
    s = 0j
    c = 0j
    for l in range(2, N + 1):
        t = (l - 1 + lam) / l
        if t == 0:
            zero_at = l
            P[l] = s
            continue
        y = np.log(t) - c
        tmp = s + y
        c = (tmp - s) - y
        s = tmp
        P[l] = s
    return P, zero_at


def _scalar_tables(lam: complex, N: int):
    P, zero_at = _kahan_log_prefix(lam, N)
    lg = np.log(np.maximum(np.arange(N + 1, dtype=float), 1.0))
    return (np.exp(P), np.exp(-P), zero_at,
            np.exp((1.0 - lam) * lg), np.exp((lam - 1.0) * lg),
            np.exp((1.0 - lam.real) * lg), np.exp((lam.real - 1.0) * lg))


def _scalar_numpy(lam, EP, EPi, zero_at, JP, NQ, JR, NR, N):
    j = np.arange(1, N + 1)[:, None]
    n = np.arange(1, N + 1)[None, :]
    prod = EPi[1:][:, None] * EP[1:][None, :]
    if zero_at:
        prod = np.where((j < zero_at) & (n >= zero_at), 0.0, prod)
    tgt = JP[1:][:, None] * NQ[1:][None, :]
    rhs = JR[1:][:, None] * NR[1:][None, :]
    mask = j < n
    r1 = np.where(mask, np.abs(prod) / rhs, 0.0).max()
    r2 = np.where(mask, np.abs(prod - tgt) * (j * j) / rhs, 0.0).max()
    jj = np.arange(1, N, dtype=float)[:, None]
    x = jj + np.arange(SUB_X + 1)[None, :] / SUB_X
    r3 = (jj[:, 0] * np.abs(1.0 - np.exp(-lam * np.log(x / jj))).max(axis=1)).max()
    return np.array([r1, r2, r3])


if HAVE_NUMBA:

    @nb.njit(cache=True)
    def _scalar_numba(lam, EP, EPi, zero_at, JP, NQ, JR, NR, N):
        r1 = 0.0
        r2 = 0.0
        for n in range(2, N + 1):
            for j in range(1, n):
                if zero_at > 0 and j < zero_at and n >= zero_at:
                    prod = 0j
                else:
                    prod = EPi[j] * EP[n]
                tgt = JP[j] * NQ[n]
                rhs = JR[j] * NR[n]
                a = abs(prod) / rhs
                b = abs(prod - tgt) * (j * j) / rhs
                if a > r1:
                    r1 = a
                if b > r2:
                    r2 = b
        r3 = 0.0
        for j in range(1, N):
            for m in range(SUB_X + 1):
                x = j + m / SUB_X
                v = j * abs(1.0 - np.exp(-lam * np.log(x / j)))
                if v > r3:
                    r3 = v
        out = np.empty(3)
        out[0] = r1
        out[1] = r2
        out[2] = r3
        return out


def scalar_bound_constants(lam: complex, N: int, backend: str | None = None) -> np.ndarray:
    """Smallest constants making the three scalar product bounds hold for ``j < n <= N``.

    Bound 1: ``|prod_{l=j+1}^n ((l-1)/l + lam/l)| <= c (j/n)^{1 - Re lam}``.
    Bound 2: ``|prod - (j/n)^{1-lam}| <= c' j^-2 (j/n)^{1 - Re lam}``.
    Bound 3: ``sup_{x in [j, j+1]} |(j/n)^-lam - (x/n)^-lam| <= c'' j^-1 (j/n)^-Re lam``;
    the ratio reduces exactly to ``j |1 - (x/j)^-lam|``, so ``n`` drops out.
    Products are ``exp(P_n) exp(-P_j)`` with compensated log prefix sums ``P``.
    """
    lam = complex(lam)
    tables = _scalar_tables(lam, int(N))
    if resolve_backend(backend) == "numba":
        return _scalar_numba(lam, *tables, int(N))
    return _scalar_numpy(lam, *tables, int(N))


def _norm2(a, b, c, d):
    # spectral norm of [[a, b], [c, d]] (complex entries allowed)
    f = abs(a) ** 2 + abs(b) ** 2 + abs(c) ** 2 + abs(d) ** 2
    det = abs(a * d - b * c)
    disc = max(f * f - 4.0 * det * det, 0.0)
    return np.sqrt(0.5 * (f + np.sqrt(disc)))


def _norm2_vec(M):
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    f = np.abs(a) ** 2 + np.abs(b) ** 2 + np.abs(c) ** 2 + np.abs(d) ** 2
    det = np.abs(a * d - b * c)
    return np.sqrt(0.5 * (f + np.sqrt(np.maximum(f * f - 4.0 * det * det, 0.0))))


def _matrix_tables(lam, eta, N):
    # powers split as j^a n^-a so the sweeps only multiply
    lg = np.log(np.maximum(np.arange(N + 1, dtype=float), 1.0))
    JP = np.exp(np.multiply.outer(lg, 1.0 - lam))  # j^(1 - lam_r)
    NQ = np.exp(np.multiply.outer(lg, lam - 1.0))  # n^(lam_r - 1)
    NL = np.exp(np.multiply.outer(lg, lam))  # n^lam_r
    jj = np.maximum(np.arange(N + 1, dtype=float), 1.0)
    xs = jj[:, None] + np.arange(SUB_X + 1)[None, :] / SUB_X
    # j^-lam - x^-lam for x = j + m/8
    DX = (np.exp(np.multiply.outer(-np.log(jj), lam))[:, None, :]
          - np.exp(np.multiply.outer(-np.log(xs), lam)))
    JE, NE = np.exp((1.0 - eta) * lg), np.exp((eta - 1.0) * lg)
    return JP, NQ, NL, DX, JE, NE


def _matrix_numpy(B, T, Ti, eta, JP, NQ, NL, DX, JE, NE, N):
    I = np.eye(2)
    r1 = r2 = 0.0
    # Cn[n] holds C_{j,n} for the current j and all n > j
    Cn = np.broadcast_to(I, (N + 1, 2, 2)).copy()
    for j in range(N - 1, 0, -1):
        l = j + 1
        f00 = (l - 1) / l + B[0, 0] / l
        f01 = B[0, 1] / l
        f10 = B[1, 0] / l
        f11 = (l - 1) / l + B[1, 1] / l
        Cn[j + 1] = I
        old = Cn[j + 1:].copy()
        Cn[j + 1:, 0, 0] = f00 * old[:, 0, 0] + f01 * old[:, 1, 0]
        Cn[j + 1:, 0, 1] = f00 * old[:, 0, 1] + f01 * old[:, 1, 1]
        Cn[j + 1:, 1, 0] = f10 * old[:, 0, 0] + f11 * old[:, 1, 0]
        Cn[j + 1:, 1, 1] = f10 * old[:, 0, 1] + f11 * old[:, 1, 1]
        C = Cn[j + 1:]
        rhs = JE[j] * NE[j + 1:]
        D = JP[j][None, :] * NQ[j + 1:]
        E = np.einsum("ar,mr,rb->mab", T, D, Ti)
        r1 = max(r1, float((_norm2_vec(C) / rhs).max()))
        r2 = max(r2, float((_norm2_vec(C - E) * (j * j) / rhs).max()))
    r3 = 0.0
    for j in range(1, N):
        d = NL[j + 1:, None, :] * DX[j][None, :, :]  # (nn, 9, 2)
        E = np.einsum("ar,mxr,rb->mxab", T, d, Ti)
        scale = j * np.exp(eta * np.log(j / np.arange(j + 1, N + 1)))
        r3 = max(r3, float((_norm2_vec(E) * scale[:, None]).max()))
    return np.array([r1, r2, r3])


if HAVE_NUMBA:
    _norm2_nb = nb.njit(cache=True)(_norm2)

    @nb.njit(cache=True)
    def _matrix_numba(B, T, Ti, eta, JP, NQ, NL, DX, JE, NE, N):
        r1 = 0.0
        r2 = 0.0
        for n in range(2, N + 1):
            c00, c01, c10, c11 = 1.0, 0.0, 0.0, 1.0
            for j in range(n - 1, 0, -1):
                l = j + 1
                f00 = (l - 1) / l + B[0, 0] / l
                f01 = B[0, 1] / l
                f10 = B[1, 0] / l
                f11 = (l - 1) / l + B[1, 1] / l
                n00 = f00 * c00 + f01 * c10
                n01 = f00 * c01 + f01 * c11
                n10 = f10 * c00 + f11 * c10
                n11 = f10 * c01 + f11 * c11
                c00, c01, c10, c11 = n00, n01, n10, n11
                rhs = JE[j] * NE[n]
                d0 = JP[j, 0] * NQ[n, 0]
                d1 = JP[j, 1] * NQ[n, 1]
                e00 = T[0, 0] * d0 * Ti[0, 0] + T[0, 1] * d1 * Ti[1, 0]
                e01 = T[0, 0] * d0 * Ti[0, 1] + T[0, 1] * d1 * Ti[1, 1]
                e10 = T[1, 0] * d0 * Ti[0, 0] + T[1, 1] * d1 * Ti[1, 0]
                e11 = T[1, 0] * d0 * Ti[0, 1] + T[1, 1] * d1 * Ti[1, 1]
                a = _norm2_nb(c00, c01, c10, c11) / rhs
                b = _norm2_nb(c00 - e00, c01 - e01, c10 - e10, c11 - e11) * (j * j) / rhs
                if a > r1:
                    r1 = a
                if b > r2:
                    r2 = b
        r3 = 0.0
        for n in range(2, N + 1):
            for j in range(1, n):
                scale = j * np.exp(eta * np.log(j / n))
                for m in range(1, SUB_X + 1):
                    d0 = NL[n, 0] * DX[j, m, 0]
                    d1 = NL[n, 1] * DX[j, m, 1]
                    e00 = T[0, 0] * d0 * Ti[0, 0] + T[0, 1] * d1 * Ti[1, 0]
                    e01 = T[0, 0] * d0 * Ti[0, 1] + T[0, 1] * d1 * Ti[1, 1]
                    e10 = T[1, 0] * d0 * Ti[0, 0] + T[1, 1] * d1 * Ti[1, 0]
                    e11 = T[1, 0] * d0 * Ti[0, 1] + T[1, 1] * d1 * Ti[1, 1]
                    v = _norm2_nb(e00, e01, e10, e11) * scale
                    if v > r3:
                        r3 = v
        out = np.empty(3)
        out[0] = r1
        out[1] = r2
        out[2] = r3
        return out


def matrix_bound_constants(B, N: int, backend: str | None = None) -> np.ndarray:
    """Smallest constants for the three matrix bounds on ``1 <= j < n <= N`` (2x2 ``B``).

    Bound 1: ``||C_{j,n}|| <= c (j/n)^{1-eta}``.
    Bound 2: ``||C_{j,n} - (j/n)^{I-B}|| <= c' j^-2 (j/n)^{1-eta}``.
    Bound 3: ``sup_{x in [j, j+1]} ||(j/n)^-B - (x/n)^-B|| <= c'' j^-1 (j/n)^-eta``.
    ``C_{j,n}`` is accumulated directly; the matrix powers use the eigenbasis.
    """
    B = np.ascontiguousarray(B, dtype=float)
    if B.shape != (2, 2):
        raise ValueError("matrix sweep is implemented for 2x2 memory matrices")
    sp = analyze(B)
    T = np.ascontiguousarray(sp.require_diagonalizable(), dtype=complex)
    Ti = np.ascontiguousarray(np.linalg.inv(T))
    lam = np.ascontiguousarray(sp.eigenvalues, dtype=complex)
    eta = float(sp.eta)
    tables = _matrix_tables(lam, eta, int(N))
    if resolve_backend(backend) == "numba":
        return _matrix_numba(B, T, Ti, eta, *tables, int(N))
    return _matrix_numpy(B, T, Ti, eta, *tables, int(N))


def lambda_grid(step: float = 0.1) -> np.ndarray:
    """Complex grid ``{a + bi : a, b in step * Z, |a + bi| <= 1}``."""
    m = int(round(1.0 / step))
    pts = [complex(a * step, b * step) for a in range(-m, m + 1) for b in range(-m, m + 1)
           if a * a + b * b <= m * m]
    return np.asarray(pts)


def default_matrix_set() -> dict[str, np.ndarray]:
    from .graph import make_config, memory_matrix, two_elephants

    out = {}
    for p in np.round(np.arange(0.0, 1.0001, 0.1), 10):
        out[f"two-elephant p={p:g}"] = np.asarray(memory_matrix(two_elephants(float(p))))
    out["shared in-edge p=(0.9,0.2)"] = np.asarray(memory_matrix(
        make_config(2, [(1, 1), (2, 1), (1, 2)], [0.9, 0.2], 0.5)))
    out["shared in-edge p=(0.1,0.8)"] = np.asarray(memory_matrix(
        make_config(2, [(1, 1), (2, 1), (1, 2)], [0.1, 0.8], 0.5)))
    out["rotation p=(0.9,0.2)"] = np.asarray(memory_matrix(
        make_config(2, [(1, 2), (2, 1)], [0.9, 0.2], 0.5)))
    out["rotation p=(0.05,0.7)"] = np.asarray(memory_matrix(
        make_config(2, [(1, 2), (2, 1)], [0.05, 0.7], 0.5)))
    return out


@dataclass(frozen=True)
class BoundRow:
    subject: str  # lambda value or matrix label
    bound: str
    c_small: float
    c_large: float

    @property
    def growth(self) -> float:
        top = max(self.c_small, self.c_large)
        if top <= ZERO_FLOOR:
            return 1.0
        return self.c_large / self.c_small if self.c_small > 0 else np.inf

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.c_small) and np.isfinite(self.c_large))

    def stable(self, rel: float = 0.05) -> bool:
        return self.finite and abs(self.growth - 1.0) <= rel


@dataclass(frozen=True)
class BoundReport:
    rows: list
    N_small: int
    N_large: int

    def failing(self, rel: float = 0.05) -> list:
        return [r for r in self.rows if not r.stable(rel)]

    def passed(self, rel: float = 0.05) -> bool:
        return not self.failing(rel)

    def worst(self, bound: str) -> BoundRow:
        rows = [r for r in self.rows if r.bound == bound]
        return max(rows, key=lambda r: abs(r.growth - 1.0))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write("subject,bound,fitted_constant,fitted_constant_small_grid,"
                     "max_violation_ratio,stable\n")
            for r in self.rows:
                fh.write(f"\"{r.subject}\",{r.bound},{r.c_large!r},{r.c_small!r},"
                         f"{r.growth!r},{int(r.stable())}\n")


def product_bounds_check(lambdas=None, matrices=None, N_small: int = 1000,
                             N_large: int = 2000, backend: str | None = None) -> BoundReport:
    """Fit the bound constants on two grid sizes and compare them.

    A bound with a genuinely finite constant shows the same fitted value on
    both grids; a bound whose rate is too optimistic shows a constant that
    keeps growing with the grid. ``max_violation_ratio`` in the CSV is the
    large-grid constant over the small-grid one.
    """
    lambdas = lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=complex)
    matrices = default_matrix_set() if matrices is None else matrices
    rows = []
    for lam in lambdas:
        a = scalar_bound_constants(lam, N_small, backend)
        b = scalar_bound_constants(lam, N_large, backend)
        label = f"{lam.real:+.1f}{lam.imag:+.1f}j"
        rows += [BoundRow(label, f"scalar-{i + 1}", float(a[i]), float(b[i])) for i in range(3)]
    for name, B in matrices.items():
        a = matrix_bound_constants(B, N_small, backend)
        b = matrix_bound_constants(B, N_large, backend)
        rows += [BoundRow(name, f"matrix-{i + 1}", float(a[i]), float(b[i])) for i in range(3)]
    return BoundReport(rows=rows, N_small=N_small, N_large=N_large)
