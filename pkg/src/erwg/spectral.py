"""Eigen-analysis of the memory matrix and regime classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammaln, loggamma

COND_LIMIT = 1e8
CRITICAL_TOL = 1e-9


class Regime(str, enum.Enum):
    DIFFUSIVE = "diffusive"
    CRITICAL = "critical"
    SUPERDIFFUSIVE = "superdiffusive"

    @property
    def title(self) -> str:
        return {"diffusive": "Diffusive", "critical": "Critical",
                "superdiffusive": "Superdiffusive"}[self.value]


@dataclass(frozen=True)
class RegimeLabel:
    global_regime: Regime
    per_projection: tuple[Regime, ...]

    def to_dict(self) -> dict:
        return {
            "global": self.global_regime.title,
            "per_projection": [r.value for r in self.per_projection],
        }


@dataclass(frozen=True)
class Spectrum:
    B: np.ndarray
    eigenvalues: np.ndarray
    T: np.ndarray | None
    diagonalizable: bool
    real_diagonalizable: bool
    symmetric: bool
    eta: float
    nu: int | None = None

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def rho(self) -> float:
        return 1.0 - self.eta

    @property
    def real_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues.real.copy()

    def require_diagonalizable(self) -> np.ndarray:
        from .errors import NotDiagonalizable

        if not self.diagonalizable or self.T is None:
            raise NotDiagonalizable("memory matrix is not (numerically) diagonalizable")
        return self.T

    def gram(self) -> np.ndarray:
        """``T' T`` (conjugate transpose in the complex case)."""
        T = self.require_diagonalizable()
        return T.conj().T @ T

    def to_dict(self) -> dict:
        out = {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "diagonalizable": self.diagonalizable,
            "real_diagonalizable": self.real_diagonalizable,
            "symmetric": self.symmetric,
            "eta": float(self.eta),
            "rho": float(self.rho),
            "nu": self.nu,
            "T": None,
        }
        if self.T is not None:
            if np.iscomplexobj(self.T):
                out["T"] = [[[float(z.real), float(z.imag)] for z in row] for row in self.T]
            else:
                out["T"] = [[float(x) for x in row] for row in self.T]
        return out


def _fix_signs(T: np.ndarray) -> np.ndarray:
    # first entry of each column with non-negligible modulus is made real positive
    T = T.copy()
    for j in range(T.shape[1]):
        col = T[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size:
            z = col[idx[0]]
            T[:, j] = col * (abs(z) / z)
    return T


def _order(vals: np.ndarray) -> np.ndarray:
    # descending real part, ties by descending imaginary part; stable otherwise
    re = np.round(vals.real, 12)
    im = np.round(vals.imag, 12)
    return np.lexsort((-im, -re))


def analyze(B, *, multiplicity: int | None = None, tol: float = CRITICAL_TOL) -> Spectrum:
    """Eigenvalues, eigenbasis and flags for a memory matrix.

    Symmetric matrices get an orthogonal ``T`` from ``eigh``. Otherwise the
    matrix is declared non-diagonalizable when the eigenvector matrix has
    condition number above ``COND_LIMIT`` (or the solver fails), in which case
    ``T`` is ``None``. ``multiplicity`` lets a caller certify the algebraic
    multiplicity used for ``nu`` when it cannot be read off numerically.
    """
    B = np.asarray(B, dtype=float)
    k = B.shape[0]
    symmetric = bool(np.array_equal(B, B.T))
    T: np.ndarray | None
    if symmetric:
        vals, vecs = np.linalg.eigh(B)
        vals = vals.astype(complex)
        T = vecs
        diag = True
    else:
        try:
            vals, vecs = np.linalg.eig(B)
        except np.linalg.LinAlgError:
            vals, vecs = scipy.linalg.eigvals(B), None
        vals = np.asarray(vals, dtype=complex)
        if vecs is not None:
            vecs = vecs / np.linalg.norm(vecs, axis=0)
            diag = bool(np.isfinite(vecs).all() and np.linalg.cond(vecs) <= COND_LIMIT)
        else:
            diag = False
        T = vecs if diag else None

    order = _order(vals)
    vals = vals[order]
    if T is not None:
        T = _fix_signs(T[:, order])
    is_real = bool(np.all(np.abs(vals.imag) <= 1e-12))
    if is_real:
        vals = vals.real.astype(complex)
        if T is not None and np.iscomplexobj(T) and np.all(np.abs(T.imag) <= 1e-10):
            T = np.ascontiguousarray(T.real)
    real_diag = bool(diag and is_real and not np.iscomplexobj(T))
    eta = float(np.max(vals.real)) if k else 0.0

    nu = None
    top = np.flatnonzero(np.abs(vals.real - eta) <= tol)
    if multiplicity is not None:
        nu = int(multiplicity)
    elif diag:
        counts = [int(np.sum(np.abs(vals - vals[i]) <= tol)) for i in top]
        nu = max(counts) if counts else None
    if T is not None:
        T.setflags(write=False)
    return Spectrum(B=B, eigenvalues=vals, T=T, diagonalizable=diag,
                    real_diagonalizable=real_diag, symmetric=symmetric, eta=eta, nu=nu)


def _label(x: float, tol: float) -> Regime:
    if abs(x - 0.5) <= tol:
        return Regime.CRITICAL
    if x < 0.5 - tol:
        return Regime.DIFFUSIVE
    return Regime.SUPERDIFFUSIVE


def classify(spectrum: Spectrum, tol: float = CRITICAL_TOL) -> RegimeLabel:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return RegimeLabel(
        global_regime=_label(spectrum.eta, tol),
        per_projection=tuple(_label(float(z.real), tol) for z in spectrum.eigenvalues),
    )


def d_scale(lam, n):
    """``prod_{l=2}^{n-1} (1 + lam/l) = Gamma(lam+n) / (Gamma(lam+2) Gamma(n))``.

    Evaluated through log-gamma; ``n`` may be an array. Real ``lam`` gives a
    real result, complex ``lam`` a complex one.
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 2):
        raise ValueError("d_scale needs n >= 2")
    if np.iscomplexobj(lam) and complex(lam).imag != 0.0:
        lam = complex(lam)
        out = np.exp(loggamma(lam + n) - loggamma(lam + 2) - gammaln(n))
    else:
        lam = float(np.real(lam))
        out = np.exp(gammaln(lam + n) - gammaln(lam + 2) - gammaln(n))
    return out[()] if out.ndim == 0 else out


def d_scale_product(lam, n: int):
    """Direct product form of :func:`d_scale`, for cross-checks."""
    out = 1.0 + 0j if np.iscomplexobj(lam) else 1.0
    for l in range(2, int(n)):
        out *= 1.0 + lam / l
    return out


def matrix_power(x: float, A) -> np.ndarray:
    """``x**A = exp(log(x) A)`` for ``x > 0``.

    Symmetric ``A`` goes through ``eigh``; everything else through scipy's
    scaling-and-squaring Pade ``expm``.
    """
    if not x > 0:
        raise ValueError("matrix_power needs x > 0")
    A = np.asarray(A)
    if A.ndim == 0:
        return np.asarray(x ** A)
    t = np.log(x)
    if np.isrealobj(A) and np.array_equal(A, A.T):
        w, V = np.linalg.eigh(A)
        return (V * np.exp(t * w)) @ V.T
    return scipy.linalg.expm(t * A)


def matrix_power_expm(x: float, A) -> np.ndarray:
    """Always the Pade route, used to cross-check the eigen route."""
    return scipy.linalg.expm(np.log(x) * np.asarray(A))
