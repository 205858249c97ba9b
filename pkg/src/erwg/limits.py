"""Limiting covariances, scalings and LIL ellipsoids.

Conventions: positions are row vectors, so a Gaussian sum ``sum_j Y_j A_j`` has
covariance ``sum_j A_j' A_j``. With ``T^{-1} B T = diag(lambda)`` every
covariance below has the eigenbasis form ``T^{-T} [G_pq w_pq] T^{-1}`` where
``G = T' T`` and ``w_pq`` depends only on ``lambda_p + lambda_q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg
from scipy.special import gamma

from ._io import dumps
from .errors import (NoSubCriticalProjections, NotCritical, NotDiffusive, NotRealDiagonalizable,
                     NotSuperdiffusive, Singular, Unsupported)
from .graph import WalkConfig, memory_matrix
from .moments import mean_recursion
from .spectral import CRITICAL_TOL, Regime, RegimeLabel, Spectrum, analyze, classify

LYAP_TOL = 1e-10


def _spectrum(B, spectrum):
    return analyze(B) if spectrum is None else spectrum


def _sym(M):
    return 0.5 * (M + M.T)


def _real_T(spectrum: Spectrum) -> np.ndarray:
    T = spectrum.require_diagonalizable()
    if not spectrum.real_diagonalizable:
        raise NotRealDiagonalizable("needs real eigenvalues and a real eigenbasis")
    return T


def sigma1(B, *, tol: float = CRITICAL_TOL, spectrum: Spectrum | None = None) -> np.ndarray:
    """Solve ``A' S + S A = -I`` with ``A = B - I/2`` (diffusive regime only)."""
    B = np.asarray(B, dtype=float)
    sp = _spectrum(B, spectrum)
    if sp.eta >= 0.5 - tol:
        raise NotDiffusive(f"eta = {sp.eta:.6g} is not below 1/2")
    k = B.shape[0]
    A = B - 0.5 * np.eye(k)
    S = _sym(scipy.linalg.solve_continuous_lyapunov(A.T, -np.eye(k)))
    resid = np.linalg.norm(A.T @ S + S @ A + np.eye(k))
    if resid > LYAP_TOL * max(1.0, np.linalg.norm(S)):
        raise AssertionError(f"Lyapunov residual {resid:.3e} too large")
    return S


def sigma1_quadrature(B, t_max: float = 80.0) -> np.ndarray:
    """Truncated integral of ``exp(A' t) exp(A t)`` over ``[0, t_max]``."""
    B = np.asarray(B, dtype=float)
    A = B - 0.5 * np.eye(B.shape[0])

    def f(t):
        E = scipy.linalg.expm(A * t)
        return E.T @ E

    val, _ = scipy.integrate.quad_vec(f, 0.0, t_max, epsabs=1e-12, epsrel=1e-12)
    return _sym(val)


def sigma1_eigen(spectrum: Spectrum) -> np.ndarray:
    """Eigenbasis form of the diffusive covariance (cross-check route)."""
    T = spectrum.require_diagonalizable()
    lam = spectrum.eigenvalues
    W = (T.T @ T) / (1.0 - lam[:, None] - lam[None, :])
    Ti = np.linalg.inv(T)
    return _sym((Ti.T @ W @ Ti).real)


def _pair_indicator(lam, tol):
    return np.abs(lam[:, None] + lam[None, :] - 1.0) <= tol


def sigma2(B, spectrum: Spectrum | None = None, *, tol: float = CRITICAL_TOL) -> np.ndarray:
    """``T^{-T} G T^{-1}`` with ``G_pq = (T'T)_pq 1{lambda_p + lambda_q = 1}``."""
    sp = _spectrum(np.asarray(B, dtype=float), spectrum)
    if abs(sp.eta - 0.5) > tol:
        raise NotCritical(f"eta = {sp.eta:.6g} is not 1/2")
    T = _real_T(sp)
    lam = sp.eigenvalues.real
    G = (T.T @ T) * _pair_indicator(lam, tol)
    Ti = np.linalg.inv(T)
    return _sym(Ti.T @ G @ Ti)


def sigma_lambda(spectrum: Spectrum, j: int, *, tol: float = CRITICAL_TOL) -> float:
    """Limiting variance of projection ``j`` under its natural scaling.

    ``gram / (1 - 2 lam)`` for lam < 1/2, ``gram`` at lam = 1/2 and
    ``Gamma(lam + 2)^2 gram / (2 lam - 1)`` above, with ``gram = (T'T)_jj``.
    """
    T = _real_T(spectrum)
    lam = float(spectrum.eigenvalues[j].real)
    g = float((T.T @ T)[j, j])
    if abs(lam - 0.5) <= tol:
        return g
    if lam < 0.5:
        return g / (1.0 - 2.0 * lam)
    return gamma(lam + 2.0) ** 2 * g / (2.0 * lam - 1.0)


def projection_scaling(lam: float, tol: float = CRITICAL_TOL) -> str:
    if abs(lam - 0.5) <= tol:
        return "sqrt(n log n)"
    if lam < 0.5:
        return "sqrt(n)"
    return "n^(lam - 1/2) * (S_hat_n / d_n - limit)"


@dataclass(frozen=True)
class SubBlocks:
    order: tuple[int, ...]  # eigen-indices, diffusive first then critical
    k1: int
    k2: int
    gram: np.ndarray
    sigma_tilde1: np.ndarray | None
    sigma_tilde2: np.ndarray | None
    sigma1_star: np.ndarray | None

    def to_dict(self) -> dict:
        return {"order": list(self.order), "k1": self.k1, "k2": self.k2,
                "sigma_tilde1": self.sigma_tilde1, "sigma_tilde2": self.sigma_tilde2,
                "sigma1_star": self.sigma1_star}


def sub_block_covariances(spectrum: Spectrum, *, tol: float = CRITICAL_TOL) -> SubBlocks:
    """Covariances of the diffusive and critical projections taken jointly.

    Eigen-indices are permuted so the ``k1`` diffusive projections come first
    and the ``k2`` critical ones next. ``sigma_tilde1`` is returned when no
    critical projection is present, ``sigma_tilde2`` when one is, and
    ``sigma1_star`` (diffusive block alone) whenever ``k1 >= 1``.
    """
    T = _real_T(spectrum)
    lam = spectrum.eigenvalues.real
    diff = [j for j in range(len(lam)) if lam[j] < 0.5 - tol]
    crit = [j for j in range(len(lam)) if abs(lam[j] - 0.5) <= tol]
    order = diff + crit
    if not order:
        raise NoSubCriticalProjections("every projection is super-diffusive")
    G_all = T.T @ T
    G = G_all[np.ix_(order, order)]
    lt = lam[order]
    s1 = s2 = star = None
    if not crit:
        s1 = _sym(G / (1.0 - lt[:, None] - lt[None, :]))
    else:
        s2 = _sym(G * _pair_indicator(lt, tol))
    if diff:
        ld = lam[diff]
        star = _sym(G_all[np.ix_(diff, diff)] / (1.0 - ld[:, None] - ld[None, :]))
    return SubBlocks(order=tuple(order), k1=len(diff), k2=len(crit), gram=_sym(G),
                     sigma_tilde1=s1, sigma_tilde2=s2, sigma1_star=star)


@dataclass(frozen=True)
class Ellipsoid:
    Q: np.ndarray
    scaling: str

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x) <= 1.0

    def to_dict(self) -> dict:
        return {"Q": self.Q, "scaling": self.scaling}


def lil_ellipsoid(Sigma, scaling: str = "sqrt(2 n log log n)") -> Ellipsoid:
    """``{x : x Sigma^{-1} x' <= 1}``, the limit set of the scaled walk."""
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    w = np.linalg.eigvalsh(_sym(S))
    if w.min() <= 1e-12 * max(1.0, w.max()):
        raise Singular("covariance is not positive definite")
    Q = _sym(np.linalg.inv(S))
    if np.abs(S @ Q - np.eye(S.shape[0])).max() > 1e-9:
        raise Singular("covariance inverse is inaccurate")
    return Ellipsoid(Q=Q, scaling=scaling)


# --------------------------------------------------------------------------
# super-diffusive projections

def two_elephant_sigma1(p: float) -> float:
    """Fluctuation constant of the sum projection, ``p > 3/4``."""
    return gamma(2.0 * p + 1.0) / np.sqrt(4.0 * p - 3.0)


def two_elephant_sigma2(p: float) -> float:
    """Fluctuation constant of the difference projection, ``p < 1/4``."""
    return gamma(3.0 - 2.0 * p) / np.sqrt(1.0 - 4.0 * p)


def is_two_elephant(config: WalkConfig) -> bool:
    return (config.k == 2 and set(config.graph.edges) == {(1, 2), (2, 1)}
            and config.p[0] == config.p[1])


@dataclass(frozen=True)
class SuperdiffusiveProjection:
    index: int
    lam: float
    limit_mean: float  # E of the limit of S_hat_n / d_n
    coordinate_mean: np.ndarray  # E of the limit of S_n / d_n contributed by this projection
    fluctuation_variance: float | None

    def to_dict(self) -> dict:
        return {"index": self.index, "lambda": self.lam, "limit_mean": self.limit_mean,
                "coordinate_mean": self.coordinate_mean,
                "fluctuation_variance": self.fluctuation_variance,
                "scaling": "d_n(lambda)"}


def superdiffusive_profile(config: WalkConfig, spectrum: Spectrum | None = None, *,
                           tol: float = CRITICAL_TOL) -> dict:
    """Limit means and fluctuation variances of the super-diffusive projections.

    ``S_hat_n / d_n`` is a martingale from ``n = 2`` on with ``d_2 = 1``, so its
    limit has mean ``E[S_hat_2]``, read off the exact mean recursion.
    """
    B = memory_matrix(config)
    sp = _spectrum(B, spectrum)
    T = sp.require_diagonalizable()
    lam = sp.eigenvalues
    sup = [j for j in range(sp.k) if lam[j].real > 0.5 + tol]
    if not sup:
        raise NotSuperdiffusive("no projection has Re(lambda) > 1/2")
    ES2 = mean_recursion(B, config.q, 2)[2] @ T
    Ti = np.linalg.inv(T)
    out = []
    for j in sup:
        mean_j = ES2[j]
        var = None
        if sp.real_diagonalizable and sp.eta < 1.0 - tol:
            var = sigma_lambda(sp, j, tol=tol)
        out.append(SuperdiffusiveProjection(
            index=j, lam=float(lam[j].real) if abs(lam[j].imag) == 0 else complex(lam[j]),
            limit_mean=float(np.real(mean_j)) if np.isrealobj(T) else complex(mean_j),
            coordinate_mean=np.real_if_close(mean_j * Ti[j]), fluctuation_variance=var))
    res: dict = {"projections": out}
    if is_two_elephant(config):
        p, (q1, q2) = config.p[0], config.q
        if p > 0.75:
            res["sigma_1"] = two_elephant_sigma1(p)
            res["limit_mean_coordinates"] = 2.0 * p * (q1 + q2 - 1.0)
        if p < 0.25:
            res["sigma_2"] = two_elephant_sigma2(p)
            res["limit_mean_coordinates"] = 2.0 * (1.0 - p) * (q1 - q2)
    return res


# --------------------------------------------------------------------------
# finite-n covariance of the comparison Gaussian sum

def finite_n_covariance(B, n: int, *, spectrum: Spectrum | None = None,
                        normalize: str | None = "auto", tol: float = CRITICAL_TOL) -> np.ndarray:
    """``a_n^2 sum_{j<=n} (j/n)^{-B'} (j/n)^{-B}`` in the eigenbasis.

    ``normalize`` is ``"sqrt(n)"``, ``"sqrt(n log n)"``, ``None`` (a_n = 1) or
    ``"auto"`` (chosen from the global regime).
    """
    B = np.asarray(B, dtype=float)
    sp = _spectrum(B, spectrum)
    T = sp.require_diagonalizable()
    lam = sp.eigenvalues
    j = np.arange(1, n + 1, dtype=float)
    logs = np.log(j / n)
    expo = -(lam[:, None] + lam[None, :])
    W = np.exp(np.multiply.outer(expo, logs)).sum(axis=-1)
    Ti = np.linalg.inv(T)
    S = (Ti.T @ ((T.T @ T) * W) @ Ti).real
    if normalize == "auto":
        normalize = "sqrt(n log n)" if abs(sp.eta - 0.5) <= tol else "sqrt(n)"
    if normalize == "sqrt(n)":
        S = S / n
    elif normalize == "sqrt(n log n)":
        S = S / (n * np.log(n))
    elif normalize is not None:
        raise ValueError(f"unknown normalization {normalize!r}")
    return _sym(S)


# --------------------------------------------------------------------------
# report

@dataclass
class LimitReport:
    regime: RegimeLabel
    spectrum: Spectrum
    sigma1: np.ndarray | None = None
    sigma2: np.ndarray | dict | None = None
    sigma_lambda: list = field(default_factory=list)
    sub_cov: SubBlocks | None = None
    superdiff: dict | None = None
    ellipsoids: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.to_dict(),
            "spectrum": self.spectrum.to_dict(),
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "sigma_lambda": self.sigma_lambda,
            "sub_cov": None if self.sub_cov is None else self.sub_cov.to_dict(),
            "superdiff": self.superdiff,
            "ellipsoids": self.ellipsoids,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


def limit_report(config: WalkConfig, *, tol: float = CRITICAL_TOL) -> LimitReport:
    B = memory_matrix(config)
    sp = analyze(B, tol=tol)
    label = classify(sp, tol)
    rep = LimitReport(regime=label, spectrum=sp)
    g = label.global_regime
    if g is Regime.DIFFUSIVE:
        rep.sigma1 = sigma1(B, tol=tol, spectrum=sp)
        rep.ellipsoids["E"] = lil_ellipsoid(rep.sigma1)
    elif g is Regime.CRITICAL:
        try:
            rep.sigma2 = sigma2(B, sp, tol=tol)
            rep.notes.append(f"pairs with lambda_p + lambda_q = 1 detected with tolerance {tol:g}")
        except (NotRealDiagonalizable, Unsupported) as exc:
            rep.sigma2 = {"unsupported": str(exc)}
        except Exception as exc:  # non-diagonalizable
            rep.sigma2 = {"unsupported": f"{type(exc).__name__}: {exc}"}
    if not sp.diagonalizable:
        rep.notes.append("memory matrix not diagonalizable: projection quantities unsupported")
        return rep
    if sp.real_diagonalizable and sp.eta < 1.0 - tol:
        rep.sigma_lambda = [{"index": j, "lambda": float(sp.eigenvalues[j].real),
                             "sigma2": sigma_lambda(sp, j, tol=tol),
                             "scaling": projection_scaling(float(sp.eigenvalues[j].real), tol)}
                            for j in range(sp.k)]
    if sp.real_diagonalizable:
        try:
            rep.sub_cov = sub_block_covariances(sp, tol=tol)
            if rep.sub_cov.sigma1_star is not None:
                rep.ellipsoids["C"] = lil_ellipsoid(rep.sub_cov.sigma1_star)
            if rep.sub_cov.k2:
                crit = np.asarray(rep.sub_cov.order[rep.sub_cov.k1:])
                T = sp.T
                rep.ellipsoids["D"] = lil_ellipsoid(
                    (T.T @ T)[np.ix_(crit, crit)], "sqrt(2 n log n log log log n)")
        except NoSubCriticalProjections:
            pass
    if g is Regime.SUPERDIFFUSIVE:
        rep.superdiff = superdiffusive_profile(config, sp, tol=tol)
    return rep
