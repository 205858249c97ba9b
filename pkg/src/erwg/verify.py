"""Monte Carlo checks of the limit theorems, each reduced to a falsifiable test.

Every check returns a :class:`CheckRecord`. Thresholds sit at four standard
errors or at significance 0.01 with a Bonferroni correction unless a record
says otherwise. Where an exact finite-n oracle exists the simulation is
tested against the oracle first and the oracle against the asymptotic value
second.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.stats
from scipy.special import gamma

from . import __version__
from ._io import dumps
from .errors import MemoryNotOne, NotStronglyConnected, NotSuperdiffusive, RegimeMismatch
from .gaussian_approx import gaussian_comparison, product_bounds_check
from .graph import WalkConfig, memory_matrix, two_elephants
from .limits import sigma1, sigma2, two_elephant_sigma1
from .moments import brute_force_distribution, mean_recursion, second_moment_recursion
from .rng import derive_seed, philox
from .simulator import MomentAccumulator, checkpoint_grid, simulate_ensemble
from .spectral import CRITICAL_TOL, Regime, analyze, classify, d_scale

DEFAULT_SEED = 1234567

DEFAULT_TOLS = {
    "clt_rel": 0.10,  # diffusive covariance, relative Frobenius
    "ks_alpha": 0.01,  # family-wise level for normality of projections
    "critical_oracle_rel": 0.05,
    "critical_limit_rel": 0.25,
    "fluct_rel": 0.20,
    "se_mult": 4.0,
    "slln_exponent": 0.3,
    "slln_p99": 0.07,
    "sync_p99": 0.05,
    "lil_hard": 1.5,
    "lil_soft": 0.5,
    "slope_diffusive": 0.10,
    "slope_critical": 0.15,
    "chi2_alpha": 0.001,
    "symmetry_alpha": 0.001,
    "u1_mean_abs": 0.02,
    "u1_var_min": 0.01,
    "comparison_rel": 0.10,
    "bounds_rel": 0.05,
    "oracle_abs": 1e-10,
}


@dataclass
class CheckRecord:
    name: str
    claim: str
    scaling: str
    statistic: float
    threshold: float
    passed: bool
    stderr: float | None = None
    hard: bool = True
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "claim": self.claim, "scaling": self.scaling,
                "statistic": self.statistic, "threshold": self.threshold,
                "passed": bool(self.passed), "stderr": self.stderr, "hard": self.hard,
                "details": self.details}


@dataclass
class VerificationReport:
    suite: str
    config_hash: str | None
    seed: int
    records: list = field(default_factory=list)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records if r.hard)

    def to_dict(self, runtime: bool = True) -> dict:
        out = {"suite": self.suite, "config_hash": self.config_hash, "seed": self.seed,
               "code_version": __version__, "passed": self.passed,
               "records": [r.to_dict() for r in self.records]}
        if runtime:
            out["runtime_seconds"] = self.runtime
        return out

    def to_json(self, runtime: bool = True) -> str:
        return dumps(self.to_dict(runtime))

    def table(self) -> str:
        lines = [f"suite {self.suite}  config {self.config_hash}  seed {self.seed}",
                 f"{'check':<34} {'statistic':>12} {'threshold':>12}  result"]
        for r in self.records:
            tag = ("PASS" if r.passed else "FAIL") + ("" if r.hard else " (soft)")
            lines.append(f"{r.name:<34} {r.statistic:>12.5g} {r.threshold:>12.5g}  {tag}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}  ({self.runtime:.1f} s)")
        return "\n".join(lines)


def _tols(overrides):
    t = dict(DEFAULT_TOLS)
    if overrides:
        unknown = set(overrides) - set(t)
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        t.update({k: float(v) for k, v in overrides.items()})
    return t


def rel_frobenius(A, B) -> float:
    return float(np.linalg.norm(np.asarray(A) - np.asarray(B)) / np.linalg.norm(B))


def _jittered(S, seed, label):
    # spread the lattice mass uniformly over each cell so KS sees a continuous law
    rng = philox(seed, "jitter", label)
    return S + rng.uniform(-1.0, 1.0, size=S.shape)


def ks_projection_pvalues(S, T, seed: int, label: str = "") -> list[float]:
    """Two-sided KS p-values of each standardized eigen-projection against N(0, 1)."""
    Y = _jittered(np.asarray(S, dtype=float), seed, label) @ np.real(T)
    Z = (Y - Y.mean(axis=0)) / Y.std(axis=0, ddof=1)
    return [float(scipy.stats.kstest(Z[:, j], "norm").pvalue) for j in range(Z.shape[1])]


def _scale(n: int, scaling: str) -> float:
    if scaling == "sqrt(n)":
        return float(np.sqrt(n))
    if scaling == "sqrt(n log n)":
        return float(np.sqrt(n * np.log(n)))
    raise ValueError(f"unknown scaling {scaling!r}")


# --------------------------------------------------------------------------
# oracle

def oracle_check(configs=None, n_max: int = 6, tol: float = 1e-10) -> CheckRecord:
    """Brute-force enumeration against both moment recursions."""
    if configs is None:
        configs = [two_elephants(p, q1, q2) for p in (0, .25, .5, .6, .75, .9, 1)
                   for q1 in (0, .5, 1) for q2 in (0, .5, 1)]
    worst = 0.0
    for c in configs:
        B = memory_matrix(c)
        mu = mean_recursion(B, c.q, n_max)
        M = second_moment_recursion(B, c.q, n_max)
        for n in range(1, n_max + 1):
            law = brute_force_distribution(c, n)
            worst = max(worst, float(np.abs(law.mean - mu[n]).max()),
                        float(np.abs(law.second_moment - M[n]).max()),
                        abs(float(law.probs.sum()) - 1.0))
    return CheckRecord("oracle_exactness", "exact enumeration equals the moment recursions",
                       "none", worst, tol, worst <= tol,
                       details={"configs": len(configs), "n_max": n_max})


def closed_form_mean_check(p_grid=(0, .25, .5, .6, .75, .9, 1), n_max: int = 1000,
                           tol: float = 1e-10, coefficient: str = "derived") -> CheckRecord:
    """Two-elephant mean of the sum and difference against gamma-ratio closed forms.

    ``coefficient="derived"`` uses ``4p`` and ``4(1-p)``, obtained from one step
    of the mean recursion. ``coefficient="printed"`` uses ``2(2p-1)`` and
    ``2(1-2p)`` instead.
    """
    n = np.arange(2, n_max + 1)
    worst = 0.0
    for p in p_grid:
        for q1 in (0, .5, 1):
            for q2 in (0, .5, 1):
                c = two_elephants(p, q1, q2)
                mu = mean_recursion(memory_matrix(c), c.q, n_max)[2:]
                if coefficient == "derived":
                    a, b = 4 * p, 4 * (1 - p)
                else:
                    a, b = 2 * (2 * p - 1), 2 * (1 - 2 * p)
                s = a * (q1 + q2 - 1) * d_scale(2 * p - 1, n)
                d = b * (q1 - q2) * d_scale(1 - 2 * p, n)
                for got, want in ((mu[:, 0] + mu[:, 1], s), (mu[:, 0] - mu[:, 1], d)):
                    err = np.abs(got - want) / np.maximum(1.0, np.abs(want))
                    worst = max(worst, float(err.max()))
    return CheckRecord(f"closed_form_means[{coefficient}]",
                       "sum/difference means scale with the gamma ratio of each eigenvalue",
                       "d_n(lambda)", worst, tol, worst <= tol,
                       details={"n_max": n_max, "error": "|a-b| / max(1, |b|)"})


# --------------------------------------------------------------------------
# CLT checks

def clt_covariance_check(config: WalkConfig, scaling: str, Sigma_theory, n: int, R: int,
                         tol: float = 0.10, *, seed: int = DEFAULT_SEED, workers: int = 1,
                         ks_alpha: float = 0.01, ensemble=None) -> CheckRecord:
    """Covariance of ``S_n / a_n`` against a target, plus KS normality of projections."""
    B = memory_matrix(config)
    sp = analyze(B)
    g = classify(sp).global_regime
    need = {"sqrt(n)": Regime.DIFFUSIVE, "sqrt(n log n)": Regime.CRITICAL}[scaling]
    if g is not need:
        raise RegimeMismatch(f"scaling {scaling} needs a {need.value} walk, got {g.value}")
    s = derive_seed(seed, "clt", scaling)
    if ensemble is None:
        ensemble = simulate_ensemble(config, R, n, s, checkpoints=[n], workers=workers)
    Sn = ensemble.at(n)
    acc = MomentAccumulator.from_samples(Sn)
    a2 = _scale(n, scaling) ** 2
    cov = acc.cov() / a2
    err = rel_frobenius(cov, Sigma_theory)
    T = sp.require_diagonalizable()
    pv = ks_projection_pvalues(Sn, T, s, "clt")
    level = ks_alpha / len(pv)
    ok = err <= tol and min(pv) > level
    return CheckRecord(
        "clt_covariance", f"S_n/{scaling} is asymptotically centred normal with the given covariance",
        scaling, err, tol, ok, stderr=float(np.sqrt(2.0 / R)),
        details={"n": n, "replicas": R, "empirical_cov": cov, "target": np.asarray(Sigma_theory),
                 "ks_pvalues": pv, "ks_level_each": level,
                 "second_moment": acc.second_moment() / a2})


def critical_clt_check(config: WalkConfig, n: int, R: int, *, seed: int = DEFAULT_SEED,
                       workers: int = 1, tols=None) -> CheckRecord:
    """Critical walk: simulation vs exact oracle (tight), oracle vs limit (loose)."""
    t = _tols(tols)
    B = memory_matrix(config)
    sp = analyze(B)
    if classify(sp).global_regime is not Regime.CRITICAL:
        raise RegimeMismatch("critical check needs eta = 1/2")
    S2 = sigma2(B, sp)
    s = derive_seed(seed, "critical")
    ens = simulate_ensemble(config, R, n, s, checkpoints=[n], workers=workers)
    a2 = n * np.log(n)
    acc = MomentAccumulator.from_samples(ens.at(n))
    emp = acc.second_moment() / a2
    M = second_moment_recursion(B, config.q, n)
    oracle = M[n] / a2
    e1 = rel_frobenius(emp, oracle)
    e2 = rel_frobenius(oracle, S2)
    grid = np.unique(np.geomspace(100, n, 12).astype(int))
    gaps = np.array([rel_frobenius(M[m] / (m * np.log(m)), S2) for m in grid])
    slope = float(np.polyfit(np.log(grid), np.log(gaps), 1)[0])
    ok = e1 <= t["critical_oracle_rel"] and e2 <= t["critical_limit_rel"] and slope < 0
    pv = ks_projection_pvalues(ens.at(n), sp.T, s, "critical")
    return CheckRecord(
        "critical_clt", "S_n/sqrt(n log n) converges to the critical covariance",
        "sqrt(n log n)", e1, t["critical_oracle_rel"], ok, stderr=float(np.sqrt(2.0 / R)),
        details={"n": n, "replicas": R, "empirical": emp, "oracle": oracle, "limit": S2,
                 "oracle_vs_limit": e2, "oracle_vs_limit_threshold": t["critical_limit_rel"],
                 "gap_log_slope": slope, "gap_grid": grid, "gaps": gaps,
                 "ks_pvalues_diagnostic": pv})


def comparison_check(config: WalkConfig, n: int, R: int, tol: float = 0.10, *,
                     seed: int = DEFAULT_SEED, workers: int = 1) -> CheckRecord:
    """Walk covariance against the comparison Gaussian sum at the same ``n``."""
    B = memory_matrix(config)
    s = derive_seed(seed, "comparison")
    ens = simulate_ensemble(config, R, n, s, checkpoints=[n], workers=workers)
    walk = MomentAccumulator.from_samples(ens.at(n)).cov() / n
    G = gaussian_comparison(B, n, R, s)
    gcov = np.cov(G.G.T) / n
    err = rel_frobenius(walk, gcov)
    exact_err = rel_frobenius(gcov, G.exact_cov / n)
    return CheckRecord(
        "gaussian_comparison", "the walk and the comparison Gaussian sum share their covariance",
        "sqrt(n)", err, tol, err <= tol and exact_err <= 4.0 / np.sqrt(R),
        details={"walk_cov": walk, "gaussian_cov": gcov, "exact_cov": G.exact_cov / n,
                 "gaussian_vs_exact": exact_err, "gaussian_vs_exact_threshold": 4.0 / np.sqrt(R)})


# --------------------------------------------------------------------------
# laws of large numbers

def slln_check(config: WalkConfig, n: int, R: int, *, seed: int = DEFAULT_SEED, workers: int = 1,
               tols=None) -> CheckRecord:
    """``S_n / n -> 0`` under an explicit envelope (or the d_n / n scale when eta > 1/2)."""
    t = _tols(tols)
    B = memory_matrix(config)
    sp = analyze(B)
    ck = checkpoint_grid(n, start=100)
    ens = simulate_ensemble(config, R, n, derive_seed(seed, "slln"), checkpoints=ck,
                            workers=workers)
    norms = np.linalg.norm(ens.S, axis=2) / ck[None, :]
    if sp.eta <= 0.5 + CRITICAL_TOL:
        sel = ck >= min(10_000, n)
        env = ck[sel] ** (-t["slln_exponent"])
        worst = float((norms[:, sel].max(axis=0) / env).max())
        p99 = float(np.quantile(norms[:, -1], 0.99))
        ok = worst <= 1.0 and (n != 10_000 or p99 <= t["slln_p99"])
        return CheckRecord("slln", "S_n/n vanishes faster than n^-0.3", "n", worst, 1.0, ok,
                           details={"p99_at_horizon": p99, "p99_threshold": t["slln_p99"],
                                    "checkpoints": ck[sel]})
    # super-diffusive: ||S_n|| tracks d_n(eta), so S_n/n does not vanish at rate n^-1/2
    d = d_scale(sp.eta, ck)
    r = np.linalg.norm(ens.S, axis=2) / d[None, :]
    med = np.median(r, axis=0)
    half = np.searchsorted(ck, n // 10)
    drift = float(med[-1] / med[half])
    rate = float(np.median(norms[:, -1]) * np.sqrt(n))
    ok = 0.8 <= drift <= 1.25 and rate > 10.0
    return CheckRecord("slln_superdiffusive", "||S_n|| grows like d_n(eta), not sqrt(n)",
                       "d_n(eta)", drift, 1.25, ok,
                       details={"median_ratio_by_checkpoint": med, "checkpoints": ck,
                                "median_norm_times_sqrt_n": rate})


# --------------------------------------------------------------------------
# super-diffusive limits

def superdiffusive_limit_check(config: WalkConfig, horizon: int, R: int, *,
                               seed: int = DEFAULT_SEED, workers: int = 1, tols=None,
                               fluct_ratio: int = 100) -> CheckRecord:
    """Two-elephant walk with ``p > 3/4``: the limit of ``S_n / d_n`` and its fluctuations.

    The limit is proxied per replica by ``(s^1_N + s^2_N) / (2 d_N)`` at the
    horizon ``N``. Fluctuations are read at the largest checkpoint
    ``n <= N / fluct_ratio``.
    """
    t = _tols(tols)
    B = memory_matrix(config)
    sp = analyze(B)
    if sp.eta <= 0.5 + CRITICAL_TOL:
        raise NotSuperdiffusive("needs eta > 1/2")
    p = config.p[0]
    lam = 2 * p - 1
    ck = checkpoint_grid(horizon, start=10)
    ens = simulate_ensemble(config, R, horizon, derive_seed(seed, "superdiffusive"),
                            checkpoints=ck, workers=workers)
    d = d_scale(lam, ck)
    Y = ens.S / d[None, :, None]
    proxy = Y[:, -1, :].mean(axis=1)
    m = float(proxy.mean())
    se = float(proxy.std(ddof=1) / np.sqrt(R))
    q1, q2 = config.q
    target = 2 * p * (q1 + q2 - 1)
    mean_ok = abs(m - target) <= t["se_mult"] * se
    var = float(proxy.var(ddof=1))
    c = proxy - proxy.mean()
    var_se = float(np.sqrt(max(np.mean(c ** 4) - var ** 2, 0.0) / R))
    var_ok = var - t["se_mult"] * var_se > 0

    inc = np.mean(np.sum(np.diff(Y, axis=1) ** 2, axis=2), axis=0)
    start = np.searchsorted(ck[1:], 100)
    cauchy_ok = bool(np.all(np.diff(inc[start:]) < 0))

    idx = int(np.searchsorted(ck, horizon // fluct_ratio, side="right") - 1)
    n = int(ck[idx])
    F = n ** (lam - 0.5) * (Y[:, idx, :] - proxy[:, None])
    fcov = np.cov(F.T)
    s1 = two_elephant_sigma1(p)
    target_cov = 0.5 * s1 ** 2 * np.ones((2, 2))
    ferr = rel_frobenius(fcov, target_cov)
    # finite-horizon prediction: the proxy removes part of the tail, and the
    # diffusive difference projection enters at the same order
    shrink = 1.0 - (n / horizon) ** (2 * lam - 1)
    extra = gamma(2 * p + 1) ** 2 / (2 * (4 * p - 1))
    predicted = shrink * target_cov + extra * np.array([[1.0, -1.0], [-1.0, 1.0]])
    ok = mean_ok and var_ok and cauchy_ok and ferr <= t["fluct_rel"]
    return CheckRecord(
        "superdiffusive_limit", "S_n/d_n converges to a random limit with Gaussian fluctuations",
        "d_n(2p-1)", ferr, t["fluct_rel"], ok, stderr=se,
        details={"limit_mean": m, "limit_mean_target": target, "limit_mean_ok": mean_ok,
                 "limit_var": var, "limit_var_se": var_se, "limit_var_ok": var_ok,
                 "cauchy_increments": inc, "cauchy_ok": cauchy_ok,
                 "fluctuation_n": n, "fluctuation_cov": fcov, "fluctuation_target": target_cov,
                 "fluctuation_rel_error": ferr,
                 "finite_horizon_prediction": predicted,
                 "error_vs_prediction": rel_frobenius(fcov, predicted)})


def eta_one_limit_check(R: int = 50_000, horizon: int = 5000, *, seed: int = DEFAULT_SEED,
                          workers: int = 1, tols=None) -> CheckRecord:
    """Two elephants with ``p = 1`` started from disagreeing first steps.

    ``V_n = (s^1_n + s^2_n) / (2n)`` is a bounded martingale; its limit has mean
    zero, positive variance and lives in ``(-1, 1)``. Starting from the mirrored
    first steps must give the negated law.
    """
    t = _tols(tols)
    c = two_elephants(1.0)
    a = simulate_ensemble(c, R, horizon, derive_seed(seed, "eta1", "+-"), checkpoints=[horizon],
                          first_step=(1, -1), workers=workers)
    b = simulate_ensemble(c, R, horizon, derive_seed(seed, "eta1", "-+"), checkpoints=[horizon],
                          first_step=(-1, 1), workers=workers)
    U = a.at(horizon).sum(axis=1) / (2.0 * horizon)
    Um = b.at(horizon).sum(axis=1) / (2.0 * horizon)
    m = float(U.mean())
    se = float(U.std(ddof=1) / np.sqrt(R))
    var = float(U.var(ddof=1))
    inside = bool(np.all(np.abs(U) < 1.0) and np.all(np.abs(Um) < 1.0))
    ks = float(scipy.stats.ks_2samp(U, -Um).pvalue)
    ok = abs(m) <= t["u1_mean_abs"] and inside and var > t["u1_var_min"] and ks > t["symmetry_alpha"]
    return CheckRecord(
        "eta_one_limit", "(s1+s2)/(2n) converges to a centred law inside (-1, 1), symmetric in the start",
        "n", abs(m), t["u1_mean_abs"], ok, stderr=se,
        details={"mean": m, "mean_within_4se": abs(m) <= t["se_mult"] * se, "variance": var,
                 "all_inside": inside, "symmetry_ks_pvalue": ks, "replicas": R,
                 "horizon": horizon})


def synchronization_check(config: WalkConfig, n: int, R: int, *, seed: int = DEFAULT_SEED,
                          workers: int = 1, tols=None) -> CheckRecord:
    """Full-memory walk on a strongly connected graph: positions per step merge.

    For two elephants the run is conditioned on disagreeing first steps by
    forcing them, with each ordering weighted by its probability under ``q``.
    Otherwise the run is unconditioned and the consensus-start replicas are
    reported separately.
    """
    t = _tols(tols)
    if not config.graph.is_strongly_connected():
        raise NotStronglyConnected("synchronization needs a strongly connected graph")
    if any(p != 1.0 for p in config.p):
        raise MemoryNotOne("synchronization needs p_j = 1 for every vertex")
    ck = checkpoint_grid(n, start=100)
    k = config.k
    s = derive_seed(seed, "sync")
    if k == 2:
        q1, q2 = config.q
        w1, w2 = q1 * (1 - q2), (1 - q1) * q2
        if w1 + w2 == 0:
            raise ValueError("first steps can never disagree under this q")
        R1 = int(round(R * w1 / (w1 + w2)))
        parts = []
        if R1:
            parts.append(simulate_ensemble(config, R1, n, derive_seed(s, "+-"), checkpoints=ck,
                                           first_step=(1, -1), workers=workers).S)
        if R - R1:
            parts.append(simulate_ensemble(config, R - R1, n, derive_seed(s, "-+"),
                                           checkpoints=ck, first_step=(-1, 1), workers=workers).S)
        S = np.concatenate(parts)
        consensus = np.zeros(R, dtype=bool)
    else:
        ens = simulate_ensemble(config, R, n, s, checkpoints=ck, workers=workers)
        S = ens.S
        first = simulate_ensemble(config, R, 1, s, checkpoints=[1]).S[:, 0, :]
        consensus = np.all(first == first[:, :1], axis=1)
    Z = S / ck[None, :, None]
    spread = np.abs(Z - Z.mean(axis=2, keepdims=True)).max(axis=2)
    mixed = ~consensus
    if k == 1:
        mixed = np.ones(R, dtype=bool)
    p99 = np.quantile(spread[mixed], 0.99, axis=0) if mixed.any() else np.zeros(len(ck))
    env = ck ** (-t["slln_exponent"])
    sel = ck >= min(1000, n)
    env_ok = bool(np.all(p99[sel] <= env[sel]))
    last = float(p99[-1])
    fixed_ok = n != 10_000 or last <= t["sync_p99"]
    common = Z[:, -1, :].mean(axis=1)
    inside = float(np.mean(np.abs(common[mixed & ~consensus]) < 1.0)) if k > 1 and (
        mixed & ~consensus).any() else 1.0
    ok = env_ok and fixed_ok and inside == 1.0
    return CheckRecord(
        "synchronization", "all elephants share one limiting speed strictly inside (-1, 1)",
        "n", last, t["sync_p99"], ok,
        details={"checkpoints": ck, "spread_p99": p99, "envelope": env,
                 "fraction_inside": inside, "consensus_replicas": int(consensus.sum()),
                 "consensus_spread_p99": (float(np.quantile(spread[consensus, -1], 0.99))
                                          if consensus.any() else None)})


# --------------------------------------------------------------------------
# LIL envelope

def lil_envelope_diagnostic(config: WalkConfig, Sigma, long_horizon: int = 10_000_000, *,
                            seed: int = DEFAULT_SEED, scaling: str = "sqrt(2 n log log n)",
                            hard_from: int = 100_000, start: int = 1000, tols=None,
                            projection=None) -> CheckRecord:
    """One long trajectory against the LIL ellipsoid ``{x : x Sigma^-1 x' <= 1}``.

    Hard: ``max r_n <= 1.5`` at checkpoints ``n >= hard_from``. Soft: some
    ``r_n >= 0.5``, which finite horizons may miss because the iterated
    logarithm grows so slowly. ``projection`` (a ``k x m`` matrix) restricts
    to projected coordinates before scaling.
    """
    t = _tols(tols)
    ck = checkpoint_grid(long_horizon, start=start)
    ens = simulate_ensemble(config, 1, long_horizon, derive_seed(seed, "lil"), checkpoints=ck)
    n = ck.astype(float)
    X = ens.S[0].astype(float)
    if projection is not None:
        X = X @ np.asarray(projection)
    if scaling == "sqrt(2 n log log n)":
        a = np.sqrt(2 * n * np.log(np.log(n)))
    elif scaling == "sqrt(2 n log n log log log n)":
        a = np.sqrt(2 * n * np.log(n) * np.log(np.log(np.log(n))))
    else:
        raise ValueError(f"unknown scaling {scaling!r}")
    x = X / a[:, None]
    Q = np.linalg.inv(np.atleast_2d(Sigma))
    r = np.einsum("ca,ab,cb->c", x, Q, x)
    sel = ck >= hard_from
    hard = float(r[sel].max())
    soft = float(r.max())
    return CheckRecord(
        "lil_envelope", "the scaled walk eventually stays inside the LIL ellipsoid", scaling,
        hard, t["lil_hard"], hard <= t["lil_hard"],
        details={"soft_max": soft, "soft_threshold": t["lil_soft"],
                 "soft_reached": soft >= t["lil_soft"], "checkpoints": ck, "r": r,
                 "hard_from": hard_from})


# --------------------------------------------------------------------------
# moments, mechanisms, bounds

def moment_slope_check(config: WalkConfig, m: int, j: int, *, horizon: int = 20_000,
                       R: int = 4000, seed: int = DEFAULT_SEED, workers: int = 1,
                       tols=None) -> CheckRecord:
    """Log-log slope of ``E|S_hat_n^(j)|^m`` over checkpoints."""
    t = _tols(tols)
    if m not in (1, 2, 4):
        raise ValueError("m must be 1, 2 or 4")
    B = memory_matrix(config)
    sp = analyze(B)
    T = sp.require_diagonalizable()
    lam = float(sp.eigenvalues[j].real)
    ck = checkpoint_grid(horizon, start=100)
    ens = simulate_ensemble(config, R, horizon, derive_seed(seed, "slope", m, j),
                            checkpoints=ck, workers=workers)
    P = np.abs(ens.S @ np.real(T)[:, j])
    mom = np.mean(P.astype(float) ** m, axis=0)
    n = ck.astype(float)
    if abs(lam - 0.5) <= CRITICAL_TOL:
        y, tol, scaling = np.log(mom / np.log(n) ** (m / 2)), t["slope_critical"], "n log n"
    elif lam < 0.5:
        y, tol, scaling = np.log(mom), t["slope_diffusive"], "n"
    else:
        raise RegimeMismatch("moment slopes apply to diffusive or critical projections")
    slope = float(np.polyfit(np.log(n), y, 1)[0])
    dev = abs(slope - m / 2)
    return CheckRecord(f"moment_slope[m={m},j={j}]", "E|S_hat|^m grows like a_n^m", scaling,
                       dev, tol, dev <= tol, details={"slope": slope, "expected": m / 2})


def mechanism_equivalence_check(config: WalkConfig, n: int = 200, R: int = 200_000, *,
                                seed: int = DEFAULT_SEED, workers: int = 1,
                                tols=None) -> CheckRecord:
    """Chi-square contingency test of ``S_n`` between the two samplers."""
    t = _tols(tols)
    s = derive_seed(seed, "mechanisms")
    a = simulate_ensemble(config, R, n, derive_seed(s, "literal"), checkpoints=[n],
                          mechanism="literal", workers=workers).at(n)
    b = simulate_ensemble(config, R, n, derive_seed(s, "conditional"), checkpoints=[n],
                          mechanism="conditional", workers=workers).at(n)
    both = np.concatenate([a, b])
    cells, inv = np.unique(both, axis=0, return_inverse=True)
    inv = inv.ravel()
    ca = np.bincount(inv[:R], minlength=len(cells))
    cb = np.bincount(inv[R:], minlength=len(cells))
    # pool sparse cells (expected count < 5 in either row) into one bin
    small = (ca + cb) / 2.0 < 5
    table = np.vstack([ca[~small], cb[~small]])
    if small.any():
        table = np.hstack([table, [[ca[small].sum()], [cb[small].sum()]]])
    res = scipy.stats.chi2_contingency(table, correction=False)
    pval = float(res.pvalue)
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    se_m = np.sqrt(a.var(axis=0, ddof=1) / R + b.var(axis=0, ddof=1) / R)
    mean_ok = bool(np.all(np.abs(ma - mb) <= t["se_mult"] * se_m))
    Ca, Cb = np.cov(a.T), np.cov(b.T)
    # rough standard error of a covariance entry under near-normality
    sa = np.sqrt((Ca * Ca + np.outer(np.diag(Ca), np.diag(Ca))) / R)
    sb = np.sqrt((Cb * Cb + np.outer(np.diag(Cb), np.diag(Cb))) / R)
    cov_ok = bool(np.all(np.abs(Ca - Cb) <= t["se_mult"] * np.sqrt(sa ** 2 + sb ** 2)))
    return CheckRecord(
        "mechanism_equivalence", "the memory mechanism and the conditional sampler agree in law",
        "none", pval, t["chi2_alpha"], pval > t["chi2_alpha"],
        details={"n": n, "replicas": R, "cells": int(table.shape[1]), "dof": int(res.dof),
                 "mean_ok": mean_ok, "cov_ok": cov_ok, "mean_literal": ma,
                 "mean_conditional": mb, "cov_literal": Ca, "cov_conditional": Cb})


def bounds_check(N_small: int = 1000, N_large: int = 2000, *, rel: float = 0.05,
                 backend=None) -> tuple[list[CheckRecord], object]:
    rep = product_bounds_check(N_small=N_small, N_large=N_large, backend=backend)
    recs = []
    for bound in ("scalar-1", "scalar-2", "scalar-3", "matrix-1", "matrix-2", "matrix-3"):
        rows = [r for r in rep.rows if r.bound == bound]
        bad = [r for r in rows if not r.stable(rel)]
        w = max(rows, key=lambda r: abs(r.growth - 1.0))
        recs.append(CheckRecord(
            f"bound_{bound}", "fitted constant is the same on both grid sizes",
            f"N={N_small} vs N={N_large}", abs(w.growth - 1.0), rel, not bad,
            details={"unstable": len(bad), "total": len(rows), "worst_subject": w.subject,
                     "worst_constants": [w.c_small, w.c_large]}))
    return recs, rep


# --------------------------------------------------------------------------
# suites

SUITES = ("oracle", "diffusive-clt", "critical-clt", "superdiffusive", "lil", "synchronization",
          "bounds", "all")


def _canon(name: str) -> WalkConfig:
    return {"diffusive": two_elephants(0.6), "critical": two_elephants(0.75),
            "superdiffusive": two_elephants(0.9, 1.0, 1.0), "sync": two_elephants(1.0)}[name]


def run_suite(suite: str, config: WalkConfig | None = None, *, seed: int = DEFAULT_SEED,
              replicas: int | None = None, horizon: int | None = None, workers: int = 1,
              tols=None) -> VerificationReport:
    """Run a named suite. Without ``config`` each suite uses its canonical two-elephant walk."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
    t = _tols(tols)
    names = [s for s in SUITES if s != "all"] if suite == "all" else [suite]
    rep = VerificationReport(suite=suite, config_hash=None if config is None else
                             config.config_hash(), seed=seed)
    t0 = time.perf_counter()
    for name in names:
        rep.records.extend(_run_one(name, config, seed, replicas, horizon, workers, t))
    rep.runtime = time.perf_counter() - t0
    return rep


def _guard(fn, name):
    try:
        return fn()
    except (RegimeMismatch, NotSuperdiffusive, NotStronglyConnected, MemoryNotOne) as exc:
        return [CheckRecord(name, "precondition", "none", float("nan"), float("nan"), False,
                            details={"error": f"{type(exc).__name__}: {exc}"})]


def _run_one(name, config, seed, replicas, horizon, workers, t):
    kw = {"seed": seed, "workers": workers}
    if name == "oracle":
        return [oracle_check(tol=t["oracle_abs"]), closed_form_mean_check(tol=t["oracle_abs"])]
    if name == "diffusive-clt":
        c = config or _canon("diffusive")
        n, R = horizon or 5000, replicas or 20_000

        def go():
            S = sigma1(memory_matrix(c))
            return [clt_covariance_check(c, "sqrt(n)", S, n, R, t["clt_rel"],
                                         ks_alpha=t["ks_alpha"], **kw),
                    slln_check(c, max(n, 10_000), min(R, 5000), tols=t, **kw),
                    moment_slope_check(c, 2, 0, tols=t, **kw),
                    comparison_check(c, n, R, t["comparison_rel"], **kw)]
        return _guard(go, "diffusive-clt")
    if name == "critical-clt":
        c = config or _canon("critical")
        n, R = horizon or 10_000, replicas or 20_000

        def go():
            sp = analyze(memory_matrix(c))
            crit = [j for j, z in enumerate(sp.eigenvalues) if abs(z.real - 0.5) <= CRITICAL_TOL]
            recs = [critical_clt_check(c, n, R, tols=t, **kw)]
            if crit:
                recs.append(moment_slope_check(c, 2, crit[0], tols=t, **kw))
            return recs
        return _guard(go, "critical-clt")
    if name == "superdiffusive":
        c = config or _canon("superdiffusive")
        n, R = horizon or 100_000, replicas or 20_000
        return _guard(lambda: [superdiffusive_limit_check(c, n, R, tols=t, **kw),
                               slln_check(c, n, min(R, 5000), tols=t, **kw)], "superdiffusive")
    if name == "lil":
        c = config or _canon("diffusive")
        n = horizon or 10_000_000

        def go():
            S = sigma1(memory_matrix(c))
            rec = lil_envelope_diagnostic(c, S, n, seed=seed, tols=t)
            neg = lil_envelope_diagnostic(c, S / 2.0, n, seed=seed, tols=t)
            ctrl = CheckRecord("lil_negative_control", "halving Sigma must break the envelope",
                               rec.scaling, neg.statistic, t["lil_hard"], not neg.passed,
                               details={"max_r_halved": neg.statistic})
            soft = CheckRecord("lil_soft_coverage", "the walk approaches the ellipsoid boundary",
                               rec.scaling, rec.details["soft_max"], t["lil_soft"],
                               rec.details["soft_reached"], hard=False)
            return [rec, ctrl, soft]
        return _guard(go, "lil")
    if name == "synchronization":
        c = config or _canon("sync")
        n, R = horizon or 10_000, replicas or 5000
        recs = _guard(lambda: [synchronization_check(c, n, R, tols=t, **kw)], "synchronization")
        if config is None:
            recs.append(eta_one_limit_check(replicas or 50_000, 5000, tols=t, **kw))
        return recs
    if name == "bounds":
        recs, _ = bounds_check(rel=t["bounds_rel"])
        return recs
    raise ValueError(name)
