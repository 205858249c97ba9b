"""ERWG trajectory generation, projections and the stochastic-approximation view.

Two samplers share one random-stream contract (see :mod:`erwg.rng`):

* ``literal`` follows the memory mechanism step by step: pick a uniform
  in-neighbour, a uniform past time, and repeat or flip that step. It keeps the
  whole step history.
* ``conditional`` uses the fact that, given the past, the next steps are
  independent Rademacher variables with ``P(+1) = 1/2 + (S_n B)_j / (2n)``.
  It needs O(k) memory and is the default for long horizons.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import run_conditional, run_literal
from .errors import NotDiagonalizable, ProbabilityOutOfRange
from .graph import WalkConfig, memory_matrix
from .rng import replica_keys
from .spectral import Spectrum, d_scale

MECHANISMS = ("conditional", "literal")
CHUNK = 2048


def checkpoint_grid(horizon: int, start: int = 10, ratio: float = 1.25) -> np.ndarray:
    """``{floor(start * ratio**m)}`` clipped to ``[1, horizon]``, plus the horizon."""
    horizon = int(horizon)
    pts = []
    x = float(start)
    while x < horizon:
        pts.append(int(np.floor(x)))
        x *= ratio
    pts.append(horizon)
    return np.unique(np.asarray([p for p in pts if p >= 1], dtype=np.int64))


def _first_step(config: WalkConfig, first_step):
    if first_step is None:
        return np.zeros(config.k, dtype=np.int64), False
    first = np.asarray(first_step, dtype=np.int64)
    if first.shape != (config.k,) or not np.all(np.abs(first) == 1):
        raise ValueError("first_step must be a length-k vector of +-1")
    return first, True


def _run(config, keys, horizon, ckpts, mechanism, first_step, backend):
    first, forced = _first_step(config, first_step)
    q = np.asarray(config.q)
    if mechanism == "conditional":
        out, bad = run_conditional(keys, memory_matrix(config), q, first, forced,
                                   horizon, ckpts, backend=backend)
        if bad.any():
            raise ProbabilityOutOfRange(
                "conditional step probability left [0, 1]; memory matrix violates the column bound")
        return out
    if mechanism == "literal":
        nbr, deg = config.graph.neighbour_table()
        out, _ = run_literal(keys, np.asarray(config.p), q, nbr, deg, first, forced,
                             horizon, ckpts, backend=backend)
        return out
    raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")


@dataclass(frozen=True)
class Trajectory:
    config: WalkConfig
    seed: int
    horizon: int
    S: np.ndarray  # (horizon + 1, k), row n is S_n
    mechanism: str = "conditional"

    @property
    def X(self) -> np.ndarray:
        return np.diff(self.S, axis=0)

    def check(self) -> None:
        S = self.S
        n = np.arange(S.shape[0])[:, None]
        assert np.all(S[0] == 0)
        assert np.all(np.abs(np.diff(S, axis=0)) == 1)
        assert np.all(np.abs(S) <= n)
        assert np.all((S + n) % 2 == 0)


def _simulate(config, seed, horizon, mechanism, first_step, backend) -> Trajectory:
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    keys = replica_keys(seed, 1)
    ckpts = np.arange(1, horizon + 1, dtype=np.int64)
    path = _run(config, keys, horizon, ckpts, mechanism, first_step, backend)[0]
    S = np.vstack([np.zeros((1, config.k), dtype=np.int64), path])
    return Trajectory(config=config, seed=int(seed), horizon=horizon, S=S, mechanism=mechanism)


def simulate_literal(config: WalkConfig, seed: int, horizon: int, *, first_step=None,
                     backend: str | None = None) -> Trajectory:
    return _simulate(config, seed, horizon, "literal", first_step, backend)


def simulate_conditional(config: WalkConfig, seed: int, horizon: int, *, first_step=None,
                         backend: str | None = None) -> Trajectory:
    return _simulate(config, seed, horizon, "conditional", first_step, backend)


# --------------------------------------------------------------------------
# ensembles

@dataclass(frozen=True)
class Ensemble:
    config: WalkConfig
    master_seed: int
    horizon: int
    checkpoints: np.ndarray
    S: np.ndarray  # (R, C, k)
    mechanism: str = "conditional"
    first_step: tuple | None = None

    @property
    def replicas(self) -> int:
        return self.S.shape[0]

    def at(self, n: int) -> np.ndarray:
        idx = np.searchsorted(self.checkpoints, n)
        if idx >= len(self.checkpoints) or self.checkpoints[idx] != n:
            raise KeyError(f"n={n} is not a checkpoint")
        return self.S[:, idx, :]

    def metadata(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "master_seed": int(self.master_seed),
            "replicas": int(self.replicas),
            "horizon": int(self.horizon),
            "checkpoints": [int(c) for c in self.checkpoints],
            "mechanism": self.mechanism,
            "first_step": None if self.first_step is None else list(self.first_step),
            "code_version": __version__,
        }

    def to_csv(self, path: str | Path) -> None:
        R, C, k = self.S.shape
        rep = np.repeat(np.arange(R), C)
        nn = np.tile(self.checkpoints, R)
        with open(path, "w") as fh:
            fh.write(",".join(["replica", "n"] + [f"S_{j + 1}" for j in range(k)]) + "\n")
            rows = np.column_stack([rep, nn, self.S.reshape(R * C, k)])
            np.savetxt(fh, rows, fmt="%d", delimiter=",")

    def write(self, out_dir: str | Path, stem: str = "ensemble") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, meta_path = out / f"{stem}.csv", out / f"{stem}.json"
        self.to_csv(csv_path)
        meta_path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return csv_path, meta_path


def read_ensemble_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Load checkpoints CSV back into ``(checkpoints, S[R, C, k])``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    ck = np.unique(data[:, 1])
    R = int(data[:, 0].max()) + 1
    return ck, data[:, 2:].reshape(R, len(ck), -1)


def simulate_ensemble(config: WalkConfig, replicas: int, horizon: int, master_seed: int, *,
                      checkpoints=None, mechanism: str = "conditional", first_step=None,
                      workers: int = 1, backend: str | None = None,
                      replica_offset: int = 0) -> Ensemble:
    """Run ``replicas`` independent walks, keeping positions at checkpoints.

    Replica ``r`` always uses the stream keyed by ``(master_seed, r)``; replicas
    are processed in fixed blocks, so ``workers`` only changes wall time.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    ck = checkpoint_grid(horizon) if checkpoints is None else np.unique(
        np.asarray(checkpoints, dtype=np.int64))
    if ck.size == 0 or ck[0] < 1 or ck[-1] > horizon:
        raise ValueError("checkpoints must lie in [1, horizon]")
    idx = np.arange(replica_offset, replica_offset + int(replicas))
    blocks = [idx[i:i + CHUNK] for i in range(0, len(idx), CHUNK)]

    def job(block):
        return _run(config, replica_keys(master_seed, block), horizon, ck, mechanism,
                    first_step, backend)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as ex:
            parts = list(ex.map(job, blocks))
    else:
        parts = [job(b) for b in blocks]
    S = np.concatenate(parts, axis=0) if parts else np.zeros((0, len(ck), config.k), np.int64)
    return Ensemble(config=config, master_seed=int(master_seed), horizon=horizon, checkpoints=ck,
                    S=S, mechanism=mechanism,
                    first_step=None if first_step is None else tuple(int(x) for x in first_step))


@dataclass
class MomentAccumulator:
    """Exact integer sums of samples and their outer products.

    Merging is associative and commutative, so aggregation order never changes
    the result.
    """

    k: int
    count: int = 0
    total: np.ndarray = field(default=None)
    outer: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.total is None:
            self.total = np.zeros(self.k, dtype=object)
        if self.outer is None:
            self.outer = np.zeros((self.k, self.k), dtype=object)

    @classmethod
    def from_samples(cls, S) -> "MomentAccumulator":
        S = np.asarray(S, dtype=np.int64)
        obj = S.astype(object)
        return cls(k=S.shape[1], count=S.shape[0], total=obj.sum(axis=0), outer=obj.T @ obj)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        return MomentAccumulator(self.k, self.count + other.count, self.total + other.total,
                                 self.outer + other.outer)

    def mean(self) -> np.ndarray:
        return np.array([float(t) / self.count for t in self.total])

    def second_moment(self) -> np.ndarray:
        return np.array([[float(x) / self.count for x in row] for row in self.outer])

    def cov(self) -> np.ndarray:
        n = self.count
        c = self.outer * n - np.outer(self.total, self.total)
        return np.array([[float(x) / (n * (n - 1)) for x in row] for row in c])


# --------------------------------------------------------------------------
# projections and the SA view

@dataclass(frozen=True)
class ProjectedTrajectory:
    n: np.ndarray
    S_hat: np.ndarray
    d: np.ndarray  # d_n per projection, nan for n < 2
    L: np.ndarray  # projection martingale minus its start, nan for n < 3


def project(traj: Trajectory, spectrum: Spectrum) -> ProjectedTrajectory:
    """Project positions onto the eigenbasis: ``S_hat_n = S_n T``.

    Also returns ``L_n = S_hat_n / d_n - S_hat_2`` for ``n >= 3``.
    """
    if not spectrum.diagonalizable or spectrum.T is None:
        raise NotDiagonalizable("projection needs a diagonalizable memory matrix")
    T = spectrum.T
    S = traj.S
    S_hat = S @ T
    n = np.arange(S.shape[0])
    dtype = complex if np.iscomplexobj(T) else float
    d = np.full((len(n), spectrum.k), np.nan, dtype=dtype)
    L = np.full_like(d, np.nan)
    if len(n) > 2:
        for j, lam in enumerate(spectrum.eigenvalues):
            lam_j = lam if dtype is complex else lam.real
            d[2:, j] = d_scale(lam_j, n[2:])
        L[3:] = S_hat[3:] / d[3:] - S_hat[2]
    return ProjectedTrajectory(n=n, S_hat=S_hat, d=d, L=L)


@dataclass(frozen=True)
class SAReport:
    max_residual: float
    Z: np.ndarray
    delta_M: np.ndarray  # row i is Delta M_{i+2}


def sa_view(traj: Trajectory, B, tol: float = 1e-12) -> SAReport:
    """Check ``Z_{n+1} = Z_n - h(Z_n)/(n+1) + dM_{n+1}/(n+1)`` along a path.

    ``Z_n = S_n / n``, ``h(z) = z (I - B)``, ``dM_{n+1} = X_{n+1} - S_n B / n``.
    """
    B = np.asarray(B, dtype=float)
    S = traj.S.astype(float)
    N = S.shape[0] - 1
    n = np.arange(1, N + 1, dtype=float)[:, None]
    Z = S[1:] / n
    X = np.diff(traj.S, axis=0).astype(float)
    k = B.shape[0]
    nn = n[:-1]
    dM = X[1:] - (S[1:-1] @ B) / nn
    h = Z[:-1] @ (np.eye(k) - B)
    rhs = Z[:-1] - h / (nn + 1) + dM / (nn + 1)
    resid = float(np.max(np.abs(Z[1:] - rhs))) if N > 1 else 0.0
    if resid > tol:
        raise AssertionError(f"stochastic approximation identity violated: {resid:.3e}")
    return SAReport(max_residual=resid, Z=Z, delta_M=dM)
