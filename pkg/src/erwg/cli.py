"""Command-line entry point: ``erwg analyze|simulate|verify|limits|report``."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ._io import dumps, to_plain
from .errors import ERWGError
from .graph import WalkConfig, config_from_dict, memory_matrix
from .spectral import CRITICAL_TOL, analyze, classify

SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    walk: WalkConfig | None
    horizon: int | None = None
    replicas: int | None = None
    checkpoints: list | None = None
    seed: int | None = None
    suite: str = "all"
    out: str | None = None
    mechanism: str = "conditional"
    workers: int = 1
    tols: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        d["walk"] = None if self.walk is None else self.walk.to_dict()
        return d

    def config_hash(self) -> str:
        blob = json.dumps(to_plain(self.to_dict()), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if "walk" not in d and {"k", "edges"} <= set(d):
            # a bare walk config is accepted as an experiment with defaults
            return cls(walk=config_from_dict(d))
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {version}")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown experiment fields: {sorted(extra)}")
        kw = dict(d)
        kw["walk"] = None if d.get("walk") is None else config_from_dict(d["walk"])
        return cls(**kw)


def load_experiment(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig(walk=None)
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def _parse_tols(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--tol expects KEY=VAL, got {item!r}")
        out[key.strip()] = float(val)
    return out


def _merge(exp: ExperimentConfig, args) -> ExperimentConfig:
    for name in ("horizon", "replicas", "seed", "out", "suite", "mechanism", "workers"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(exp, name, v)
    exp.tols = {**exp.tols, **_parse_tols(getattr(args, "tol", None))}
    return exp


def _require_walk(exp: ExperimentConfig) -> WalkConfig:
    if exp.walk is None:
        raise ValueError("this command needs --config with a walk")
    return exp.walk


def _emit(text: str, out: str | None, name: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text if text.endswith("\n") else text + "\n")


def _save_experiment(exp: ExperimentConfig) -> None:
    if exp.out:
        d = Path(exp.out)
        d.mkdir(parents=True, exist_ok=True)
        payload = {**exp.to_dict(), "experiment_hash": exp.config_hash()}
        (d / "experiment.json").write_text(dumps(payload) + "\n")


# --------------------------------------------------------------------------
# commands

def analysis(config: WalkConfig, eta_tol: float = CRITICAL_TOL) -> dict:
    from .limits import limit_report

    sp = analyze(memory_matrix(config), tol=eta_tol)
    return {"config_hash": config.config_hash(), "spectrum": sp.to_dict(),
            "regime": classify(sp, eta_tol).to_dict(),
            "limits": limit_report(config, tol=eta_tol).to_dict()}


def cmd_analyze(exp: ExperimentConfig) -> int:
    walk = _require_walk(exp)
    _emit(dumps(analysis(walk, exp.tols.get("eta", CRITICAL_TOL))), exp.out, "analysis.json")
    return 0


def cmd_simulate(exp: ExperimentConfig) -> int:
    from .simulator import simulate_ensemble
    from .verify import DEFAULT_SEED

    walk = _require_walk(exp)
    ens = simulate_ensemble(walk, exp.replicas or 1000, exp.horizon or 1000,
                            DEFAULT_SEED if exp.seed is None else exp.seed,
                            checkpoints=exp.checkpoints, mechanism=exp.mechanism,
                            workers=exp.workers)
    csv_path, meta_path = ens.write(exp.out or ".", f"ensemble_{exp.mechanism}")
    print(csv_path)
    print(meta_path)
    return 0


def cmd_verify(exp: ExperimentConfig) -> int:
    from .verify import DEFAULT_SEED, run_suite

    tols = {k: v for k, v in exp.tols.items() if k != "eta"}
    rep = run_suite(exp.suite, exp.walk, seed=DEFAULT_SEED if exp.seed is None else exp.seed,
                    replicas=exp.replicas, horizon=exp.horizon, workers=exp.workers, tols=tols)
    print(rep.table())
    if exp.out:
        d = Path(exp.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"report_{exp.suite}.json").write_text(rep.to_json(runtime=False) + "\n")
    return 0 if rep.passed else 1


def cmd_limits(exp: ExperimentConfig) -> int:
    from .limits import limit_report
    from .moments import write_moment_table

    walk = _require_walk(exp)
    rep = limit_report(walk, tol=exp.tols.get("eta", CRITICAL_TOL))
    _emit(rep.to_json(), exp.out, "limits.json")
    if exp.out:
        write_moment_table(Path(exp.out) / "moments.csv", memory_matrix(walk), walk.q,
                           exp.horizon or 1000)
    return 0


def cmd_report(exp: ExperimentConfig, source: str | None) -> int:
    """Render a saved verification report, or write the bound-grid CSV."""
    if source:
        with open(source) as fh:
            d = json.load(fh)
        print(f"suite {d['suite']}  config {d['config_hash']}  seed {d['seed']}")
        for r in d["records"]:
            tag = ("PASS" if r["passed"] else "FAIL") + ("" if r["hard"] else " (soft)")
            print(f"{r['name']:<34} {r['statistic']!s:>24} {r['threshold']!s:>12}  {tag}")
        print(f"overall: {'PASS' if d['passed'] else 'FAIL'}")
        return 0 if d["passed"] else 1
    from .gaussian_approx import product_bounds_check

    bounds = product_bounds_check()
    out = Path(exp.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    bounds.to_csv(out / "bounds.csv")
    if exp.walk is not None:
        (out / "analysis.json").write_text(dumps(analysis(exp.walk)) + "\n")
    print(out / "bounds.csv")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erwg",
                                     description="Elephant random walks with graph memory.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="walk or experiment JSON file")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--replicas", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--tol", action="append", metavar="KEY=VAL",
                       help="override a tolerance; repeatable")
        return p

    common(sub.add_parser("analyze", help="spectrum, regime and limit covariances"))
    s = common(sub.add_parser("simulate", help="write an ensemble checkpoint CSV"))
    s.add_argument("--mechanism", choices=("conditional", "literal"))
    from .verify import SUITES

    v = common(sub.add_parser("verify", help="run a verification suite"))
    v.add_argument("--suite", choices=SUITES)
    common(sub.add_parser("limits", help="limit report JSON and moment table CSV"))
    r = common(sub.add_parser("report", help="render a saved report or write bound grids"))
    r.add_argument("--input", help="verification report JSON to render")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        exp = _merge(load_experiment(args.config), args)
        _save_experiment(exp)
        if args.command == "analyze":
            return cmd_analyze(exp)
        if args.command == "simulate":
            return cmd_simulate(exp)
        if args.command == "verify":
            return cmd_verify(exp)
        if args.command == "limits":
            return cmd_limits(exp)
        return cmd_report(exp, args.input)
    except (ERWGError, ValueError, KeyError, OSError) as exc:
        print(f"erwg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
