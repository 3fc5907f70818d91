"""Experiment orchestration: registry, tolerance profile, deterministic
artifact output and a bounded worker pool."""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DomainError

# Central tolerance profile; experiment code reads these, flags override.
TOLERANCES: dict[str, float] = {
    "hyper_at_one_abs": 1e-6,
    "hyper_ode_residual": 1e-7,
    "trace_tip_abs": 1e-3,
    "zipper_roundtrip_sup": 5e-2,
    "zipper_halving_low": 0.35,
    "zipper_halving_high": 0.65,
    "mart_sigmas": 3.0,
    "avoid_hit_fraction": 0.01,
    "hit_fraction_low": 0.50,
    "degenerate_drift_abs": 1e-12,
    "degenerate_coupled_abs": 1e-3,
    "ks_p_min": 0.01,
    "lattice_tv": 0.01,
    "es_marginal_tv": 1e-12,
    "kappa_rel_err": 0.15,
    "gelman_rubin_max": 1.1,
}

_REGISTRY: dict[str, callable] = {}


def experiment(exp_id: str):
    """Decorator registering an experiment under a documented id."""

    def wrap(fn):
        if exp_id in _REGISTRY:
            raise DomainError(f"duplicate experiment id {exp_id}")
        _REGISTRY[exp_id] = fn
        return fn

    return wrap


def registry() -> dict[str, callable]:
    from . import experiments  # noqa: F401  (populates the registry)
    return dict(_REGISTRY)


@dataclass
class ExperimentSpec:
    exp_id: str
    n: int = 0                      # 0 = experiment default ensemble size
    seed: int = 20_240_101
    params: dict = field(default_factory=dict)
    out_dir: str | None = None
    tag: str = "run"
    tolerances: dict = field(default_factory=dict)

    def tol(self, key: str) -> float:
        if key in self.tolerances:
            return float(self.tolerances[key])
        return TOLERANCES[key]


@dataclass
class StatReport:
    exp_id: str
    estimate: float
    se: float
    statistic: float
    p_value: float | None
    passed: bool
    runtime_s: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"exp_id": self.exp_id, "estimate": self.estimate,
                "se": self.se, "statistic": self.statistic,
                "p_value": self.p_value, "passed": bool(self.passed),
                "runtime_s": self.runtime_s, "details": self.details}


def run(spec: ExperimentSpec) -> StatReport:
    """Execute a registered experiment and write its artifacts.

    Layout: out/<exp-id>/<tag>/{manifest.json, data.csv, report.json}.
    data.csv and the report (minus runtime) are deterministic given
    (spec, seed).
    """
    reg = registry()
    if spec.exp_id not in reg:
        raise DomainError(f"unknown experiment id {spec.exp_id!r}; "
                          f"known: {sorted(reg)}")
    t0 = time.perf_counter()
    report, rows = reg[spec.exp_id](spec)
    report.runtime_s = time.perf_counter() - t0
    if spec.out_dir is not None:
        base = Path(spec.out_dir) / spec.exp_id / spec.tag
        base.mkdir(parents=True, exist_ok=True)
        (base / "manifest.json").write_text(json.dumps({
            "exp_id": spec.exp_id, "n": spec.n, "seed": spec.seed,
            "params": spec.params, "tag": spec.tag,
            "wall_time_s": report.runtime_s}, indent=2, sort_keys=True))
        (base / "data.csv").write_text(rows_to_csv(rows))
        rep = report.to_dict()
        rep.pop("runtime_s")
        (base / "report.json").write_text(json.dumps(rep, indent=2,
                                                     sort_keys=True))
    return report


def rows_to_csv(rows: list[dict]) -> str:
    """Deterministic CSV: stable header order, %.17g floats."""
    if not rows:
        return ""
    header = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        out = []
        for k in header:
            v = r[k]
            out.append(f"{v:.17g}" if isinstance(v, float) else v)
        writer.writerow(out)
    return buf.getvalue()


def worker_count() -> int:
    raw = os.environ.get("HSLE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise DomainError(f"HSLE_THREADS={raw!r} is not an integer")


def parallel_map(fn, items):
    """Map preserving order; fans out to processes when HSLE_THREADS > 1."""
    n = worker_count()
    items = list(items)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
