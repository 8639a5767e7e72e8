"""Configuration, report and trial plumbing shared by the verification suites."""

from __future__ import annotations

import dataclasses
import json
import math
import operator
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..errors import InvalidParametersError
from ..graphs import RegularGraph, derive_seed, load_graph, sample_regular_graph, save_graph

SCHEMA_VERSION = 1
GRAPH_CACHE_ENV = "REGSPEC_GRAPH_CACHE"

# independent seed streams
STREAM_GRAPH = 0
STREAM_POTENTIAL = 1
STREAM_VERTEX = 2
STREAM_DOS = 3
STREAM_CALIBRATION = 4

EXPERIMENTS = ("adj", "grow", "esd", "green", "deloc", "cycles")


@dataclass
class ExperimentConfig:
    """Parameters of one verification run; the report echoes all of them.

    ``trials`` counts sampled graphs; ``potentials`` counts potentials per
    graph for the random-operator suites.  Fields left as ``None`` take the
    experiment's default, resolved by :func:`default_config`.
    """

    experiment: str
    n: int
    d: int
    seed: int = 0
    trials: int = 1
    potentials: int = 1
    intervals: list = field(default_factory=list)
    eta: float | None = None
    rho0: float = 1.0
    kappa: float = 0.2
    C: float | None = None
    delta: float = 0.1
    eps: float = 0.5
    sc_eps: float = 0.01
    pass_fraction: float = 0.9
    kmax: int = 6
    radius: int = 2
    vertices: int = 10
    d_grow: int | None = None
    calibration_n: int | None = None
    statements: tuple = (1,)
    tree_extra_depth: int = 0
    dos_depth: int = 10
    dos_trials: int = 100
    grid_points: int = 2001
    threads: int = 1
    max_restarts: int | None = None

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise InvalidParametersError(f"unknown experiment {self.experiment!r}")
        for name in ("n", "d", "trials", "potentials", "kmax", "vertices", "grid_points", "threads", "dos_depth", "dos_trials"):
            if getattr(self, name) < 1:
                raise InvalidParametersError(f"{name} must be positive")
        if self.seed < 0:
            raise InvalidParametersError("seed must be nonnegative")
        if not 0 < self.kappa < 0.25:
            raise InvalidParametersError("kappa must lie in (0, 1/4)")
        for name in ("delta", "eps"):
            if not getattr(self, name) > 0:
                raise InvalidParametersError(f"{name} must be positive")
        if self.rho0 < 0:
            raise InvalidParametersError("rho0 must be nonnegative")
        if self.eta is not None and not self.eta > 0:
            raise InvalidParametersError("eta must be positive")
        if self.C is not None and not self.C > 0:
            raise InvalidParametersError("C must be positive")
        if not 0 < self.pass_fraction <= 1:
            raise InvalidParametersError("pass_fraction must lie in (0, 1]")
        if self.radius < 0 or self.tree_extra_depth < 0:
            raise InvalidParametersError("radius and tree_extra_depth must be nonnegative")
        for a, b in self.intervals:
            if not a < b:
                raise InvalidParametersError(f"empty interval ({a}, {b}]")
        return self

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["intervals"] = [list(map(float, iv)) for iv in self.intervals]
        out["statements"] = list(self.statements)
        out.pop("threads")  # never changes results
        return out


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Suite defaults at desk scale; keyword arguments override fields."""
    base: dict[str, Any] = {
        "adj": dict(n=2000, d=3, trials=20),
        "grow": dict(n=2000, d=8, trials=1),
        "esd": dict(n=1000, d=3, trials=10, potentials=50, rho0=1.0),
        "green": dict(n=2000, d=3, trials=5, rho0=1.0, potentials=5, d_grow=8),
        "deloc": dict(n=2000, d=3, trials=5, potentials=4, vertices=10, rho0=0.5, intervals=[(-1.0, 1.0)], d_grow=8, calibration_n=500),
        "cycles": dict(n=1000, d=3, trials=200, kmax=6),
    }
    if experiment not in base:
        raise InvalidParametersError(f"unknown experiment {experiment!r}")
    params = dict(base[experiment])
    params.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(experiment=experiment, **params).validate()


_RELATIONS = {"<=": operator.le, "<": operator.lt, ">=": operator.ge, ">": operator.gt, "==": operator.eq}


@dataclass
class Check:
    """One pass/fail inequality ``statistic <relation> bound``."""

    name: str
    statistic: float
    relation: str
    bound: float
    description: str

    @property
    def passed(self) -> bool:
        return bool(_RELATIONS[self.relation](self.statistic, self.bound))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "statistic": _clean(self.statistic),
            "relation": self.relation,
            "bound": _clean(self.bound),
            "passed": self.passed,
            "description": self.description,
        }


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    metrics: dict = field(default_factory=dict)
    aggregate: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    telemetry: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    figure_data: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def add_bound(self, name: str, formula: str, value: float, **inputs) -> float:
        self.bounds[name] = {"formula": formula, "inputs": {k: _clean(v) for k, v in inputs.items()}, "value": _clean(value)}
        return value

    def add_check(self, name, statistic, relation, bound, description) -> Check:
        c = Check(name, float(statistic), relation, float(bound), description)
        self.checks.append(c)
        return c

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "config": self.config,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
            "bounds": self.bounds,
            "aggregate": _clean(self.aggregate),
            "metrics": _clean(self.metrics),
            "telemetry": _clean(self.telemetry),
        }
        if include_timing:
            out["timing"] = {"wall_clock_seconds": round(self.wall_clock_seconds, 3)}
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, allow_nan=False) + "\n"

    def metrics_csv(self) -> str:
        """Per-trial metrics (equal-length lists) as CSV."""
        cols = [k for k, v in self.metrics.items() if isinstance(v, list) and v and not isinstance(v[0], (list, dict))]
        if not cols:
            return ""
        length = max(len(self.metrics[c]) for c in cols)
        cols = [c for c in cols if len(self.metrics[c]) == length]
        lines = ["trial," + ",".join(cols)]
        for i in range(length):
            lines.append(",".join([str(i)] + [_fmt(self.metrics[c][i]) for c in cols]))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _clean(obj):
    """Convert numpy scalars/arrays to JSON-safe Python values; inf becomes a string."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def recompute_passed(report_dict: dict) -> bool:
    """Re-derive every pass flag of a serialized report from its stored numbers."""
    ok = True
    for c in report_dict["checks"]:
        stat, bound = (float(c[k]) for k in ("statistic", "bound"))
        flag = bool(_RELATIONS[c["relation"]](stat, bound))
        if flag != c["passed"]:
            raise ValueError(f"check {c['name']} flag does not match its numbers")
        ok &= flag
    if ok != report_dict["passed"]:
        raise ValueError("overall flag does not match the checks")
    return ok


def map_trials(fn: Callable[[int], Any], count: int, threads: int = 1) -> list:
    """``[fn(0), ..., fn(count-1)]``, optionally on a thread pool; order preserved."""
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def log_base(x: float, base: float) -> float:
    return math.log(x) / math.log(base)


def summary(values) -> dict:
    """Mean, max, min and standard error of the mean."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": float("nan"), "max": float("nan"), "min": float("nan"), "stderr": float("nan"), "count": 0}
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return {"mean": float(v.mean()), "max": float(v.max()), "min": float(v.min()), "stderr": se, "count": int(v.size)}


@lru_cache(maxsize=64)
def _cached_graph(n: int, d: int, seed: int, max_restarts: int | None) -> RegularGraph:
    cache_dir = os.environ.get(GRAPH_CACHE_ENV)
    path = Path(cache_dir) / f"regular_n{n}_d{d}_s{seed}.json" if cache_dir else None
    if path is not None and path.exists():
        g = load_graph(path)
        if g.n == n and g.d == d:
            return g
    g = sample_regular_graph(n, d, seed, max_restarts=max_restarts)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        save_graph(g, tmp)
        tmp.replace(path)
    return g


def trial_graph(cfg: ExperimentConfig, trial: int, n: int | None = None, d: int | None = None, stream: int = STREAM_GRAPH) -> RegularGraph:
    """Graph number ``trial`` of the run: a pure function of (seed, stream, trial, n, d).

    Graphs are memoized in-process; setting ``REGSPEC_GRAPH_CACHE`` to a
    directory also stores them on disk, which saves minutes for d = 8.
    """
    n = cfg.n if n is None else n
    d = cfg.d if d is None else d
    return _cached_graph(n, d, derive_seed(cfg.seed, stream, trial), cfg.max_restarts)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False
