"""Short cycles and tree-like neighbourhoods in random regular graphs."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..graphs import acyclic_radii, cycle_census, derive_seed
from .common import STREAM_GRAPH, ExperimentConfig, ExperimentReport, Timer, map_trials, summary, trial_graph

C3_TOLERANCE = 0.15


def cycle_bound(n: int, d: int, k: int) -> float:
    """Upper bound on E|C(k)|: (d-1)^k / (2k) (1 + (8/n)(d + k/(2d)))^k."""
    return (d - 1) ** k / (2 * k) * (1 + 8 / n * (d + k / (2 * d))) ** k


def bad_fraction_bound(n: int, d: int, k: int) -> float:
    """Upper bound on E[1 - |F_n(k)|/n], the fraction of vertices with R(x) < k."""
    s = math.sqrt(d - 1)
    return (d - 1) ** (2 * k + 0.5) / (2 * n * (s - 1)) * (1 + 8 / n * (d + k / d)) ** (2 * k)


def verify_cycles(cfg: ExperimentConfig, sampler: Callable | None = None) -> ExperimentReport:
    """Monte Carlo cycle counts and bad-vertex fractions against their expectation bounds.

    ``sampler(n, d, seed)`` replaces the uniform sampler (negative controls).
    """
    with Timer() as clock:
        n, d, kmax = cfg.n, cfg.d, cfg.kmax
        report = ExperimentReport("cycles", cfg.to_json())
        ks = list(range(3, kmax + 1))
        goods = list(range(1, kmax + 1))

        def one(i):
            if sampler is None:
                g = trial_graph(cfg, i)
            else:
                g = sampler(n, d, derive_seed(cfg.seed, STREAM_GRAPH, i))
            census = cycle_census(g, kmax)
            radii = acyclic_radii(g, cap=kmax + 1)
            bad = [float(np.count_nonzero(radii < k)) / g.num_vertices for k in goods]
            return [census[k] for k in ks], bad

        rows = map_trials(one, cfg.trials, cfg.threads)
        counts = np.array([r[0] for r in rows], dtype=float)
        bad = np.array([r[1] for r in rows])
        for j, k in enumerate(ks):
            report.metrics[f"C{k}"] = counts[:, j].astype(int).tolist()
            b = report.add_bound(f"cycles_{k}", "(d-1)^k/(2k) (1 + (8/n)(d + k/(2d)))^k", cycle_bound(n, d, k), n=n, d=d, k=k)
            mean = float(counts[:, j].mean())
            report.aggregate[f"C{k}"] = summary(counts[:, j])
            report.add_check(f"cycles_{k}", mean, "<=", b, f"mean number of {k}-cycles")
            report.telemetry[f"sharpness_{k}"] = mean / ((d - 1) ** k / (2 * k))
            report.telemetry[f"C{k}_sigma_margin"] = (b - mean) / max(report.aggregate[f"C{k}"]["stderr"], 1e-300)
        for j, k in enumerate(goods):
            report.metrics[f"bad_fraction_{k}"] = bad[:, j].tolist()
            b = report.add_bound(f"bad_fraction_{k}", "(d-1)^(2k+1/2) / (2n (sqrt(d-1)-1)) (1 + (8/n)(d + k/d))^(2k)",
                                 bad_fraction_bound(n, d, k), n=n, d=d, k=k)
            report.aggregate[f"bad_fraction_{k}"] = summary(bad[:, j])
            report.add_check(f"bad_fraction_{k}", float(bad[:, j].mean()), "<=", b,
                             f"mean fraction of vertices whose ball of radius {k} has a cycle")
        target = (d - 1) ** 3 / 6
        c3 = float(counts[:, 0].mean()) if ks else 0.0
        report.add_bound("C3_window", "(d-1)^3 / 6 (1 +- 0.15)", target, d=d)
        report.add_check("C3_lower", c3, ">=", (1 - C3_TOLERANCE) * target, "mean triangle count near (d-1)^3/6")
        report.add_check("C3_upper", c3, "<=", (1 + C3_TOLERANCE) * target, "mean triangle count near (d-1)^3/6")
        report.figure_data = {"ks": ks, "means": counts.mean(axis=0).tolist(),
                              "bounds": [cycle_bound(n, d, k) for k in ks],
                              "poisson": [(d - 1) ** k / (2 * k) for k in ks]}
    report.wall_clock_seconds = clock.elapsed
    return report
