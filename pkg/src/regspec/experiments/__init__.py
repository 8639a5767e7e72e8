"""Seeded verification suites; each returns an :class:`ExperimentReport`."""

from .anderson_laws import verify_delocalization, verify_schrodinger
from .common import ExperimentConfig, ExperimentReport, default_config, recompute_passed
from .cycles import verify_cycles
from .spectral_laws import verify_adjacency, verify_green, verify_growing

SUITES = {
    "adj": verify_adjacency,
    "grow": verify_growing,
    "esd": verify_schrodinger,
    "green": verify_green,
    "deloc": verify_delocalization,
    "cycles": verify_cycles,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    return SUITES[cfg.experiment](cfg.validate())


__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "SUITES",
    "default_config",
    "recompute_passed",
    "run_experiment",
    "verify_adjacency",
    "verify_cycles",
    "verify_delocalization",
    "verify_green",
    "verify_growing",
    "verify_schrodinger",
]
