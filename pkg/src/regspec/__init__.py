"""Local spectral statistics of random regular graphs and Anderson operators on them."""

from .errors import (
    BudgetExceededError,
    ConvergenceError,
    DepthTooSmallError,
    InvalidParametersError,
    MeasureDegenerateError,
    RegspecError,
)
from .graphs import (
    CycleCensus,
    RegularGraph,
    TruncatedTree,
    acyclic_radii,
    acyclic_radius,
    adjacency_matrix,
    build_truncated_tree,
    cycle_census,
    derive_seed,
    sample_regular_graph,
    tree_like_fraction,
)
from .measures import AnalyticMeasure, gamma_d, gamma_tree, kesten_mckay, rescaled_km, semicircle
from .spectral import DiscreteMeasure, SpectralDecomposition, eig_sym, kolmogorov_distance, local_spectral_measure

__version__ = "0.1.0"

__all__ = [
    "AnalyticMeasure",
    "BudgetExceededError",
    "ConvergenceError",
    "CycleCensus",
    "DepthTooSmallError",
    "DiscreteMeasure",
    "InvalidParametersError",
    "MeasureDegenerateError",
    "RegspecError",
    "RegularGraph",
    "SpectralDecomposition",
    "TruncatedTree",
    "acyclic_radii",
    "acyclic_radius",
    "adjacency_matrix",
    "build_truncated_tree",
    "cycle_census",
    "derive_seed",
    "eig_sym",
    "gamma_d",
    "gamma_tree",
    "kesten_mckay",
    "kolmogorov_distance",
    "local_spectral_measure",
    "rescaled_km",
    "sample_regular_graph",
    "semicircle",
    "tree_like_fraction",
]
