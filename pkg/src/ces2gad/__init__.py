"""Graph anomaly detection under heterophily: spectral analysis, causal edge
separation, hybrid low-/high-pass filtering and supervised detection."""

__version__ = "0.1.0"

from .causal import CausalEdgeSeparator, EdgeSeparation
from .exceptions import CapacityError, CES2Error, ConfigError, DataError
from .graph import EdgeSet, MultiRelationGraph, graph_heterophily, laplacian, node_heterophily
from .io import load_dataset, write_dataset
from .metrics import auc, f1_macro
from .model import CES2GAD
from .spectral import eigendecompose, high_freq_area, spectrum_report

__all__ = [
    "__version__",
    "CES2GAD",
    "CES2Error",
    "CapacityError",
    "CausalEdgeSeparator",
    "ConfigError",
    "DataError",
    "EdgeSeparation",
    "EdgeSet",
    "MultiRelationGraph",
    "auc",
    "eigendecompose",
    "f1_macro",
    "graph_heterophily",
    "high_freq_area",
    "laplacian",
    "load_dataset",
    "node_heterophily",
    "spectrum_report",
    "write_dataset",
]
