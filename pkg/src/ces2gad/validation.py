"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import DegenerateInputError, DimensionMismatchError
from .graph import UNLABELED, MultiRelationGraph


def check_graph(g, require_features: bool = False, require_labels: bool = False) -> MultiRelationGraph:
    if not isinstance(g, MultiRelationGraph):
        raise TypeError(f"expected a MultiRelationGraph, got {type(g).__name__}")
    if require_features and g.num_features == 0:
        raise DegenerateInputError("graph has no node features")
    if require_labels and not np.any(g.labels != UNLABELED):
        raise DegenerateInputError("graph has no labeled node")
    return g


def check_node_mask(mask, n: int, name: str = "mask") -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype != bool:
        idx = mask.astype(np.int64)
        mask = np.zeros(n, dtype=bool)
        mask[idx] = True
    if mask.shape != (n,):
        raise DimensionMismatchError(f"{name} must cover {n} nodes, got shape {mask.shape}")
    return mask


def check_binary_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    return y.astype(np.int64)
