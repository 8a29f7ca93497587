"""Hybrid low-/high-pass graph filters.

Each relation contributes two linear, SGC-style branches:

* low-pass on the homophilic edges:  ``Z_l = A+ Z_{l-1} W_low``, where ``A+`` is
  the self-loop symmetric normalisation;
* high-pass on the heterophilic edges: ``Z_l = (I - alpha A-) Z_{l-1} W_high``,
  where ``A-`` is the symmetric normalisation without self-loops.

Both start from ``Z_0 = X``. Branch outputs are concatenated per relation
(homophilic first) and relations in order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionMismatchError
from .graph import EdgeSet, normalized_adjacency
from .optim import glorot_uniform

BRANCHES = ("both", "low", "high")


@dataclass
class HybridModelParams:
    """Weights ``low[r][l]`` and ``high[r][l]`` for relation ``r``, layer ``l``."""

    low: list
    high: list
    alpha: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 2.0:
            raise ValueError(f"high-pass strength must lie in [0, 2], got {self.alpha}")
        if len(self.low) != len(self.high):
            raise DimensionMismatchError("low/high weight lists cover different relation counts")
        for branch in (self.low, self.high):
            for layers in branch:
                for a, b in zip(layers, layers[1:]):
                    if a.shape[1] != b.shape[0]:
                        raise DimensionMismatchError(
                            f"layer shapes {a.shape} -> {b.shape} do not chain"
                        )

    @property
    def n_relations(self) -> int:
        return len(self.low)

    @property
    def n_layers(self) -> int:
        return len(self.low[0])

    @property
    def hidden(self) -> int:
        return self.low[0][-1].shape[1]

    @property
    def n_features(self) -> int:
        return self.low[0][0].shape[0]

    def tensors(self, branches: str = "both") -> list:
        """Flat tensor list: per relation, low layers then high layers."""
        out = []
        for r in range(self.n_relations):
            if branches in ("both", "low"):
                out.extend(self.low[r])
            if branches in ("both", "high"):
                out.extend(self.high[r])
        return out

    def named_tensors(self) -> dict:
        out = {}
        for r in range(self.n_relations):
            for l, w in enumerate(self.low[r]):
                out[f"filters.r{r}.low.{l}"] = w
            for l, w in enumerate(self.high[r]):
                out[f"filters.r{r}.high.{l}"] = w
        return out

    @classmethod
    def from_named(cls, tensors: dict, n_relations: int, n_layers: int, alpha: float):
        low = [[tensors[f"filters.r{r}.low.{l}"] for l in range(n_layers)] for r in range(n_relations)]
        high = [[tensors[f"filters.r{r}.high.{l}"] for l in range(n_layers)] for r in range(n_relations)]
        return cls(low, high, alpha)

    def copy(self) -> "HybridModelParams":
        return HybridModelParams(
            [[w.copy() for w in ws] for ws in self.low],
            [[w.copy() for w in ws] for ws in self.high],
            self.alpha,
            dict(self.meta),
        )


def init_hybrid_params(
    n_features: int,
    n_relations: int,
    hidden: int = 64,
    n_layers: int = 2,
    alpha: float = 1.0,
    seed=0,
) -> HybridModelParams:
    """Glorot-uniform weights chaining ``D -> h -> ... -> h``; the two branches
    do not share weights."""
    if n_layers < 1 or hidden < 1:
        raise ValueError("n_layers and hidden must be positive")
    rng = np.random.default_rng(seed)
    dims = [n_features] + [hidden] * n_layers

    def stack():
        return [glorot_uniform(rng, dims[l], dims[l + 1]) for l in range(n_layers)]

    low, high = [], []
    for _ in range(n_relations):
        low.append(stack())
        high.append(stack())
    return HybridModelParams(low, high, alpha)


def lowpass_operator(e: EdgeSet) -> sp.csr_matrix:
    return normalized_adjacency(e, add_self_loops=True)


def highpass_operator(e: EdgeSet, alpha: float) -> sp.csr_matrix:
    ident = sp.identity(e.num_nodes, format="csr")
    return (ident - alpha * normalized_adjacency(e, add_self_loops=False)).tocsr()


def _check_input(x: np.ndarray, weights: list, n: int) -> None:
    if x.shape[0] != n:
        raise DimensionMismatchError(f"X has {x.shape[0]} rows, graph has {n} nodes")
    if x.shape[1] != weights[0].shape[0]:
        raise DimensionMismatchError(
            f"X has {x.shape[1]} columns, first weight expects {weights[0].shape[0]}"
        )


def propagate(op, x: np.ndarray, weights: list):
    """Apply ``Z_l = op @ Z_{l-1} @ W_{l-1}``; return output and the
    propagated inputs ``op @ Z_{l-1}`` needed for the backward pass."""
    inputs = []
    z = x
    for w in weights:
        h = op @ z
        inputs.append(h)
        z = h @ w
    return z, inputs


def propagate_backward(op, weights: list, inputs: list, grad_out: np.ndarray, need_input_grad=False):
    """Gradients w.r.t. each weight (op is symmetric)."""
    grads = [None] * len(weights)
    g = grad_out
    for l in range(len(weights) - 1, -1, -1):
        grads[l] = inputs[l].T @ g
        if l > 0 or need_input_grad:
            g = op.T @ (g @ weights[l].T)
    if need_input_grad:
        return grads, g
    return grads


def lowpass_forward(x, eplus: EdgeSet, params: HybridModelParams, r: int = 0) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_input(x, params.low[r], eplus.num_nodes)
    return propagate(lowpass_operator(eplus), x, params.low[r])[0]


def highpass_forward(x, eminus: EdgeSet, params: HybridModelParams, r: int = 0) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_input(x, params.high[r], eminus.num_nodes)
    return propagate(highpass_operator(eminus, params.alpha), x, params.high[r])[0]


def hybrid_forward(x, sep, params: HybridModelParams, branches: str = "both") -> np.ndarray:
    """Embedding matrix ``[N x 2hR]`` (or ``[N x hR]`` for a single branch)."""
    return HybridEncoder(sep, params.alpha, branches).forward(x, params)[0]


class HybridEncoder:
    """Propagation operators for a fixed edge separation, with forward and
    backward passes over :class:`HybridModelParams`."""

    def __init__(self, sep, alpha: float = 1.0, branches: str = "both"):
        if branches not in BRANCHES:
            raise ValueError(f"branches must be one of {BRANCHES}, got {branches!r}")
        self.branches = branches
        self.alpha = alpha
        self.low_ops = [lowpass_operator(e) for e in sep.homophilic]
        self.high_ops = [highpass_operator(e, alpha) for e in sep.heterophilic]
        self.num_nodes = sep.homophilic[0].num_nodes

    @property
    def n_relations(self) -> int:
        return len(self.low_ops)

    def _active(self):
        for r in range(self.n_relations):
            if self.branches in ("both", "low"):
                yield r, "low", self.low_ops[r]
            if self.branches in ("both", "high"):
                yield r, "high", self.high_ops[r]

    def forward(self, x, params: HybridModelParams):
        x = np.asarray(x, dtype=np.float64)
        if params.n_relations != self.n_relations:
            raise DimensionMismatchError(
                f"parameters cover {params.n_relations} relations, separation has {self.n_relations}"
            )
        if params.alpha != self.alpha:
            raise ValueError("parameter alpha differs from the encoder's operators")
        blocks, cache = [], []
        for r, kind, op in self._active():
            weights = getattr(params, kind)[r]
            _check_input(x, weights, self.num_nodes)
            z, inputs = propagate(op, x, weights)
            blocks.append(z)
            cache.append(inputs)
        return np.hstack(blocks), cache

    def backward(self, cache, grad_z: np.ndarray, params: HybridModelParams) -> list:
        """Gradients in the order of ``params.tensors(self.branches)``."""
        grads = []
        col = 0
        h = params.hidden
        for (r, kind, op), inputs in zip(self._active(), cache):
            weights = getattr(params, kind)[r]
            grads.extend(propagate_backward(op, weights, inputs, grad_z[:, col : col + h]))
            col += h
        return grads
