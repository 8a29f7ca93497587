"""Multi-relation graph model, heterophily statistics and Laplacians."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    CapacityError,
    DegenerateInputError,
    GraphInvariantError,
    UnlabeledNodeError,
)

#: largest node count for which dense [N x N] matrices are built
MAX_DENSE_NODES = 5000

UNLABELED = -1


def check_dense_capacity(n: int) -> None:
    if n > MAX_DENSE_NODES:
        raise CapacityError(
            f"dense operation on {n} nodes exceeds the limit of {MAX_DENSE_NODES}"
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class EdgeSet:
    """Undirected, unweighted edge set over ``num_nodes`` nodes.

    Edges are stored once each as ``(i, j)`` with ``i < j``, sorted
    lexicographically. The symmetric compressed adjacency (``indptr`` /
    ``indices``, neighbours sorted per node) and the degree vector are built
    on construction.

    The constructor is strict: self-loops, duplicates and out-of-range
    endpoints raise :class:`GraphInvariantError`. Use :meth:`from_pairs` to
    canonicalise raw edge lists.
    """

    def __init__(self, num_nodes: int, edges=None):
        num_nodes = int(num_nodes)
        if num_nodes < 1:
            raise GraphInvariantError("num_nodes must be positive")
        if edges is None:
            edges = np.empty((0, 2), dtype=np.int64)
        edges = np.asarray(edges, dtype=np.int64)
        if edges.size == 0:
            edges = np.empty((0, 2), dtype=np.int64)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise GraphInvariantError(f"edge array must be [E x 2], got {edges.shape}")
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            bad = np.flatnonzero((edges < 0).any(1) | (edges >= num_nodes).any(1))[0]
            raise GraphInvariantError(
                f"edge {tuple(edges[bad])} has an endpoint outside [0, {num_nodes})"
            )
        if np.any(edges[:, 0] == edges[:, 1]):
            bad = np.flatnonzero(edges[:, 0] == edges[:, 1])[0]
            raise GraphInvariantError(f"self-loop at node {edges[bad, 0]}")
        canon = np.sort(edges, axis=1)
        order = np.lexsort((canon[:, 1], canon[:, 0]))
        canon = canon[order]
        if len(canon) > 1:
            dup = np.all(canon[1:] == canon[:-1], axis=1)
            if dup.any():
                i = np.flatnonzero(dup)[0]
                raise GraphInvariantError(f"duplicate edge {tuple(canon[i])}")

        self.num_nodes = num_nodes
        self.edges = _frozen(np.ascontiguousarray(canon))
        adj = self._build_adjacency()
        self.indptr = _frozen(adj.indptr.astype(np.int64))
        self.indices = _frozen(adj.indices.astype(np.int64))
        self.degrees = _frozen(np.diff(self.indptr))
        self._adjacency = adj

    @classmethod
    def from_pairs(cls, num_nodes: int, pairs) -> "EdgeSet":
        """Build from a raw pair list, dropping self-loops and duplicates
        (in either orientation)."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        pairs = np.unique(np.sort(pairs, axis=1), axis=0)
        return cls(num_nodes, pairs)

    def _build_adjacency(self) -> sp.csr_matrix:
        n = self.num_nodes
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        data = np.ones(len(rows), dtype=np.float64)
        adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        adj.sort_indices()
        return adj

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def __len__(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as a CSR matrix (a copy)."""
        return self._adjacency.copy()

    def edge_codes(self) -> np.ndarray:
        """Scalar code ``i * N + j`` per canonical edge, ascending."""
        return self.edges[:, 0] * self.num_nodes + self.edges[:, 1]

    def subset(self, mask) -> "EdgeSet":
        """Edge set keeping the edges selected by a boolean mask over ``edges``."""
        return EdgeSet(self.num_nodes, self.edges[np.asarray(mask, dtype=bool)])

    def permuted(self, perm) -> "EdgeSet":
        """Relabel node ``v`` as ``perm[v]``."""
        perm = np.asarray(perm)
        return EdgeSet(self.num_nodes, perm[self.edges])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return self.num_nodes == other.num_nodes and np.array_equal(self.edges, other.edges)

    def __repr__(self) -> str:
        return f"EdgeSet(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


@dataclass(frozen=True, eq=False)
class MultiRelationGraph:
    """Node set shared by ``R`` independent undirected relations.

    ``labels`` holds 0 (normal), 1 (anomalous) or -1 (unlabeled).
    Instances are immutable; derive modified graphs with :meth:`with_labels`,
    :meth:`with_features` and :meth:`with_relations`.
    """

    num_nodes: int
    relations: tuple
    features: np.ndarray = None
    labels: np.ndarray = None
    relation_names: tuple = field(default=None)

    def __post_init__(self):
        n = int(self.num_nodes)
        if n < 1:
            raise GraphInvariantError("num_nodes must be positive")
        rels = tuple(self.relations)
        if len(rels) < 1:
            raise GraphInvariantError("a graph needs at least one relation")
        for r, e in enumerate(rels):
            if not isinstance(e, EdgeSet):
                raise GraphInvariantError(f"relation {r} is not an EdgeSet")
            if e.num_nodes != n:
                raise GraphInvariantError(
                    f"relation {r} spans {e.num_nodes} nodes, graph has {n}"
                )
        x = self.features
        if x is None:
            x = np.empty((n, 0))
        x = np.array(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] != n:
            raise GraphInvariantError(f"feature matrix must have {n} rows, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise GraphInvariantError("feature matrix contains non-finite values")
        y = self.labels
        if y is None:
            y = np.full(n, UNLABELED)
        y = np.array(y, dtype=np.int64).reshape(-1)
        if y.shape != (n,):
            raise GraphInvariantError(f"label vector must have length {n}, got {y.shape}")
        if not np.all(np.isin(y, (UNLABELED, 0, 1))):
            raise GraphInvariantError("labels must be 0, 1 or -1 (unlabeled)")
        names = self.relation_names
        if names is None:
            names = tuple(f"r{r}" for r in range(len(rels)))
        names = tuple(str(s) for s in names)
        if len(names) != len(rels) or len(set(names)) != len(names):
            raise GraphInvariantError("relation names must be unique, one per relation")

        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "relations", rels)
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "relation_names", names)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    def relation(self, r) -> EdgeSet:
        if isinstance(r, str):
            r = self.relation_names.index(r)
        return self.relations[r]

    def with_labels(self, labels) -> "MultiRelationGraph":
        return replace(self, labels=labels)

    def with_features(self, features) -> "MultiRelationGraph":
        return replace(self, features=features)

    def with_relations(self, relations: Sequence[EdgeSet], names=None) -> "MultiRelationGraph":
        return replace(self, relations=tuple(relations), relation_names=names)

    def masked_labels(self, keep) -> "MultiRelationGraph":
        """Copy with every label outside the boolean mask ``keep`` set to unlabeled."""
        y = np.where(np.asarray(keep, dtype=bool), self.labels, UNLABELED)
        return self.with_labels(y)

    def permuted(self, perm) -> "MultiRelationGraph":
        """Relabel node ``v`` as ``perm[v]``; rows of X and Y move accordingly."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        return MultiRelationGraph(
            self.num_nodes,
            tuple(e.permuted(perm) for e in self.relations),
            self.features[inv],
            self.labels[inv],
            self.relation_names,
        )

    def __repr__(self) -> str:
        sizes = ", ".join(f"{n}:{e.num_edges}" for n, e in zip(self.relation_names, self.relations))
        return (
            f"MultiRelationGraph(N={self.num_nodes}, D={self.num_features}, "
            f"relations=[{sizes}], labeled={int(self.labeled_mask.sum())})"
        )


@dataclass(frozen=True)
class LaplacianMatrix:
    matrix: np.ndarray
    form: str = "regular"

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]


def _edges_of(g_or_e, r=0) -> EdgeSet:
    if isinstance(g_or_e, EdgeSet):
        return g_or_e
    return g_or_e.relation(r)


def node_heterophily(g: MultiRelationGraph, r, v: int) -> float:
    """Fraction of the neighbours of ``v`` (in relation ``r``) whose label differs."""
    e = g.relation(r)
    nbrs = e.neighbors(v)
    if len(nbrs) == 0:
        raise DegenerateInputError(f"node {v} has no neighbours in relation {r}")
    y = g.labels
    if y[v] == UNLABELED or np.any(y[nbrs] == UNLABELED):
        raise UnlabeledNodeError(f"node {v} or one of its neighbours is unlabeled")
    return float(np.mean(y[nbrs] != y[v]))


def graph_heterophily(g: MultiRelationGraph, r) -> float:
    """Fraction of fully labeled edges in relation ``r`` joining different labels."""
    e = g.relation(r)
    y = g.labels
    yi, yj = y[e.edges[:, 0]], y[e.edges[:, 1]]
    keep = (yi != UNLABELED) & (yj != UNLABELED)
    if not keep.any():
        raise DegenerateInputError(f"relation {r} has no edge between labeled nodes")
    return float(np.mean(yi[keep] != yj[keep]))


def normalized_adjacency(e: EdgeSet, add_self_loops: bool = True) -> sp.csr_matrix:
    """Symmetric normalisation ``D^-1/2 A D^-1/2`` as a sparse CSR matrix.

    With ``add_self_loops`` the identity is added to ``A`` first (and to the
    degrees). Zero-degree nodes get zero rows and columns.
    """
    a = e.adjacency()
    if add_self_loops:
        a = a + sp.identity(e.num_nodes, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    d = sp.diags(inv_sqrt)
    out = (d @ a @ d).tocsr()
    out.sort_indices()
    return out


def laplacian(e, form: str = "regular", r=0) -> LaplacianMatrix:
    """Dense graph Laplacian, ``D - A`` (regular) or ``I - D^-1/2 A D^-1/2``."""
    e = _edges_of(e, r)
    check_dense_capacity(e.num_nodes)
    if form == "regular":
        a = e.adjacency().toarray()
        mat = np.diag(e.degrees.astype(np.float64)) - a
    elif form == "normalized":
        mat = np.eye(e.num_nodes) - normalized_adjacency(e, add_self_loops=False).toarray()
    else:
        raise ValueError(f"unknown Laplacian form {form!r}")
    return LaplacianMatrix(mat, form)


def label_separation_masks(g: MultiRelationGraph, r) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks over the edges of relation ``r``: (homophilic, heterophilic)
    according to the labels. Edges touching an unlabeled node are in neither."""
    e = g.relation(r)
    yi, yj = g.labels[e.edges[:, 0]], g.labels[e.edges[:, 1]]
    labeled = (yi != UNLABELED) & (yj != UNLABELED)
    return labeled & (yi == yj), labeled & (yi != yj)
