"""Synthetic graphs with injected heterophilic anomalies.

The injection scheme realises camouflaged anomalies: every anomaly gets
extra edges to random normal nodes and noisier features than normal nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import EdgeSet, MultiRelationGraph, graph_heterophily, laplacian
from .spectral import (
    default_split_index,
    eigendecompose,
    energy_ratio,
    graph_fourier_transform,
    label_high_freq_area,
)


@dataclass(frozen=True)
class InjectionConfig:
    """Anomaly injection settings.

    ratio: fraction of nodes made anomalous (``round(ratio * N)`` of them).
    sigma: standard deviation of anomalous features (normal nodes use 1).
    rewire: extra anomaly-to-normal edges per anomaly.
    n_features: feature dimension of the generated matrix.
    """

    ratio: float = 0.1
    sigma: float = 2.0
    rewire: int = 2
    seed: int = 0
    n_features: int = 16

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"anomaly ratio must lie in [0, 1], got {self.ratio}")
        if self.sigma <= 1.0:
            raise ValueError(f"sigma must exceed 1, got {self.sigma}")
        if self.rewire < 0:
            raise ValueError("rewire must be non-negative")
        if self.n_features < 1:
            raise ValueError("n_features must be positive")


def anomaly_count(ratio: float, n: int) -> int:
    """``round(ratio * n)`` with halves rounded up."""
    return int(np.floor(ratio * n + 0.5))


def barabasi_albert(n: int, m: int, seed=None) -> MultiRelationGraph:
    """Preferential-attachment graph with ``m * (n - m)`` edges.

    Starts from ``m`` isolated nodes; node ``m`` links to all of them and each
    later node links to ``m`` distinct earlier nodes drawn with probability
    proportional to degree.
    """
    n, m = int(n), int(m)
    if m < 1 or n <= m:
        raise ValueError(f"need n > m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    edges = np.empty((m * (n - m), 2), dtype=np.int64)
    # every endpoint occurrence, so uniform draws from it are degree-weighted
    pool = np.empty(2 * m * (n - m), dtype=np.int64)
    filled = 0
    targets = np.arange(m)
    for v in range(m, n):
        lo = (v - m) * m
        edges[lo : lo + m, 0] = targets
        edges[lo : lo + m, 1] = v
        pool[filled : filled + m] = targets
        pool[filled + m : filled + 2 * m] = v
        filled += 2 * m
        chosen = set()
        while len(chosen) < m:
            chosen.add(int(pool[rng.integers(filled)]))
        targets = np.fromiter(sorted(chosen), dtype=np.int64, count=m)
    return MultiRelationGraph(n, (EdgeSet(n, edges),), relation_names=("ba",))


def inject_anomalies(g: MultiRelationGraph, cfg: InjectionConfig) -> MultiRelationGraph:
    """Label, featurise and rewire an unlabeled graph.

    Independent random streams drive anomaly selection, features and rewiring,
    so for a fixed seed the anomaly sets are nested as the ratio grows and the
    base noise is shared.
    """
    n = g.num_nodes
    sel_rng, feat_rng, wire_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3)
    )
    k = anomaly_count(cfg.ratio, n)
    anomalies = sel_rng.permutation(n)[:k]
    labels = np.zeros(n, dtype=np.int64)
    labels[anomalies] = 1

    x = feat_rng.standard_normal((n, cfg.n_features))
    x[anomalies] *= cfg.sigma

    normals = np.flatnonzero(labels == 0)
    relations = []
    for e in g.relations:
        if k == 0 or cfg.rewire == 0 or len(normals) == 0:
            relations.append(e)
            continue
        existing = set(e.edge_codes().tolist())
        new = []
        per = min(cfg.rewire, len(normals))
        for a in anomalies:
            for b in wire_rng.choice(normals, size=per, replace=False):
                i, j = (a, b) if a < b else (b, a)
                code = int(i) * n + int(j)
                if code not in existing:
                    existing.add(code)
                    new.append((i, j))
        if new:
            e = EdgeSet(n, np.vstack([e.edges, np.asarray(new, dtype=np.int64)]))
        relations.append(e)
    return MultiRelationGraph(n, tuple(relations), x, labels, g.relation_names)


SHIFT_COLUMNS = (
    "ratio",
    "seed",
    "eta_k_features",
    "eta_k_labels",
    "s_high_labels",
    "graph_heterophily",
)


def spectral_shift_cell(n: int, m: int, cfg: InjectionConfig, k: int = None) -> dict:
    """One (ratio, seed) cell of the energy-shift experiment.

    The base graph is drawn from ``cfg.seed`` so that all ratios for a seed
    share it. For the all-normal label signal the label quantities are 0.
    """
    g = inject_anomalies(barabasi_albert(n, m, cfg.seed), cfg)
    e = g.relations[0]
    dec = eigendecompose(laplacian(e, "regular"))
    k = default_split_index(n) if k is None else k
    eta_x = energy_ratio(graph_fourier_transform(dec, g.features), k)
    y = g.labels.astype(np.float64)
    if y.any():
        eta_y = energy_ratio(graph_fourier_transform(dec, y), k)
        s_high = label_high_freq_area(e, y)
    else:
        eta_y, s_high = 0.0, 0.0
    return {
        "ratio": cfg.ratio,
        "seed": cfg.seed,
        "eta_k_features": eta_x,
        "eta_k_labels": eta_y,
        "s_high_labels": s_high,
        "graph_heterophily": graph_heterophily(g, 0),
    }


def spectral_shift_experiment(
    n: int,
    m: int,
    ratios,
    cfg: InjectionConfig = None,
    seeds=range(10),
    k: int = None,
) -> list[dict]:
    """Rows ``(ratio, seed, eta_k(features), eta_k(labels), S_high(labels),
    heterophily)`` for every ratio in the grid and every seed."""
    ratios = list(ratios)
    if not ratios:
        raise ValueError("ratio grid is empty")
    cfg = cfg or InjectionConfig()
    rows = []
    for ratio in ratios:
        for s in seeds:
            cell = InjectionConfig(ratio, cfg.sigma, cfg.rewire, int(s), cfg.n_features)
            rows.append(spectral_shift_cell(n, m, cell, k))
    return rows


def summarize_shift(rows: list[dict]) -> list[dict]:
    """Per-ratio means of the experiment columns, in grid order."""
    out = {}
    for row in rows:
        out.setdefault(row["ratio"], []).append(row)
    summary = []
    for ratio, group in out.items():
        entry = {"ratio": ratio, "n_seeds": len(group)}
        for col in SHIFT_COLUMNS[2:]:
            entry[col] = float(np.mean([r[col] for r in group]))
        summary.append(entry)
    return summary

