"""Dataset directories, separation CSVs and checkpoint files.

Dataset directory layout::

    meta                 key=value lines: num_nodes, num_features,
                         num_relations, relations (comma separated names)
    features.csv         header f0..f{D-1}, N rows
    labels.csv           header node_id,label; label in {0, 1, -1}
    edges_<name>.csv     header src,dst; one undirected edge per row

Checkpoint layout: the magic line ``CES2CKPT``, one JSON header line
(version, metadata, tensor shape table, payload size and SHA-256), then
the tensors as contiguous little-endian float64 in row-major order.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    CheckpointCorruptError,
    CheckpointVersionError,
    DataFormatError,
    GraphInvariantError,
)
from .graph import UNLABELED, EdgeSet, MultiRelationGraph

CHECKPOINT_MAGIC = b"CES2CKPT\n"
CHECKPOINT_VERSION = 1


# -- datasets --------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSummary:
    num_nodes: int
    num_features: int
    relations: tuple
    edge_rows: tuple
    edge_counts: tuple
    labeled: int
    anomalies: int

    @property
    def anomaly_rate(self) -> float:
        return self.anomalies / self.labeled if self.labeled else 0.0

    def to_dict(self) -> dict:
        return {
            "num_nodes": self.num_nodes,
            "num_features": self.num_features,
            "relations": [
                {"name": n, "edge_rows": r, "edges": c}
                for n, r, c in zip(self.relations, self.edge_rows, self.edge_counts)
            ],
            "labeled": self.labeled,
            "anomalies": self.anomalies,
            "anomaly_rate": self.anomaly_rate,
        }

    def format(self) -> str:
        lines = [
            f"nodes: {self.num_nodes}  features: {self.num_features}  relations: {len(self.relations)}",
            f"labeled: {self.labeled}  anomalies: {self.anomalies} ({100 * self.anomaly_rate:.2f}% of labeled)",
        ]
        for n, r, c in zip(self.relations, self.edge_rows, self.edge_counts):
            lines.append(f"  {n}: {r} edge rows, {c} unique undirected edges")
        return "\n".join(lines)


def read_meta(path: Path) -> dict:
    meta = {}
    if not path.exists():
        raise DataFormatError(f"{path}: file not found")
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataFormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            meta[key] = value
    try:
        out = {
            "num_nodes": int(meta["num_nodes"]),
            "num_features": int(meta["num_features"]),
            "num_relations": int(meta["num_relations"]),
            "relations": [s.strip() for s in meta["relations"].split(",") if s.strip()],
        }
    except KeyError as err:
        raise DataFormatError(f"{path}: missing key {err.args[0]!r}") from None
    except ValueError as err:
        raise DataFormatError(f"{path}: {err}") from None
    if len(out["relations"]) != out["num_relations"]:
        raise DataFormatError(
            f"{path}: num_relations={out['num_relations']} but {len(out['relations'])} names listed"
        )
    return out


def _read_csv(path: Path, dtype, ncols: int) -> np.ndarray:
    if not path.exists():
        raise DataFormatError(f"{path}: file not found")
    try:
        with open(path) as fh:
            header = fh.readline()
            if not header.strip():
                raise DataFormatError(f"{path}:1: missing header row")
            body = fh.read()
            if not body.strip():
                return np.empty((0, ncols), dtype=dtype)
            data = np.loadtxt(io.StringIO(body), delimiter=",", dtype=dtype, ndmin=2)
    except ValueError as err:
        # loadtxt rows are counted after the header
        raise DataFormatError(f"{path}: {err} (row numbers exclude the header)") from None
    if data.size == 0:
        return np.empty((0, ncols), dtype=dtype)
    if data.shape[1] != ncols:
        raise DataFormatError(f"{path}: expected {ncols} columns, found {data.shape[1]}")
    return data


def load_dataset_with_summary(path) -> tuple[MultiRelationGraph, DatasetSummary]:
    path = Path(path)
    meta = read_meta(path / "meta")
    n, d = meta["num_nodes"], meta["num_features"]
    if d > 0:
        x = _read_csv(path / "features.csv", np.float64, d)
    else:
        x = np.empty((n, 0))
    if x.shape[0] != n:
        raise GraphInvariantError(f"features.csv has {x.shape[0]} rows, meta declares {n} nodes")

    lab = _read_csv(path / "labels.csv", np.int64, 2)
    labels = np.full(n, UNLABELED, dtype=np.int64)
    if len(lab):
        ids, vals = lab[:, 0], lab[:, 1]
        if ids.min() < 0 or ids.max() >= n:
            raise GraphInvariantError(f"labels.csv references a node outside [0, {n})")
        if len(np.unique(ids)) != len(ids):
            raise GraphInvariantError("labels.csv lists a node more than once")
        if not np.all(np.isin(vals, (UNLABELED, 0, 1))):
            raise GraphInvariantError("labels.csv labels must be 0, 1 or -1")
        labels[ids] = vals

    relations, rows = [], []
    for name in meta["relations"]:
        fname = path / f"edges_{name}.csv"
        edges = _read_csv(fname, np.int64, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            bad = np.flatnonzero((edges < 0).any(1) | (edges >= n).any(1))[0]
            raise GraphInvariantError(
                f"{fname}: data row {bad + 1} references node outside [0, {n}): {tuple(edges[bad])}"
            )
        rows.append(len(edges))
        relations.append(EdgeSet.from_pairs(n, edges))
    g = MultiRelationGraph(n, tuple(relations), x, labels, tuple(meta["relations"]))
    summary = DatasetSummary(
        n,
        d,
        g.relation_names,
        tuple(rows),
        tuple(e.num_edges for e in relations),
        int(np.sum(labels != UNLABELED)),
        int(np.sum(labels == 1)),
    )
    return g, summary


def load_dataset(path) -> MultiRelationGraph:
    """Parse a dataset directory. Self-loops and repeated rows in edge files
    are dropped; out-of-range endpoints are rejected."""
    return load_dataset_with_summary(path)[0]


def summarize(g: MultiRelationGraph) -> DatasetSummary:
    return DatasetSummary(
        g.num_nodes,
        g.num_features,
        g.relation_names,
        tuple(e.num_edges for e in g.relations),
        tuple(e.num_edges for e in g.relations),
        int(g.labeled_mask.sum()),
        int(np.sum(g.labels == 1)),
    )


def write_edges(path, e: EdgeSet) -> None:
    with open(path, "w") as fh:
        fh.write("src,dst\n")
        for i, j in e.edges:
            fh.write(f"{i},{j}\n")


def write_dataset(g: MultiRelationGraph, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "meta", "w") as fh:
        fh.write(f"num_nodes={g.num_nodes}\n")
        fh.write(f"num_features={g.num_features}\n")
        fh.write(f"num_relations={g.num_relations}\n")
        fh.write(f"relations={','.join(g.relation_names)}\n")
    with open(path / "features.csv", "w") as fh:
        fh.write(",".join(f"f{c}" for c in range(g.num_features)) + "\n")
        for row in g.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(path / "labels.csv", "w") as fh:
        fh.write("node_id,label\n")
        for v, y in enumerate(g.labels):
            fh.write(f"{v},{y}\n")
    for name, e in zip(g.relation_names, g.relations):
        write_edges(path / f"edges_{name}.csv", e)
    return path


def graphs_equal(a: MultiRelationGraph, b: MultiRelationGraph) -> bool:
    return (
        a.num_nodes == b.num_nodes
        and a.relation_names == b.relation_names
        and all(x == y for x, y in zip(a.relations, b.relations))
        and np.array_equal(a.features, b.features)
        and np.array_equal(a.labels, b.labels)
    )


# -- separation files ------------------------------------------------------


def write_separation(sep, path) -> list[Path]:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    for name, plus, minus in zip(sep.relation_names, sep.homophilic, sep.heterophilic):
        for suffix, e in (("homo", plus), ("hetero", minus)):
            f = path / f"edges_{name}_{suffix}.csv"
            write_edges(f, e)
            written.append(f)
    return written


def read_separation(path, g: MultiRelationGraph):
    from .causal import EdgeSeparation

    path = Path(path)
    plus, minus = [], []
    for name in g.relation_names:
        for suffix, out in (("homo", plus), ("hetero", minus)):
            edges = _read_csv(path / f"edges_{name}_{suffix}.csv", np.int64, 2)
            out.append(EdgeSet(g.num_nodes, edges))
    return EdgeSeparation(plus, minus, g.relation_names)


# -- checkpoints -----------------------------------------------------------


def save_checkpoint(path, tensors: dict, meta: dict = None) -> Path:
    """Write named float64 tensors plus JSON-serialisable metadata."""
    path = Path(path)
    table, chunks = [], []
    for name, t in tensors.items():
        arr = np.array(t, dtype="<f8", order="C")
        table.append({"name": name, "shape": list(arr.shape)})
        chunks.append(arr.tobytes(order="C"))
    payload = b"".join(chunks)
    header = {
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "tensors": table,
        "dtype": "<f8",
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> tuple[dict, dict]:
    """Return ``(tensors, meta)``; raises on corruption or a foreign version."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointCorruptError(f"{path}: not a checkpoint file")
    rest = blob[len(CHECKPOINT_MAGIC) :]
    nl = rest.find(b"\n")
    if nl < 0:
        raise CheckpointCorruptError(f"{path}: truncated header")
    try:
        header = json.loads(rest[:nl])
    except json.JSONDecodeError:
        raise CheckpointCorruptError(f"{path}: unreadable header") from None
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {header.get('version')!r}, expected {CHECKPOINT_VERSION}"
        )
    payload = rest[nl + 1 :]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointCorruptError(
            f"{path}: payload has {len(payload)} bytes, header declares {header['payload_bytes']}"
        )
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise CheckpointCorruptError(f"{path}: payload checksum mismatch")
    tensors, offset = {}, 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape)
        tensors[entry["name"]] = arr.astype(np.float64)
        offset += 8 * count
    if offset != len(payload):
        raise CheckpointCorruptError(f"{path}: shape table does not match payload size")
    return tensors, header["meta"]


def save_model(path, model, extra_meta: dict = None) -> Path:
    """Checkpoint a :class:`~ces2gad.training.HybridModel`."""
    f = model.filters
    tensors = {**f.named_tensors(), **model.head.named_tensors()}
    meta = {
        "alpha": f.alpha,
        "n_layers": f.n_layers,
        "n_relations": f.n_relations,
        "hidden": f.hidden,
        "residual": model.residual,
        "branches": model.branches,
    }
    meta.update(extra_meta or {})
    return save_checkpoint(path, tensors, meta)


def load_model(path):
    from .filters import HybridModelParams
    from .training import ClassifierHead, HybridModel

    tensors, meta = load_checkpoint(path)
    filters = HybridModelParams.from_named(tensors, meta["n_relations"], meta["n_layers"], meta["alpha"])
    model = HybridModel(filters, ClassifierHead.from_named(tensors), meta["residual"], meta["branches"])
    return model, meta
