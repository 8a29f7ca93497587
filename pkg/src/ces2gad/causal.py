"""Causal edge separation.

A node pair is *treated* (``T = 1``) when its edge status agrees with label
homophily: an edge between equally labeled nodes, or a non-edge between
differently labeled ones. Each training pair is matched to the most similar
pair under the opposite treatment (its counterfactual), and an MLP edge
classifier ``g(z_i, z_j, t)`` is fitted on factual and counterfactual
outcomes. Observed edges are then routed to the homophilic set when
``g(., ., 1) >= g(., ., 0)`` and to the heterophilic set otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DegenerateInputError, DimensionMismatchError
from .graph import UNLABELED, EdgeSet, MultiRelationGraph, label_separation_masks, laplacian
from .optim import Adam, glorot_uniform
from .spectral import eigendecompose
from .validation import check_graph


@dataclass(frozen=True)
class EdgeSeparation:
    """Per-relation split of the observed edges into homophilic and
    heterophilic edge sets."""

    homophilic: tuple
    heterophilic: tuple
    relation_names: tuple = None

    def __post_init__(self):
        if len(self.homophilic) != len(self.heterophilic):
            raise DimensionMismatchError("homophilic/heterophilic relation counts differ")
        object.__setattr__(self, "homophilic", tuple(self.homophilic))
        object.__setattr__(self, "heterophilic", tuple(self.heterophilic))
        names = self.relation_names
        if names is None:
            names = tuple(f"r{r}" for r in range(len(self.homophilic)))
        object.__setattr__(self, "relation_names", tuple(names))

    @property
    def n_relations(self) -> int:
        return len(self.homophilic)

    def counts(self) -> list[dict]:
        return [
            {"relation": name, "homophilic": len(p), "heterophilic": len(m)}
            for name, p, m in zip(self.relation_names, self.homophilic, self.heterophilic)
        ]


def split_by_mask(e: EdgeSet, homophilic_mask) -> tuple[EdgeSet, EdgeSet]:
    mask = np.asarray(homophilic_mask, dtype=bool)
    return e.subset(mask), e.subset(~mask)


def label_separation(g: MultiRelationGraph) -> EdgeSeparation:
    """Ground-truth separation from the labels. Edges with an unlabeled
    endpoint go to the homophilic set."""
    plus, minus = [], []
    for r, e in enumerate(g.relations):
        _, hetero = label_separation_masks(g, r)
        p, m = split_by_mask(e, ~hetero)
        plus.append(p)
        minus.append(m)
    return EdgeSeparation(plus, minus, g.relation_names)


def no_separation(g: MultiRelationGraph) -> EdgeSeparation:
    """Every edge treated as homophilic, heterophilic sets empty."""
    empty = [EdgeSet(g.num_nodes) for _ in g.relations]
    return EdgeSeparation(g.relations, empty, g.relation_names)


def routing_agreement(g: MultiRelationGraph, sep: EdgeSeparation, r) -> float:
    """Fraction of fully labeled edges of relation ``r`` routed as their
    labels dictate."""
    if isinstance(r, str):
        r = g.relation_names.index(r)
    e = g.relation(r)
    homo, hetero = label_separation_masks(g, r)
    labeled = homo | hetero
    if not labeled.any():
        raise DegenerateInputError(f"relation {r} has no fully labeled edge")
    routed_plus = np.isin(e.edge_codes(), sep.homophilic[r].edge_codes())
    return float(np.mean(routed_plus[labeled] == homo[labeled]))


# -- structural encoding ---------------------------------------------------


@dataclass(frozen=True)
class StructuralEncoding:
    matrix: np.ndarray
    k_se: int


def structural_encoding(g: MultiRelationGraph, r=0, k_se: int = 8) -> StructuralEncoding:
    """Features followed by eigenvectors 2..k_se+1 of the relation's regular
    Laplacian (sign rule applied)."""
    k_se = int(k_se)
    if k_se < 0 or k_se > g.num_nodes - 1:
        raise ValueError(f"k_se must lie in [0, {g.num_nodes - 1}], got {k_se}")
    if k_se == 0:
        return StructuralEncoding(g.features.copy(), 0)
    dec = eigendecompose(laplacian(g.relation(r), "regular"))
    enc = dec.eigenvectors[:, 1 : k_se + 1]
    return StructuralEncoding(np.hstack([g.features, enc]), k_se)


# -- treatment -------------------------------------------------------------


@dataclass(frozen=True)
class TreatmentAssignment:
    """Candidate pairs (canonical ``i < j``, lexicographically sorted) with
    treatment ``T`` and factual outcome ``O`` (edge present)."""

    pairs: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray

    def __len__(self) -> int:
        return len(self.pairs)

    def index_of(self, pair) -> int:
        i, j = sorted(int(v) for v in pair)
        hit = np.flatnonzero((self.pairs[:, 0] == i) & (self.pairs[:, 1] == j))
        if len(hit) == 0:
            raise KeyError(f"pair {(i, j)} is not a candidate")
        return int(hit[0])


def treatment_of(same_label, is_edge):
    """``T = 1`` iff (edge and same label) or (non-edge and different labels)."""
    same_label = np.asarray(same_label, dtype=bool)
    is_edge = np.asarray(is_edge, dtype=bool)
    return (same_label == is_edge).astype(np.int8)


def make_assignment(pairs, labels, is_edge) -> TreatmentAssignment:
    pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
    is_edge = np.asarray(is_edge, dtype=bool)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs, is_edge = pairs[order], is_edge[order]
    labels = np.asarray(labels)
    same = labels[pairs[:, 0]] == labels[pairs[:, 1]]
    return TreatmentAssignment(pairs, treatment_of(same, is_edge), is_edge.astype(np.int8))


def assign_treatment(
    g: MultiRelationGraph,
    r=0,
    nonedge_samples_per_node: int = 5,
    seed=0,
) -> TreatmentAssignment:
    """Candidate set: every observed edge between labeled nodes plus up to
    ``K`` seeded random non-edges per labeled node, both endpoints labeled."""
    e = g.relation(r)
    n = g.num_nodes
    labeled = np.flatnonzero(g.labels != UNLABELED)
    if len(labeled) < 2:
        raise DegenerateInputError("treatment needs at least two labeled nodes")
    y = g.labels
    lab_edges = e.edges[(y[e.edges[:, 0]] != UNLABELED) & (y[e.edges[:, 1]] != UNLABELED)]
    edge_codes = e.edge_codes()

    k = int(nonedge_samples_per_node)
    non_edges = np.empty((0, 2), dtype=np.int64)
    if k > 0:
        rng = np.random.default_rng(seed)
        # oversample, then keep the first K valid partners per node
        draws = labeled[rng.integers(len(labeled), size=(len(labeled), 2 * k))]
        src = np.repeat(labeled, 2 * k)
        dst = draws.ravel()
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        codes = lo * n + hi
        valid = (src != dst) & ~np.isin(codes, edge_codes)
        _, first = np.unique(codes, return_index=True)
        unique = np.zeros(len(codes), dtype=bool)
        unique[first] = True
        valid &= unique
        rank = np.cumsum(valid.reshape(len(labeled), 2 * k), axis=1).ravel()
        keep = valid & (rank <= k)
        non_edges = np.stack([lo[keep], hi[keep]], axis=1)

    pairs = np.vstack([lab_edges, non_edges])
    if len(pairs) == 0:
        raise DegenerateInputError("no labeled candidate pair exists")
    is_edge = np.concatenate([np.ones(len(lab_edges), bool), np.zeros(len(non_edges), bool)])
    return make_assignment(pairs, y, is_edge)


# -- counterfactual matching -----------------------------------------------


@dataclass(frozen=True)
class CounterfactualMatch:
    """``query[k]`` (index into the assignment) is matched to ``match[k]``
    whose factual outcome is ``outcome[k]``; ``score`` is the similarity."""

    query: np.ndarray
    match: np.ndarray
    outcome: np.ndarray
    score: np.ndarray

    def __len__(self) -> int:
        return len(self.query)


def euclidean_similarity(u, v) -> float:
    d = np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)
    return -float(np.sqrt(np.sum(d * d)))


def _distance_rows(x: np.ndarray, rows: np.ndarray) -> np.ndarray:
    diff = x[rows][:, None, :] - x[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def match_counterfactuals(
    x,
    ta: TreatmentAssignment,
    queries=None,
    chunk_size: int = 256,
) -> CounterfactualMatch:
    """Exact counterfactual match for each query pair ``(i, j)``:
    the candidate ``(a, b)`` with ``T_ab = 1 - T_ij`` maximising
    ``s(x_i, x_a) + s(x_j, x_b)`` with ``s = -||.||_2``. Ties go to the
    lexicographically lowest ``(a, b)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatchError("embedding must be a matrix")
    queries = np.arange(len(ta)) if queries is None else np.asarray(queries, dtype=np.int64)
    match = np.empty(len(queries), dtype=np.int64)
    score = np.empty(len(queries))
    pools = {t: np.flatnonzero(ta.treatment == t) for t in (0, 1)}

    for t in (0, 1):
        sel = np.flatnonzero(ta.treatment[queries] == t)
        if len(sel) == 0:
            continue
        pool = pools[1 - t]
        if len(pool) == 0:
            raise DegenerateInputError(f"no candidate pair with treatment {1 - t}")
        a, b = ta.pairs[pool, 0], ta.pairs[pool, 1]
        for lo in range(0, len(sel), chunk_size):
            part = sel[lo : lo + chunk_size]
            qi, qj = ta.pairs[queries[part], 0], ta.pairs[queries[part], 1]
            di = _distance_rows(x, qi)
            dj = _distance_rows(x, qj)
            # pool is in lexicographic order, so argmax's first hit is the tie rule
            s = -di[:, a] + -dj[:, b]
            best = np.argmax(s, axis=1)
            match[part] = pool[best]
            score[part] = s[np.arange(len(part)), best]
    return CounterfactualMatch(queries, match, ta.outcome[match], score)


def find_counterfactual(pair, x, ta: TreatmentAssignment, treatment=None):
    """Counterfactual of one pair; returns ``((a, b), O_ab)``.

    ``treatment`` defaults to the pair's own treatment in ``ta``.
    """
    i, j = (int(v) for v in pair)
    if treatment is None:
        treatment = int(ta.treatment[ta.index_of((i, j))])
    pool = np.flatnonzero(ta.treatment == 1 - treatment)
    if len(pool) == 0:
        raise DegenerateInputError(f"no candidate pair with treatment {1 - treatment}")
    x = np.asarray(x, dtype=np.float64)
    d = _distance_rows(x, np.array([i, j]))
    s = -d[0, ta.pairs[pool, 0]] + -d[1, ta.pairs[pool, 1]]
    best = pool[int(np.argmax(s))]
    return (int(ta.pairs[best, 0]), int(ta.pairs[best, 1])), int(ta.outcome[best])


# -- edge classifier -------------------------------------------------------


def pair_features(z: np.ndarray, pairs: np.ndarray, t) -> np.ndarray:
    """Order-independent classifier input ``(z_i + z_j) || |z_i - z_j| || t``."""
    zi, zj = z[pairs[:, 0]], z[pairs[:, 1]]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (len(pairs),))
    return np.hstack([zi + zj, np.abs(zi - zj), t[:, None]])


def _sigmoid(v):
    return 0.5 * (1.0 + np.tanh(0.5 * v))


@dataclass
class EdgeClassifierParams:
    """One-hidden-layer ReLU MLP with a sigmoid output."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    threshold: float = None
    loss_curve: list = field(default_factory=list)

    def tensors(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2]

    @property
    def input_width(self) -> int:
        return self.w1.shape[0]

    def forward(self, phi: np.ndarray):
        pre = phi @ self.w1 + self.b1
        h = np.maximum(pre, 0.0)
        logit = h @ self.w2 + self.b2
        return logit, (phi, pre, h)

    def predict_proba(self, z, pairs, t) -> np.ndarray:
        return _sigmoid(self.forward(pair_features(z, pairs, t))[0])


def init_edge_classifier(input_width: int, hidden: int = 32, seed=0) -> EdgeClassifierParams:
    rng = np.random.default_rng(seed)
    return EdgeClassifierParams(
        glorot_uniform(rng, input_width, hidden),
        np.zeros(hidden),
        glorot_uniform(rng, hidden, 1)[:, 0],
        np.zeros(()),
    )


def edge_classifier_loss(params: EdgeClassifierParams, phi: np.ndarray, target: np.ndarray, with_grad=True):
    """Mean binary cross-entropy and its gradients."""
    logit, (phi, pre, h) = params.forward(phi)
    # log(1 + exp(-|v|)) form is stable for either sign
    loss = float(np.mean(np.maximum(logit, 0) - logit * target + np.log1p(np.exp(-np.abs(logit)))))
    if not with_grad:
        return loss
    g_logit = (_sigmoid(logit) - target) / len(target)
    g_w2 = h.T @ g_logit
    g_b2 = np.asarray(g_logit.sum())
    g_h = np.outer(g_logit, params.w2)
    g_pre = g_h * (pre > 0)
    g_w1 = phi.T @ g_pre
    g_b1 = g_pre.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2]


def training_pairs(z, ta: TreatmentAssignment, cf: CounterfactualMatch):
    """Stacked classifier inputs and targets: factual pairs with their own
    treatment and outcome, then the same pairs with the flipped treatment and
    the matched pair's outcome."""
    pairs = ta.pairs[cf.query]
    t = ta.treatment[cf.query].astype(np.float64)
    phi = np.vstack([pair_features(z, pairs, t), pair_features(z, pairs, 1.0 - t)])
    target = np.concatenate([ta.outcome[cf.query], cf.outcome]).astype(np.float64)
    return phi, target


def train_edge_classifier(
    z,
    ta: TreatmentAssignment,
    cf: CounterfactualMatch,
    hidden: int = 32,
    epochs: int = 300,
    lr: float = 0.01,
    weight_decay: float = 0.0,
    seed=0,
) -> EdgeClassifierParams:
    """Full-batch Adam on the equally weighted factual + counterfactual BCE."""
    z = np.asarray(z, dtype=np.float64)
    outcomes = ta.outcome[cf.query]
    if not (outcomes == 1).any() or not (outcomes == 0).any():
        raise DegenerateInputError("factual pairs must include both edges and non-edges")
    phi, target = training_pairs(z, ta, cf)
    params = init_edge_classifier(phi.shape[1], hidden, seed)
    opt = Adam(params.tensors(), lr=lr, weight_decay=weight_decay)
    curve = []
    for _ in range(epochs):
        loss, grads = edge_classifier_loss(params, phi, target)
        curve.append(loss)
        opt.step(grads)
    params.loss_curve = curve
    return params


def route_edges(params: EdgeClassifierParams, z, e: EdgeSet) -> np.ndarray:
    """Boolean mask over ``e.edges``: True where ``g(., ., 1) >= g(., ., 0)``."""
    if len(e) == 0:
        return np.zeros(0, dtype=bool)
    p_plus = params.predict_proba(z, e.edges, 1.0)
    p_minus = params.predict_proba(z, e.edges, 0.0)
    return p_plus >= p_minus


def separate_edges(g: MultiRelationGraph, params, z, relations=None) -> EdgeSeparation:
    """Route every observed edge to exactly one of the two sets.

    ``params`` and ``z`` are either single objects used for all relations or
    per-relation sequences.
    """
    plus, minus = [], []
    for r, e in enumerate(g.relations):
        p = params[r] if isinstance(params, (list, tuple)) else params
        zr = z[r] if isinstance(z, (list, tuple)) else z
        a, b = split_by_mask(e, route_edges(p, zr, e))
        plus.append(a)
        minus.append(b)
    return EdgeSeparation(plus, minus, g.relation_names)


# -- estimator -------------------------------------------------------------


class PairEmbedding:
    """Standardise columns, then project onto at most ``d_z`` principal
    directions."""

    def __init__(self, d_z: int):
        self.d_z = d_z

    def fit(self, x):
        x = np.asarray(x, dtype=np.float64)
        self.mean_ = x.mean(axis=0)
        std = x.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        xs = (x - self.mean_) / self.scale_
        if xs.shape[1] > self.d_z:
            _, _, vt = np.linalg.svd(xs, full_matrices=False)
            comps = vt[: self.d_z].T
            self.components_ = comps * np.sign(comps[np.argmax(np.abs(comps), axis=0), np.arange(comps.shape[1])])
        else:
            self.components_ = None
        return self

    def transform(self, x):
        xs = (np.asarray(x, dtype=np.float64) - self.mean_) / self.scale_
        return xs if self.components_ is None else xs @ self.components_


class CausalEdgeSeparator(TransformerMixin, BaseEstimator):
    """Learns one edge classifier per relation from the labeled nodes and
    splits observed edges into homophilic and heterophilic sets.

    Parameters
    ----------
    k_se : int
        Laplacian eigenvectors appended to the features for matching.
    d_z : int
        Maximum width of the node embedding fed to the edge classifier.
    hidden : int
        Hidden width of the edge classifier.
    n_nonedge : int
        Random labeled non-edges sampled per labeled node.
    epochs, lr : training budget of the edge classifier.
    random_state : int
        Seed for sampling and initialisation.
    """

    def __init__(self, k_se=8, d_z=32, hidden=32, n_nonedge=5, epochs=300, lr=0.01, random_state=0):
        self.k_se = k_se
        self.d_z = d_z
        self.hidden = hidden
        self.n_nonedge = n_nonedge
        self.epochs = epochs
        self.lr = lr
        self.random_state = random_state

    def _encode(self, g: MultiRelationGraph, r: int) -> np.ndarray:
        k = min(self.k_se, g.num_nodes - 1)
        return structural_encoding(g, r, k).matrix

    def fit(self, g: MultiRelationGraph, y=None, label_mask=None, embeddings=None):
        """Fit on the labels of ``g`` (restricted to ``label_mask`` when given).

        ``embeddings`` replaces the projected structural encoding as the
        classifier input (one matrix shared by all relations).
        """
        g = check_graph(g)
        if y is not None:
            g = g.with_labels(y)
        if label_mask is not None:
            g = g.masked_labels(label_mask)
        seeds = np.random.SeedSequence(self.random_state).spawn(g.num_relations)
        self.projections_, self.classifiers_, self.assignments_, self.matches_ = [], [], [], []
        self.embeddings_ = []
        for r in range(g.num_relations):
            s_sample, s_init = (int(s.generate_state(1)[0]) for s in seeds[r].spawn(2))
            xt = self._encode(g, r)
            if embeddings is None:
                proj = PairEmbedding(self.d_z).fit(xt)
                z = proj.transform(xt)
            else:
                proj = None
                z = np.asarray(embeddings, dtype=np.float64)
            ta = assign_treatment(g, r, self.n_nonedge, s_sample)
            cf = match_counterfactuals(xt, ta)
            clf = train_edge_classifier(z, ta, cf, self.hidden, self.epochs, self.lr, seed=s_init)
            self.projections_.append(proj)
            self.classifiers_.append(clf)
            self.assignments_.append(ta)
            self.matches_.append(cf)
            self.embeddings_.append(z)
        self.n_relations_ = g.num_relations
        self.num_nodes_ = g.num_nodes
        return self

    def embed(self, g: MultiRelationGraph) -> list:
        check_is_fitted(self, "classifiers_")
        out = []
        for r in range(g.num_relations):
            proj = self.projections_[r]
            out.append(self.embeddings_[r] if proj is None else proj.transform(self._encode(g, r)))
        return out

    def transform(self, g: MultiRelationGraph) -> EdgeSeparation:
        check_is_fitted(self, "classifiers_")
        g = check_graph(g)
        if g.num_relations != self.n_relations_:
            raise DimensionMismatchError(
                f"fitted on {self.n_relations_} relations, got {g.num_relations}"
            )
        return separate_edges(g, self.classifiers_, self.embed(g))

    def fit_transform(self, g, y=None, **fit_params):
        return self.fit(g, y, **fit_params).transform(g)
