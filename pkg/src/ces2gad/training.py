"""Anomaly classifier head, loss, node splits and the training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, DimensionMismatchError
from .filters import HybridEncoder, HybridModelParams
from .graph import UNLABELED, MultiRelationGraph
from .metrics import auc, confusion_counts, f1_macro
from .optim import Adam, glorot_uniform

PROB_EPS = 1e-12

TRAIN, VAL, TEST, EXCLUDED = 0, 1, 2, -1
PART_NAMES = {TRAIN: "train", VAL: "val", TEST: "test", EXCLUDED: "excluded"}


# -- splits ----------------------------------------------------------------


@dataclass(frozen=True)
class SplitAssignment:
    """Per-node tag: 0 train, 1 val, 2 test, -1 excluded (unlabeled)."""

    tags: np.ndarray
    seed: int = 0

    def indices(self, part) -> np.ndarray:
        if isinstance(part, str):
            part = {v: k for k, v in PART_NAMES.items()}[part]
        return np.flatnonzero(self.tags == part)

    @property
    def train(self) -> np.ndarray:
        return self.indices(TRAIN)

    @property
    def val(self) -> np.ndarray:
        return self.indices(VAL)

    @property
    def test(self) -> np.ndarray:
        return self.indices(TEST)

    def mask(self, part) -> np.ndarray:
        return np.isin(np.arange(len(self.tags)), self.indices(part))

    def sizes(self) -> dict:
        return {name: int(np.sum(self.tags == tag)) for tag, name in PART_NAMES.items()}


def split_nodes(g: MultiRelationGraph, ratios=(0.4, 0.2, 0.4), seed=0) -> SplitAssignment:
    """Stratified seeded split of the labeled nodes.

    Within each class the validation and test sizes are ``floor(ratio * n)``;
    the remainder goes to training.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    tags = np.full(g.num_nodes, EXCLUDED, dtype=np.int64)
    rng = np.random.default_rng(seed)
    for cls in (0, 1):
        nodes = np.flatnonzero(g.labels == cls)
        if len(nodes) < 5:
            raise DegenerateInputError(f"class {cls} has {len(nodes)} labeled nodes, need at least 5")
        nodes = rng.permutation(nodes)
        n_val = int(np.floor(ratios[1] * len(nodes)))
        n_test = int(np.floor(ratios[2] * len(nodes)))
        n_train = len(nodes) - n_val - n_test
        tags[nodes[:n_train]] = TRAIN
        tags[nodes[n_train : n_train + n_val]] = VAL
        tags[nodes[n_train + n_val :]] = TEST
    return SplitAssignment(tags, seed)


# -- head ------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ClassifierHead:
    """ReLU MLP with one hidden layer and two output logits."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def tensors(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2]

    def named_tensors(self) -> dict:
        return {"head.w1": self.w1, "head.b1": self.b1, "head.w2": self.w2, "head.b2": self.b2}

    @classmethod
    def from_named(cls, t: dict) -> "ClassifierHead":
        return cls(t["head.w1"], t["head.b1"], t["head.w2"], t["head.b2"])

    @property
    def input_width(self) -> int:
        return self.w1.shape[0]

    def forward(self, h: np.ndarray):
        if h.shape[1] != self.input_width:
            raise DimensionMismatchError(f"head expects {self.input_width} inputs, got {h.shape[1]}")
        pre = h @ self.w1 + self.b1
        a = np.maximum(pre, 0.0)
        return a @ self.w2 + self.b2, (h, pre, a)

    def backward(self, cache, grad_logits: np.ndarray):
        h, pre, a = cache
        g_w2 = a.T @ grad_logits
        g_b2 = grad_logits.sum(axis=0)
        g_pre = (grad_logits @ self.w2.T) * (pre > 0)
        g_w1 = h.T @ g_pre
        g_b1 = g_pre.sum(axis=0)
        return [g_w1, g_b1, g_w2, g_b2], g_pre @ self.w1.T

    def copy(self) -> "ClassifierHead":
        return ClassifierHead(*(t.copy() for t in self.tensors()))


def init_head(input_width: int, hidden: int = 64, seed=0, zero_output: bool = False) -> ClassifierHead:
    rng = np.random.default_rng(seed)
    w2 = np.zeros((hidden, 2)) if zero_output else glorot_uniform(rng, hidden, 2)
    return ClassifierHead(glorot_uniform(rng, input_width, hidden), np.zeros(hidden), w2, np.zeros(2))


def cross_entropy_loss(p, y, weights=None) -> float:
    """Summed binary cross-entropy of anomaly probabilities ``p``."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(y, dtype=np.float64)
    if p.size == 0:
        raise DegenerateInputError("cross-entropy over an empty training set")
    if p.shape != y.shape:
        raise DimensionMismatchError("probability and label shapes differ")
    terms = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    if weights is not None:
        terms = terms * weights
    return float(terms.sum())


# -- model -----------------------------------------------------------------


@dataclass
class HybridModel:
    """Filters plus head; ``residual`` appends the raw features to the head input."""

    filters: HybridModelParams
    head: ClassifierHead
    residual: bool = True
    branches: str = "both"

    def tensors(self) -> list:
        return self.filters.tensors(self.branches) + self.head.tensors()

    def copy(self) -> "HybridModel":
        return HybridModel(self.filters.copy(), self.head.copy(), self.residual, self.branches)


def head_input_width(n_features: int, n_relations: int, hidden: int, residual: bool, branches: str) -> int:
    per = 2 if branches == "both" else 1
    return per * hidden * n_relations + (n_features if residual else 0)


def model_forward(model: HybridModel, encoder: HybridEncoder, x: np.ndarray):
    z, enc_cache = encoder.forward(x, model.filters)
    h = np.hstack([z, x]) if model.residual else z
    logits, head_cache = model.head.forward(h)
    return softmax(logits), (enc_cache, head_cache, z.shape[1])


def loss_and_grads(model: HybridModel, encoder: HybridEncoder, x, y, train_idx, class_weight=None):
    """Summed cross-entropy over ``train_idx`` and gradients in the order of
    :meth:`HybridModel.tensors`."""
    probs, (enc_cache, head_cache, z_width) = model_forward(model, encoder, x)
    yt = y[train_idx]
    w = None if class_weight is None else class_weight[yt]
    loss = cross_entropy_loss(probs[train_idx, 1], yt, w)
    # d(-log softmax_y)/d logits = softmax - onehot
    g_logits = np.zeros_like(probs)
    g = probs[train_idx].copy()
    g[np.arange(len(train_idx)), yt] -= 1.0
    if w is not None:
        g *= w[:, None]
    g_logits[train_idx] = g
    head_grads, g_h = model.head.backward(head_cache, g_logits)
    enc_grads = encoder.backward(enc_cache, g_h[:, :z_width], model.filters)
    return loss, enc_grads + head_grads, probs


# -- evaluation ------------------------------------------------------------


@dataclass
class EvalReport:
    f1_macro: float
    auc: float
    confusion: dict
    n_nodes: int
    loss_curve: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "f1_macro": self.f1_macro,
            "auc": self.auc,
            "confusion": dict(self.confusion),
            "n_nodes": self.n_nodes,
        }


def evaluate(probs, labels, idx, loss_curve=None) -> EvalReport:
    """F1-macro of argmax predictions and AUC of the anomaly probability."""
    probs = np.asarray(probs)
    idx = np.asarray(idx)
    score = probs[idx, 1] if probs.ndim == 2 else probs[idx]
    y = np.asarray(labels)[idx]
    pred = (score > 0.5).astype(np.int64) if probs.ndim == 1 else np.argmax(probs[idx], axis=1)
    return EvalReport(
        f1_macro(pred, y),
        auc(score, y),
        confusion_counts(pred, y),
        int(len(idx)),
        list(loss_curve or []),
    )


# -- training loop ---------------------------------------------------------


@dataclass
class TrainResult:
    model: HybridModel
    loss_curve: list
    val_f1_curve: list
    best_epoch: int


def inverse_frequency_weights(y_train) -> np.ndarray:
    counts = np.bincount(y_train, minlength=2).astype(np.float64)
    return len(y_train) / (2.0 * counts)


def train(
    g: MultiRelationGraph,
    sep,
    model: HybridModel,
    split: SplitAssignment,
    lr: float = 0.01,
    epochs: int = 200,
    weight_decay: float = 5e-4,
    class_weight: bool = False,
) -> TrainResult:
    """Full-batch Adam on the summed training cross-entropy.

    Each epoch records the training loss and the validation F1-macro of the
    current parameters, then updates them. The returned model is the one
    with the best validation F1-macro (earliest on ties), including the
    final parameters.
    """
    train_idx = split.train
    val_idx = split.val
    y = g.labels
    if len(train_idx) == 0 or len(np.unique(y[train_idx])) < 2:
        raise DegenerateInputError("the training split must contain both classes")
    if np.any(y[train_idx] == UNLABELED):
        raise DegenerateInputError("training split contains unlabeled nodes")
    x = g.features
    encoder = HybridEncoder(sep, model.filters.alpha, model.branches)
    cw = inverse_frequency_weights(y[train_idx]) if class_weight else None
    model = model.copy()
    opt = Adam(model.tensors(), lr=lr, weight_decay=weight_decay)

    def val_f1(probs):
        if len(val_idx) == 0:
            return 0.0
        return f1_macro(np.argmax(probs[val_idx], axis=1), y[val_idx])

    loss_curve, f1_curve = [], []
    best, best_f1, best_epoch = None, -np.inf, -1
    for epoch in range(epochs):
        loss, grads, probs = loss_and_grads(model, encoder, x, y, train_idx, cw)
        f1 = val_f1(probs)
        loss_curve.append(loss)
        f1_curve.append(f1)
        if f1 > best_f1:
            best, best_f1, best_epoch = model.copy(), f1, epoch
        opt.step(grads)
    probs, _ = model_forward(model, encoder, x)
    if val_f1(probs) > best_f1:
        best, best_epoch = model.copy(), epochs
    return TrainResult(best, loss_curve, f1_curve, best_epoch)


def predict_proba(g: MultiRelationGraph, sep, model: HybridModel) -> np.ndarray:
    encoder = HybridEncoder(sep, model.filters.alpha, model.branches)
    return model_forward(model, encoder, g.features)[0]
