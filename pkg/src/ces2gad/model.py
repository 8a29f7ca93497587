"""End-to-end anomaly detector: causal edge separation, hybrid filters and
an MLP head, behind a scikit-learn style estimator.

The estimator is transductive: ``fit`` and ``predict`` take the same
:class:`~ces2gad.graph.MultiRelationGraph`, and predictions cover all its nodes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .causal import CausalEdgeSeparator, label_separation, no_separation
from .filters import hybrid_forward, init_hybrid_params
from .training import (
    HybridModel,
    SplitAssignment,
    evaluate,
    head_input_width,
    init_head,
    predict_proba,
    split_nodes,
    train,
)
from .validation import check_graph

SEPARATIONS = ("causal", "labels", "none")


class CES2GAD(ClassifierMixin, BaseEstimator):
    """Graph anomaly detector with causal edge separation and hybrid
    low-/high-pass filters.

    Parameters
    ----------
    k_se, d_z, h_g, n_nonedge, sep_epochs, sep_lr :
        Edge separator settings (see :class:`CausalEdgeSeparator`).
    n_layers, hidden, alpha :
        Filter depth, width and high-pass strength.
    head_hidden : int
        Hidden width of the classifier head.
    lr, epochs, weight_decay :
        Adam settings for the joint filter + head training.
    residual : bool
        Append raw features to the head input.
    branches : {"both", "low", "high"}
        Filter branches in use; ``"low"`` is the low-pass-only ablation.
    separation : {"causal", "labels", "none"}
        How edges are split. ``"labels"`` uses the training labels directly
        (an oracle for diagnostics); ``"none"`` keeps every edge homophilic.
    class_weight : bool
        Weight the loss by inverse class frequency.
    refine : bool
        After training, re-fit the edge classifier on the learned embeddings,
        re-separate and train again.
    split_ratios : tuple
        Train/val/test ratios used when ``fit`` is not given a split.
    random_state : int
    """

    def __init__(
        self,
        k_se=8,
        d_z=32,
        h_g=32,
        n_nonedge=5,
        sep_epochs=300,
        sep_lr=0.01,
        n_layers=2,
        hidden=64,
        alpha=1.0,
        head_hidden=64,
        lr=0.01,
        epochs=200,
        weight_decay=5e-4,
        residual=True,
        branches="both",
        separation="causal",
        class_weight=False,
        refine=False,
        split_ratios=(0.4, 0.2, 0.4),
        random_state=0,
    ):
        self.k_se = k_se
        self.d_z = d_z
        self.h_g = h_g
        self.n_nonedge = n_nonedge
        self.sep_epochs = sep_epochs
        self.sep_lr = sep_lr
        self.n_layers = n_layers
        self.hidden = hidden
        self.alpha = alpha
        self.head_hidden = head_hidden
        self.lr = lr
        self.epochs = epochs
        self.weight_decay = weight_decay
        self.residual = residual
        self.branches = branches
        self.separation = separation
        self.class_weight = class_weight
        self.refine = refine
        self.split_ratios = split_ratios
        self.random_state = random_state

    def _seeds(self):
        sep_seed, filt_seed, head_seed = (
            int(s.generate_state(1)[0]) for s in np.random.SeedSequence(self.random_state).spawn(3)
        )
        return sep_seed, filt_seed, head_seed

    def _separator(self, seed):
        return CausalEdgeSeparator(
            k_se=self.k_se,
            d_z=self.d_z,
            hidden=self.h_g,
            n_nonedge=self.n_nonedge,
            epochs=self.sep_epochs,
            lr=self.sep_lr,
            random_state=seed,
        )

    def _separate(self, g, train_mask, seed):
        if self.separation == "causal":
            self.separator_ = self._separator(seed).fit(g, label_mask=train_mask)
            return self.separator_.transform(g)
        if self.separation == "labels":
            return label_separation(g.masked_labels(train_mask))
        if self.separation == "none":
            return no_separation(g)
        raise ValueError(f"separation must be one of {SEPARATIONS}, got {self.separation!r}")

    def _train(self, g, sep, split, filt_seed, head_seed):
        filters = init_hybrid_params(
            g.num_features, g.num_relations, self.hidden, self.n_layers, self.alpha, filt_seed
        )
        width = head_input_width(g.num_features, g.num_relations, self.hidden, self.residual, self.branches)
        model = HybridModel(filters, init_head(width, self.head_hidden, head_seed), self.residual, self.branches)
        return train(g, sep, model, split, self.lr, self.epochs, self.weight_decay, self.class_weight)

    def fit(self, g, y=None, split: SplitAssignment = None, separation=None):
        """Fit on ``g``. Only training-split labels reach the edge separator
        and the loss; validation labels select the checkpoint.

        A precomputed ``separation`` skips the separator.
        """
        g = check_graph(g, require_features=True, require_labels=True)
        if y is not None:
            g = g.with_labels(y)
        sep_seed, filt_seed, head_seed = self._seeds()
        if split is None:
            split = split_nodes(g, self.split_ratios, self.random_state)
        self.split_ = split
        train_mask = split.mask("train")
        sep = separation if separation is not None else self._separate(g, train_mask, sep_seed)
        result = self._train(g, sep, split, filt_seed, head_seed)
        if self.refine and separation is None and self.separation == "causal":
            z = hybrid_forward(g.features, sep, result.model.filters, result.model.branches)
            refiner = self._separator(sep_seed)
            refiner.fit(g, label_mask=train_mask, embeddings=z)
            sep = refiner.transform(g)
            self.separator_ = refiner
            result = self._train(g, sep, split, filt_seed, head_seed)
        self.separation_ = sep
        self.model_ = result.model
        self.loss_curve_ = result.loss_curve
        self.val_f1_curve_ = result.val_f1_curve
        self.best_epoch_ = result.best_epoch
        self.classes_ = np.array([0, 1])
        self.num_nodes_ = g.num_nodes
        return self

    def predict_proba(self, g) -> np.ndarray:
        check_is_fitted(self, "model_")
        g = check_graph(g)
        if g.num_nodes != self.num_nodes_:
            raise ValueError("the detector is transductive; pass the graph it was fitted on")
        return predict_proba(g, self.separation_, self.model_)

    def decision_function(self, g) -> np.ndarray:
        """Anomaly probability per node."""
        return self.predict_proba(g)[:, 1]

    def predict(self, g) -> np.ndarray:
        return np.argmax(self.predict_proba(g), axis=1)

    def evaluate(self, g, part: str = "test"):
        """:class:`EvalReport` on a split part of the fitted graph."""
        check_is_fitted(self, "model_")
        return evaluate(self.predict_proba(g), g.labels, self.split_.indices(part), self.loss_curve_)

    def score(self, g, y=None):
        """Test-split AUC."""
        return self.evaluate(g, "test").auc
