import math

import numpy as np
import pytest

from ces2gad.causal import label_separation, no_separation
from ces2gad.exceptions import DegenerateInputError
from ces2gad.filters import HybridEncoder, init_hybrid_params
from ces2gad.metrics import auc
from ces2gad.model import CES2GAD
from ces2gad.optim import Adam
from ces2gad.synth import InjectionConfig, barabasi_albert, inject_anomalies
from ces2gad.training import (
    EXCLUDED,
    HybridModel,
    SplitAssignment,
    cross_entropy_loss,
    evaluate,
    head_input_width,
    init_head,
    inverse_frequency_weights,
    loss_and_grads,
    model_forward,
    predict_proba,
    softmax,
    split_nodes,
    train,
)
from conftest import make_graph
from oracles import central_difference, random_edges, relative_error


def separable_graph(n=120, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.25).astype(int)
    y[:5], y[5:10] = 1, 0
    x = rng.normal(size=(n, 3))
    x[:, 0] = np.where(y == 1, 3.0, -3.0) + 0.1 * rng.normal(size=n)
    return make_graph(n, random_edges(rng, n, 0.05), labels=y, features=x)


def small_model(g, sep_branches="both", residual=True, hidden=4, zero_output=False, seed=0):
    filters = init_hybrid_params(g.num_features, g.num_relations, hidden, 2, 1.0, seed)
    width = head_input_width(g.num_features, g.num_relations, hidden, residual, sep_branches)
    return HybridModel(filters, init_head(width, 5, seed + 1, zero_output), residual, sep_branches)


# -- loss ------------------------------------------------------------------


def test_cross_entropy_examples():
    assert cross_entropy_loss([0.5], [1]) == pytest.approx(math.log(2))
    assert cross_entropy_loss([0.8, 0.3], [1, 0]) == pytest.approx(-(math.log(0.8) + math.log(0.7)))
    assert cross_entropy_loss([0.8, 0.3], [1, 0]) == pytest.approx(0.579818, abs=1e-6)
    assert 0 <= cross_entropy_loss([1.0, 0.0], [1, 0]) < 1e-11
    assert np.isfinite(cross_entropy_loss([0.0], [1]))


def test_softmax_rows_sum_to_one(rng):
    p = softmax(rng.normal(size=(50, 2)) * 30)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


# -- splits ----------------------------------------------------------------


def test_split_sizes_for_ten_nodes():
    g = make_graph(10, [(0, 1)], labels=[0] * 5 + [1] * 5)
    s = split_nodes(g, seed=3)
    sizes = s.sizes()
    assert (sizes["train"], sizes["val"], sizes["test"]) == (4, 2, 4)


def test_split_is_stratified_and_exhaustive():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, size=400)
    y[rng.random(400) < 0.1] = -1
    y[:10] = [0] * 5 + [1] * 5
    g = make_graph(400, [(0, 1)], labels=y)
    s = split_nodes(g, seed=2)
    assert np.all(s.tags[y == -1] == EXCLUDED)
    assert np.all(s.tags[y >= 0] != EXCLUDED)
    rate = np.mean(y[y >= 0])
    for part in ("train", "val", "test"):
        idx = s.indices(part)
        assert abs(y[idx].sum() - rate * len(idx)) <= 1 + 1e-9
    again = split_nodes(g, seed=2)
    np.testing.assert_array_equal(s.tags, again.tags)


def test_split_needs_five_per_class():
    with pytest.raises(DegenerateInputError):
        split_nodes(make_graph(9, [(0, 1)], labels=[0] * 5 + [1] * 4))
    with pytest.raises(ValueError):
        split_nodes(make_graph(10, [(0, 1)], labels=[0] * 5 + [1] * 5), ratios=(0.5, 0.5, 0.5))


# -- gradients -------------------------------------------------------------


@pytest.mark.parametrize("branches, residual", [("both", True), ("low", False), ("high", True)])
def test_model_gradients(branches, residual):
    rng = np.random.default_rng(3)
    n = 25
    y = rng.integers(0, 2, size=n)
    g = make_graph(n, None, labels=y, features=rng.normal(size=(n, 3)),
                   relations=[random_edges(rng, n, 0.2), random_edges(rng, n, 0.15)])
    sep = label_separation(g)
    model = small_model(g, branches, residual, seed=4)
    model.head.b1[:] = 0.05
    enc = HybridEncoder(sep, model.filters.alpha, branches)
    train_idx = np.arange(0, n, 2)
    cw = np.array([0.7, 2.0])
    _, grads, _ = loss_and_grads(model, enc, g.features, y, train_idx, cw)

    def loss():
        return loss_and_grads(model, enc, g.features, y, train_idx, cw)[0]

    tensors = model.tensors()
    assert len(grads) == len(tensors)
    for t, gt in zip(tensors, grads):
        assert relative_error(gt, central_difference(loss, t)) <= 1e-5


# -- optimiser -------------------------------------------------------------


def test_adam_first_step_is_signed_lr():
    p = np.array([1.0, -2.0, 3.0])
    opt = Adam([p], lr=0.1)
    opt.step([np.array([0.5, -4.0, 0.0])])
    np.testing.assert_allclose(p, [0.9, -1.9, 3.0], atol=1e-8)


def test_adam_weight_decay_is_coupled():
    p = np.array([2.0])
    opt = Adam([p], lr=0.1, weight_decay=0.5)
    opt.step([np.array([0.0])])
    # gradient 0 + 0.5 * 2 is positive, so the step is -lr
    np.testing.assert_allclose(p, [1.9], atol=1e-8)


# -- training loop ---------------------------------------------------------


def test_initial_loss_with_zero_output_layer():
    g = separable_graph()
    split = split_nodes(g, seed=0)
    model = small_model(g, zero_output=True)
    res = train(g, label_separation(g), model, split, epochs=1)
    assert res.loss_curve[0] == pytest.approx(len(split.train) * math.log(2), rel=1e-12)


def test_training_on_separable_fixture():
    g = separable_graph()
    split = split_nodes(g, seed=0)
    res = train(g, no_separation(g), small_model(g), split, lr=0.01, epochs=150)
    curve = np.array(res.loss_curve)
    assert np.all(curve >= 0)
    assert np.all(np.diff(curve[:10]) < 0)
    probs = predict_proba(g, no_separation(g), res.model)
    assert auc(probs[split.train, 1], g.labels[split.train]) >= 0.99
    again = train(g, no_separation(g), small_model(g), split, lr=0.01, epochs=150)
    assert again.loss_curve == res.loss_curve
    assert 0 <= res.best_epoch <= 150


def test_best_checkpoint_is_the_best_validation_epoch():
    g = separable_graph(seed=1)
    split = split_nodes(g, seed=1)
    res = train(g, no_separation(g), small_model(g), split, epochs=30)
    assert res.best_epoch == int(np.argmax(res.val_f1_curve)) or res.best_epoch == 30
    if res.best_epoch < 30:
        assert res.val_f1_curve[res.best_epoch] == max(res.val_f1_curve)


def test_training_requires_both_classes():
    g = separable_graph()
    tags = np.full(g.num_nodes, 2)
    tags[np.flatnonzero(g.labels == 0)[:5]] = 0
    with pytest.raises(DegenerateInputError):
        train(g, no_separation(g), small_model(g), SplitAssignment(tags), epochs=1)


def test_inverse_frequency_weights():
    np.testing.assert_allclose(inverse_frequency_weights(np.array([0, 0, 0, 1])), [4 / 6, 2.0])


def test_evaluate_report():
    probs = np.array([[0.2, 0.8], [0.6, 0.4], [0.3, 0.7], [0.9, 0.1]])
    rep = evaluate(probs, np.array([1, 1, 0, 0]), np.arange(4))
    assert rep.auc == 0.75
    assert rep.confusion == {"tp": 1, "fp": 1, "tn": 1, "fn": 1}
    assert sum(rep.confusion.values()) == rep.n_nodes == 4
    assert set(rep.to_dict()) == {"f1_macro", "auc", "confusion", "n_nodes"}


def test_model_forward_shapes():
    g = separable_graph()
    model = small_model(g)
    probs, _ = model_forward(model, HybridEncoder(label_separation(g), 1.0), g.features)
    assert probs.shape == (g.num_nodes, 2)


# -- estimator -------------------------------------------------------------


@pytest.fixture(scope="module")
def injected():
    return inject_anomalies(barabasi_albert(200, 2, seed=0), InjectionConfig(ratio=0.1, seed=0, n_features=6))


def test_estimator_fit_predict(injected):
    est = CES2GAD(k_se=2, d_z=8, sep_epochs=30, hidden=8, head_hidden=8, epochs=20, random_state=3)
    est.fit(injected)
    p = est.predict_proba(injected)
    assert p.shape == (200, 2)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-12)
    assert set(np.unique(est.predict(injected))) <= {0, 1}
    assert 0.0 <= est.score(injected) <= 1.0
    assert len(est.loss_curve_) == 20
    # only training labels reach the separator
    train_nodes = set(est.split_.train.tolist())
    assert set(np.unique(est.separator_.assignments_[0].pairs)) <= train_nodes


def test_estimator_is_deterministic(injected):
    kw = dict(k_se=2, d_z=8, sep_epochs=30, hidden=8, head_hidden=8, epochs=15, random_state=5)
    a = CES2GAD(**kw).fit(injected)
    b = CES2GAD(**kw).fit(injected)
    np.testing.assert_array_equal(a.predict_proba(injected), b.predict_proba(injected))
    assert a.loss_curve_ == b.loss_curve_


def test_estimator_params_and_separation_modes(injected):
    est = CES2GAD(separation="labels", epochs=5, hidden=4, head_hidden=4)
    assert est.get_params()["separation"] == "labels"
    est.fit(injected)
    mask = est.split_.mask("train")
    assert est.separation_.heterophilic[0] == label_separation(injected.masked_labels(mask)).heterophilic[0]
    low = CES2GAD(separation="none", branches="low", epochs=5, hidden=4, head_hidden=4).fit(injected)
    assert low.model_.head.input_width == 4 + 6
    with pytest.raises(ValueError):
        CES2GAD(separation="magic").fit(injected)


def test_estimator_rejects_other_graphs(injected):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        CES2GAD().predict(injected)
    est = CES2GAD(separation="none", epochs=2, hidden=4, head_hidden=4).fit(injected)
    other = inject_anomalies(barabasi_albert(50, 2, seed=0), InjectionConfig(seed=0, n_features=6))
    with pytest.raises(ValueError):
        est.predict(other)
