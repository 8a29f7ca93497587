import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ces2gad.causal import label_separation
from ces2gad.exceptions import DegenerateInputError, DimensionMismatchError
from ces2gad.graph import EdgeSet, laplacian
from ces2gad.spectral import (
    cumulative_ratio,
    default_split_index,
    eigendecompose,
    energy_distribution,
    energy_ratio,
    fix_signs,
    graph_fourier_transform,
    high_freq_area,
    label_high_freq_area,
    spectrum_report,
)
from conftest import PATH3, TRIANGLE, make_graph
from oracles import random_edges

SQ2 = math.sqrt(0.5)
EDGE = EdgeSet(2, [(0, 1)])


@st.composite
def graphs_and_signals(draw, max_nodes=40):
    n = draw(st.integers(2, max_nodes))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    e = EdgeSet(n, random_edges(rng, n, draw(st.floats(0.05, 0.6))))
    x = rng.normal(size=n)
    return e, x


# -- eigendecomposition ----------------------------------------------------


def test_two_node_decomposition():
    dec = eigendecompose(laplacian(EDGE))
    np.testing.assert_allclose(dec.eigenvalues, [0, 2], atol=1e-14)
    np.testing.assert_allclose(dec.eigenvectors[:, 0], [SQ2, SQ2], atol=1e-14)
    np.testing.assert_allclose(dec.eigenvectors[:, 1], [SQ2, -SQ2], atol=1e-14)


def test_triangle_normalized_eigenvalues():
    dec = eigendecompose(laplacian(EdgeSet(3, TRIANGLE), "normalized"))
    np.testing.assert_allclose(dec.eigenvalues, [0, 1.5, 1.5], atol=1e-12)


def test_zero_matrix_decomposition():
    dec = eigendecompose(np.zeros((4, 4)))
    np.testing.assert_array_equal(dec.eigenvalues, np.zeros(4))
    np.testing.assert_allclose(dec.eigenvectors.T @ dec.eigenvectors, np.eye(4), atol=1e-12)
    _assert_sign_rule(dec.eigenvectors)


def _assert_sign_rule(u):
    for col in u.T:
        mag = np.abs(col)
        pivot = np.flatnonzero(mag >= mag.max() * (1 - 1e-10))[0]
        assert col[pivot] > 0


def test_fix_signs_rule_and_idempotence():
    u = np.array([[0.6, -0.8], [-0.8, -0.6]])
    fixed = fix_signs(u)
    np.testing.assert_array_equal(fixed, [[-0.6, 0.8], [0.8, 0.6]])
    np.testing.assert_array_equal(fix_signs(fixed), fixed)
    # exact tie: the lower index decides
    np.testing.assert_array_equal(fix_signs(np.array([[-SQ2], [SQ2]])), [[SQ2], [-SQ2]])


def test_decomposition_rejects_asymmetric_input():
    with pytest.raises(ValueError):
        eigendecompose(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DimensionMismatchError):
        eigendecompose(np.zeros((2, 3)))


@settings(max_examples=30, deadline=None)
@given(graphs_and_signals())
def test_decomposition_invariants(case):
    e, _ = case
    for form in ("regular", "normalized"):
        lap = laplacian(e, form)
        dec = eigendecompose(lap)
        lam, u = dec.eigenvalues, dec.eigenvectors
        assert np.all(np.diff(lam) >= 0)
        np.testing.assert_allclose(u.T @ u, np.eye(e.num_nodes), atol=1e-8)
        np.testing.assert_allclose(lap.matrix @ u, u * lam, atol=1e-6)
        _assert_sign_rule(u)


# -- Fourier transform and energy --------------------------------------------


def test_gft_examples():
    dec = eigendecompose(laplacian(EDGE))
    np.testing.assert_allclose(graph_fourier_transform(dec, [1, 0]), [SQ2, SQ2], atol=1e-15)
    assert np.sum(graph_fourier_transform(dec, [3, 4]) ** 2) == pytest.approx(25.0, rel=1e-14)
    tri = eigendecompose(laplacian(EdgeSet(3, TRIANGLE)))
    np.testing.assert_allclose(
        graph_fourier_transform(tri, tri.eigenvectors[:, 2]), [0, 0, 1], atol=1e-14
    )
    with pytest.raises(DimensionMismatchError):
        graph_fourier_transform(dec, [1, 2, 3])


def test_energy_examples():
    dec = eigendecompose(laplacian(EDGE))
    np.testing.assert_allclose(energy_distribution(graph_fourier_transform(dec, [1, 0])), [0.5, 0.5])
    np.testing.assert_allclose(energy_distribution(graph_fourier_transform(dec, [1, -1])), [0, 1], atol=1e-15)
    onehot = energy_distribution(graph_fourier_transform(dec, dec.eigenvectors[:, 1]))
    np.testing.assert_allclose(onehot, [0, 1], atol=1e-15)
    assert energy_ratio(graph_fourier_transform(dec, [1, 0]), 1) == pytest.approx(0.5)
    assert energy_ratio(graph_fourier_transform(dec, [1, 0]), 2) == 1.0


def test_constant_signal_lives_at_zero_frequency():
    e = EdgeSet(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    dec = eigendecompose(laplacian(e))
    assert energy_ratio(graph_fourier_transform(dec, np.full(5, 2.0)), 1) == pytest.approx(1.0, abs=1e-12)
    assert high_freq_area(laplacian(e), np.full(5, 2.0)) == pytest.approx(0.0, abs=1e-14)


def test_energy_errors():
    with pytest.raises(DegenerateInputError):
        energy_distribution(np.zeros(3))
    with pytest.raises(DegenerateInputError):
        energy_ratio(np.zeros(3), 1)
    with pytest.raises(ValueError):
        energy_ratio(np.ones(3), 0)
    with pytest.raises(ValueError):
        energy_ratio(np.ones(3), 4)


def test_multichannel_energy_sums_over_columns():
    xhat = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
    np.testing.assert_allclose(energy_distribution(xhat), np.array([1, 4, 2]) / 7)


@settings(max_examples=100, deadline=None)
@given(graphs_and_signals(max_nodes=60))
def test_parseval(case):
    e, x = case
    dec = eigendecompose(laplacian(e))
    xhat = graph_fourier_transform(dec, x)
    assert np.sum(xhat**2) == pytest.approx(np.sum(x**2), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(graphs_and_signals())
def test_cumulative_ratio_is_monotone_and_ends_at_one(case):
    e, x = case
    dec = eigendecompose(laplacian(e))
    xhat = graph_fourier_transform(dec, x)
    c = cumulative_ratio(xhat)
    assert np.all(np.diff(c) >= 0)
    assert c[-1] == 1.0
    assert energy_ratio(xhat, e.num_nodes) == pytest.approx(1.0, rel=1e-12)
    d = energy_distribution(xhat)
    assert np.all(d >= 0) and d.sum() == pytest.approx(1.0, abs=1e-10)


# -- high-frequency area ---------------------------------------------------


def test_high_freq_area_examples():
    lap = laplacian(EDGE)
    for method in ("quadratic", "spectral"):
        assert high_freq_area(lap, [1, -1], method) == pytest.approx(2.0)
        assert high_freq_area(lap, [1, 0], method) == pytest.approx(1.0)
        assert high_freq_area(lap, [1, 1], method) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DegenerateInputError):
        high_freq_area(lap, [0, 0])
    with pytest.raises(ValueError):
        high_freq_area(lap, [1, 0], "power")


@settings(max_examples=100, deadline=None)
@given(graphs_and_signals(max_nodes=80))
def test_high_freq_area_methods_agree(case):
    e, x = case
    for form in ("regular", "normalized"):
        lap = laplacian(e, form)
        q = high_freq_area(lap, x, "quadratic")
        s = high_freq_area(lap, x, "spectral")
        assert s == pytest.approx(q, rel=1e-8, abs=1e-12)
        lam = eigendecompose(lap).eigenvalues
        assert lam[0] - 1e-9 <= q <= lam[-1] + 1e-9


def test_label_high_freq_area_examples():
    assert label_high_freq_area(EdgeSet(3, TRIANGLE), [0, 0, 1]) == 2.0
    assert label_high_freq_area(EdgeSet(3, PATH3), [0, 1, 0]) == 2.0
    assert label_high_freq_area(EdgeSet(4, [(0, 1), (1, 2)]), [0, 0, 0, 1]) == 0.0
    with pytest.raises(DegenerateInputError):
        label_high_freq_area(EdgeSet(3, TRIANGLE), [0, 0, 0])


def test_label_high_freq_area_matches_rayleigh_quotient(rng):
    n = 30
    e = EdgeSet(n, random_edges(rng, n, 0.2))
    y = (rng.random(n) < 0.3).astype(float)
    y[0] = 1
    assert label_high_freq_area(e, y) == pytest.approx(high_freq_area(laplacian(e), y), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rewiring_homophilic_to_heterophilic_increases_label_area(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 40))
    y = np.zeros(n, dtype=int)
    y[rng.choice(n, size=int(rng.integers(1, n // 2 + 1)), replace=False)] = 1
    edges = set(map(tuple, random_edges(rng, n, 0.25)))
    homo = [p for p in edges if y[p[0]] == y[p[1]]]
    absent_hetero = [
        (i, j) for i in range(n) for j in range(i + 1, n) if y[i] != y[j] and (i, j) not in edges
    ]
    if not homo or not absent_hetero:
        return
    drop = homo[rng.integers(len(homo))]
    add = absent_hetero[rng.integers(len(absent_hetero))]
    before = label_high_freq_area(EdgeSet(n, sorted(edges)), y)
    after = label_high_freq_area(EdgeSet(n, sorted((edges - {drop}) | {add})), y)
    assert after > before


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_label_separation_orders_label_areas(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 40))
    y = np.zeros(n, dtype=int)
    y[rng.choice(n, size=int(rng.integers(1, n)), replace=False)] = 1
    g = make_graph(n, random_edges(rng, n, 0.3), labels=y)
    sep = label_separation(g)
    assert label_high_freq_area(sep.homophilic[0], y) == 0.0
    if sep.heterophilic[0].num_edges:
        assert label_high_freq_area(sep.heterophilic[0], y) > 0.0


# -- report ----------------------------------------------------------------


def test_spectrum_report():
    e = EdgeSet(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    x = np.array([1.0, -1, 1, -1, 1, -1])
    rep = spectrum_report(laplacian(e), x)
    assert rep.split_index == default_split_index(6) == 2
    assert rep.eta_k == pytest.approx(rep.cumulative_ratio[1])
    assert rep.high_freq_area == pytest.approx(high_freq_area(laplacian(e), x), rel=1e-12)
    with pytest.raises(ValueError):
        spectrum_report(laplacian(e), x, k=7)


@pytest.mark.parametrize("n, k", [(1, 1), (4, 1), (5, 2), (500, 125), (501, 126)])
def test_default_split_index(n, k):
    assert default_split_index(n) == k
