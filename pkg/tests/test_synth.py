import numpy as np
import pytest
import scipy.sparse.csgraph as csgraph

from ces2gad.graph import graph_heterophily
from ces2gad.synth import (
    SHIFT_COLUMNS,
    InjectionConfig,
    anomaly_count,
    barabasi_albert,
    inject_anomalies,
    spectral_shift_experiment,
    summarize_shift,
)


def _connected(e):
    n_comp, _ = csgraph.connected_components(e.adjacency(), directed=False)
    return n_comp == 1


def test_ba_small_tree():
    g = barabasi_albert(5, 1, seed=0)
    e = g.relation(0)
    assert e.num_edges == 4
    assert _connected(e)


@pytest.mark.parametrize("n, m", [(100, 2), (50, 3), (500, 2), (20, 19)])
def test_ba_edge_count(n, m):
    e = barabasi_albert(n, m, seed=3).relation(0)
    assert e.num_edges == m * (n - m)
    assert _connected(e)
    assert e.degrees[m:].min() >= m


def test_ba_is_reproducible_and_seed_sensitive():
    a = barabasi_albert(200, 2, seed=7).relation(0)
    b = barabasi_albert(200, 2, seed=7).relation(0)
    c = barabasi_albert(200, 2, seed=8).relation(0)
    assert a == b
    assert a != c


def test_ba_rejects_bad_sizes():
    with pytest.raises(ValueError):
        barabasi_albert(2, 2)
    with pytest.raises(ValueError):
        barabasi_albert(5, 0)


def test_ba_is_heavy_tailed():
    deg = barabasi_albert(2000, 2, seed=1).relation(0).degrees
    assert deg.max() > 10 * np.median(deg)


@pytest.mark.parametrize(
    "kwargs", [dict(ratio=1.5), dict(sigma=1.0), dict(rewire=-1), dict(n_features=0)]
)
def test_injection_config_validation(kwargs):
    with pytest.raises(ValueError):
        InjectionConfig(**kwargs)


@pytest.mark.parametrize("ratio, n, k", [(0.2, 100, 20), (0.05, 500, 25), (0.1, 15, 2), (0.0, 10, 0), (0.25, 10, 3)])
def test_anomaly_count(ratio, n, k):
    assert anomaly_count(ratio, n) == k


def test_zero_ratio_leaves_graph_unchanged():
    base = barabasi_albert(100, 2, seed=0)
    g = inject_anomalies(base, InjectionConfig(ratio=0.0, seed=4, n_features=8))
    assert g.relation(0) == base.relation(0)
    assert not g.labels.any()
    assert g.features.shape == (100, 8)
    assert abs(g.features.mean()) < 0.2 and abs(g.features.std() - 1) < 0.1


def test_injection_counts_and_rewiring():
    base = barabasi_albert(100, 2, seed=0)
    cfg = InjectionConfig(ratio=0.2, rewire=2, seed=1, n_features=4)
    g = inject_anomalies(base, cfg)
    assert int(g.labels.sum()) == 20
    added = g.relation(0).num_edges - base.relation(0).num_edges
    assert 0 < added <= 20 * 2
    # new edges all join an anomaly to a normal node
    old = set(base.relation(0).edge_codes().tolist())
    for i, j in g.relation(0).edges:
        if i * 100 + j not in old:
            assert g.labels[i] != g.labels[j]


def test_injection_is_reproducible():
    base = barabasi_albert(120, 2, seed=0)
    cfg = InjectionConfig(ratio=0.1, seed=9)
    a, b = inject_anomalies(base, cfg), inject_anomalies(base, cfg)
    assert a.relation(0) == b.relation(0)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_anomaly_sets_are_nested_across_ratios():
    base = barabasi_albert(200, 2, seed=0)
    prev = np.zeros(200, dtype=bool)
    for ratio in (0.0, 0.05, 0.1, 0.2):
        y = inject_anomalies(base, InjectionConfig(ratio=ratio, seed=5)).labels.astype(bool)
        assert np.all(y[prev])
        prev = y


def test_anomaly_features_are_wider():
    g = inject_anomalies(barabasi_albert(1000, 2, seed=0), InjectionConfig(ratio=0.2, sigma=3.0, seed=0))
    sd_anom = g.features[g.labels == 1].std()
    sd_norm = g.features[g.labels == 0].std()
    assert sd_anom / sd_norm == pytest.approx(3.0, rel=0.1)


def test_heterophily_grows_with_rewiring():
    means = []
    for rho in (0, 2, 4):
        vals = [
            graph_heterophily(
                inject_anomalies(barabasi_albert(300, 2, s), InjectionConfig(0.1, rewire=rho, seed=s)), 0
            )
            for s in range(10)
        ]
        means.append(np.mean(vals))
    assert means[0] < means[1] < means[2]


def test_shift_experiment_rows():
    rows = spectral_shift_experiment(60, 2, [0.0, 0.1], InjectionConfig(n_features=4), seeds=range(3))
    assert len(rows) == 6
    assert all(tuple(r) == SHIFT_COLUMNS for r in rows)
    zero = [r for r in rows if r["ratio"] == 0.0]
    assert all(r["s_high_labels"] == 0.0 and r["eta_k_labels"] == 0.0 for r in zero)
    again = spectral_shift_experiment(60, 2, [0.0, 0.1], InjectionConfig(n_features=4), seeds=range(3))
    assert rows == again
    summary = summarize_shift(rows)
    assert [s["ratio"] for s in summary] == [0.0, 0.1]
    assert summary[1]["eta_k_features"] == pytest.approx(np.mean([r["eta_k_features"] for r in rows[3:]]))
    with pytest.raises(ValueError):
        spectral_shift_experiment(60, 2, [])
