import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binomtest

from liamne.graph import MultiplexNetwork
from liamne.sampler import (
    DROPPED_LOW,
    KEPT_HIGH,
    KEPT_IN_TARGET,
    VERDICTS,
    SamplerConfig,
    random_undersample,
    similarity,
    undersample,
)


def sigmoid_oracle(z):
    return 1.0 / (1.0 + math.exp(-z))


def test_similarity_values():
    assert similarity([1.0, 0.0], [0.0, 3.0]) == 0.5
    x = np.array([1.0, math.sqrt(2.1972 - 1.0)])
    assert similarity(x, x) == pytest.approx(sigmoid_oracle(2.1972), abs=1e-12)
    assert similarity(x, x) == pytest.approx(0.9, abs=1e-4)
    assert similarity(x, -x) == pytest.approx(0.1, abs=1e-4)
    assert similarity(x, -x) == pytest.approx(1 - similarity(x, x), abs=1e-12)


def test_similarity_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        similarity([1.0, 2.0], [1.0])


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(alpha=0.7, beta=0.6)
    with pytest.raises(ValueError):
        SamplerConfig(alpha=-0.1, beta=0.6)


def random_instance(seed, n=30, m=120, t_edges=20, d=3, scale=2.0):
    rng = np.random.default_rng(seed)
    target = rng.integers(0, n, size=(t_edges, 2))
    aux = rng.integers(0, n, size=(m, 2))
    aux2 = rng.integers(0, n, size=(m // 2, 2))
    # make some auxiliary edges duplicate target edges
    aux = np.concatenate([aux, target[: t_edges // 2]])
    net = MultiplexNetwork(n, (target, aux, aux2))
    emb = rng.normal(scale=scale, size=(n, d))
    return net, emb


def test_degenerate_thresholds():
    net, emb = random_instance(0)
    keep_all = undersample(net, emb, SamplerConfig(0.0, 0.0, 0, 1))
    for m in (1, 2):
        assert np.array_equal(keep_all.sampled_network.layers[m], net.layers[m])
    only_target = undersample(net, emb, SamplerConfig(1.0, 1.0, 0, 1))
    t = net.edge_set(0)
    for m in (1, 2):
        assert only_target.sampled_network.edge_set(m) == net.edge_set(m) & t
    assert len(only_target.sampled_network.edge_set(1)) > 0


def test_verdicts_recorded():
    net, emb = random_instance(3)
    res = undersample(net, emb, SamplerConfig(0.3, 0.7, 0, 5), emit_decisions=True)
    rec = res.decisions[1]
    tkeys = net.edge_set(0)
    for i, j, s, v in rec:
        verdict = VERDICTS[v]
        if (i, j) in tkeys:
            assert verdict == KEPT_IN_TARGET
        elif s > 0.7:
            assert verdict == KEPT_HIGH
        elif s < 0.3:
            assert verdict == DROPPED_LOW
        else:
            assert verdict in ("kept-prob", "dropped-prob")
        assert s == pytest.approx(similarity(emb[i], emb[j]))
    assert res.kept_mask(1).sum() == res.per_layer_kept[1]


def test_boundary_falls_in_band():
    # sim exactly 0.5 = alpha = beta -> probabilistic with p_s = 0.5
    net = MultiplexNetwork(4, ([[0, 1]], [[2, 3]]))
    emb = np.zeros((4, 2))
    res = undersample(net, emb, SamplerConfig(0.5, 0.5, 0, 0), emit_decisions=True)
    assert VERDICTS[res.decisions[1]["verdict"][0]] in ("kept-prob", "dropped-prob")


def test_binomial_middle_band():
    """1000 edges with sim 0.5 are each kept with probability 1/2."""
    n = 2001
    aux = np.column_stack([np.arange(0, 2000, 2), np.arange(1, 2000, 2)])
    net = MultiplexNetwork(n, ([[0, 2000]], aux))
    emb = np.zeros((n, 4))
    totals = []
    for seed in range(20):
        res = undersample(net, emb, SamplerConfig(0.2, 0.6, 0, seed))
        totals.append(res.per_layer_kept[1])
    kept = sum(totals)
    # independent oracle: binomial(20000, 0.5) two-sided test
    assert binomtest(kept, 20 * 1000, 0.5).pvalue > 0.001
    assert abs(np.mean(totals) - 500) < 3 * math.sqrt(250 / 20)


def test_deterministic_and_seed_sensitive():
    net, emb = random_instance(7)
    a = undersample(net, emb, SamplerConfig(0.2, 0.8, 0, 11))
    b = undersample(net, emb, SamplerConfig(0.2, 0.8, 0, 11))
    c = undersample(net, emb, SamplerConfig(0.2, 0.8, 0, 12))
    assert all(np.array_equal(x, y) for x, y in zip(a.sampled_network.layers, b.sampled_network.layers))
    assert any(not np.array_equal(x, y) for x, y in zip(a.sampled_network.layers, c.sampled_network.layers))


thresholds = st.tuples(st.floats(0, 1), st.floats(0, 1)).map(sorted)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**6), thresholds, thresholds)
def test_properties(seed, th1, th2):
    net, emb = random_instance(seed % 1000)
    a1, b1 = th1
    res = undersample(net, emb, SamplerConfig(a1, b1, 0, seed))
    out = res.sampled_network
    assert out.num_nodes == net.num_nodes
    assert np.array_equal(out.layers[0], net.layers[0])
    tset = net.edge_set(0)
    for m in (1, 2):
        kept = out.edge_set(m)
        assert kept <= net.edge_set(m)
        assert net.edge_set(m) & tset <= kept
    # monotone in each threshold for a fixed seed
    a2, b2 = th2
    lo_a, hi_a = min(a1, a2), max(a1, a2)
    beta = max(b1, b2, hi_a)
    low = undersample(net, emb, SamplerConfig(lo_a, beta, 0, seed))
    high = undersample(net, emb, SamplerConfig(hi_a, beta, 0, seed))
    for m in (1, 2):
        assert high.per_layer_kept[m] <= low.per_layer_kept[m]
    lo_b, hi_b = min(b1, b2), max(b1, b2)
    alpha = min(a1, a2, lo_b)
    low = undersample(net, emb, SamplerConfig(alpha, lo_b, 0, seed))
    high = undersample(net, emb, SamplerConfig(alpha, hi_b, 0, seed))
    for m in (1, 2):
        assert high.per_layer_kept[m] <= low.per_layer_kept[m]


def test_random_undersample_counts():
    net, _ = random_instance(1)
    out = random_undersample(net, 0, {1: 17, 2: 5}, seed=4)
    assert out.edge_count(1) == 17 and out.edge_count(2) == 5
    assert out.edge_set(1) <= net.edge_set(1)
    with pytest.raises(ValueError):
        random_undersample(net, 0, {0: 3}, seed=4)
