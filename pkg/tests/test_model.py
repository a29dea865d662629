import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liamne.graph import MultiplexNetwork
from liamne.model import (
    ModelConfig,
    ModelParams,
    Propagator,
    aggregate_neighbors,
    attention_weights,
    common_embedding,
    final_embedding,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    score_edge,
)


def params_with_h0(h0, d_a=3, seed=0):
    V, L, d = h0.shape
    p = init_params(V, L, ModelConfig(d=d, d_a=d_a), seed=seed)
    p.base_neighbor_embed[...] = h0
    return p


def test_init_bounds_and_shapes():
    p = init_params(7, 3, ModelConfig(d=16, d_a=5), seed=1)
    assert p.layer_embed.shape == (7, 3, 16)
    assert p.W2.shape == (5, 16) and p.w1.shape == (5,) and p.W3.shape == (16, 16)
    for name, v in p.trainable().items():
        assert np.all(np.abs(v) <= 1 / 4), name


def test_params_need_exactly_one_neighbor_source():
    p = init_params(4, 2, ModelConfig(d=2), seed=0)
    with pytest.raises(ValueError):
        ModelParams(p.layer_embed, p.w1, p.W2, p.W3)


def test_single_neighbor_one_hop():
    net = MultiplexNetwork(3, ([[0, 1]], [[1, 2]]))
    h0 = np.random.default_rng(0).normal(size=(3, 2, 4))
    H = aggregate_neighbors(net, params_with_h0(h0), ModelConfig(d=4, hops=1), 0)
    np.testing.assert_allclose(H[:, 0], h0[1, 0])
    # node 0 is isolated on layer 1
    np.testing.assert_allclose(H[:, 1], h0[0, 1])


def test_path_graph_two_hops():
    net = MultiplexNetwork(3, ([[0, 1], [1, 2]], [[0, 2]]))
    h0 = np.zeros((3, 2, 1))
    h0[:, 0, 0] = [1.0, 10.0, 100.0]
    H = aggregate_neighbors(net, params_with_h0(h0), ModelConfig(d=1, hops=2), 1)
    # endpoints each see only the centre after one hop, so the centre sees 10 after two
    assert H[0, 0] == pytest.approx(0.5 * (10.0 + 10.0))
    # hand-unrolled from an endpoint: one hop gives 10; two hops give (1 + 100) / 2
    H0 = aggregate_neighbors(net, params_with_h0(h0), ModelConfig(d=1, hops=2), 0)
    assert H0[0, 0] == pytest.approx((1.0 + 100.0) / 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_propagator_matches_recursion(seed, hops):
    rng = np.random.default_rng(seed)
    n = 9
    layers = tuple(rng.integers(0, n, size=(rng.integers(0, 15), 2)) for _ in range(3))
    net = MultiplexNetwork(n, layers)
    p = init_params(n, 3, ModelConfig(d=3), seed=seed)
    H = Propagator(net, hops).forward(p.initial_neighbor_embed())
    cfg = ModelConfig(d=3, hops=hops)
    for i in range(n):
        np.testing.assert_allclose(H[i].T, aggregate_neighbors(net, p, cfg, i), atol=1e-12)


def test_attention_identical_columns_uniform():
    p = init_params(1, 4, ModelConfig(d=5), seed=3)
    H = np.repeat(np.random.default_rng(0).normal(size=(5, 1)), 4, axis=1)
    np.testing.assert_allclose(attention_weights(p, H), 0.25)


def test_attention_hand_logits():
    p = init_params(1, 2, ModelConfig(d=2, d_a=1), seed=0)
    p.w1[...] = [1.0]
    p.W2[...] = [[1.0, 0.0]]
    # tanh(x) = 1 needs x -> inf; pick columns whose tanh values are exactly 1 and 0 in logits
    H = np.array([[np.arctanh(0.999999999), 0.0], [0.0, 0.0]])
    a = attention_weights(p, H)
    e = math.exp(0.999999999)
    assert a[0] == pytest.approx(e / (e + 1), abs=1e-8)
    assert a[0] == pytest.approx(0.7311, abs=1e-4)
    assert a[1] == pytest.approx(0.2689, abs=1e-4)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_attention_on_simplex(seed):
    rng = np.random.default_rng(seed)
    p = init_params(1, 3, ModelConfig(d=4), seed=seed)
    a = attention_weights(p, rng.normal(scale=5, size=(4, 3)))
    assert abs(a.sum() - 1) < 1e-12 and np.all(a >= 0)


def test_common_embedding_cases():
    p = init_params(1, 3, ModelConfig(d=4), seed=0)
    H = np.random.default_rng(1).normal(size=(4, 3))
    p.W3[...] = np.eye(4)
    np.testing.assert_allclose(common_embedding(p, H, np.array([0.0, 1.0, 0.0])), H[:, 1])
    np.testing.assert_array_equal(common_embedding(p, np.zeros((4, 3)), np.ones(3) / 3), 0)


def test_common_embedding_triple_loop_oracle():
    rng = np.random.default_rng(5)
    p = init_params(1, 3, ModelConfig(d=4), seed=5)
    H = rng.normal(size=(4, 3))
    a = rng.dirichlet(np.ones(3))
    expect = np.zeros(4)
    for r in range(4):
        for k in range(4):
            for l in range(3):
                expect[r] += p.W3[r, k] * H[k, l] * a[l]
    np.testing.assert_allclose(common_embedding(p, H, a), expect, atol=1e-10)


def test_final_embedding_cases():
    p = init_params(2, 2, ModelConfig(d=3), seed=0)
    c = np.array([1.0, 2.0, 3.0])
    p.layer_embed[1, 0] = 0
    np.testing.assert_array_equal(final_embedding(p, c, 1, 0), c)
    np.testing.assert_array_equal(final_embedding(p, np.zeros(3), 0, 1), p.layer_embed[0, 1])
    p.layer_embed[0, 0] = 1
    np.testing.assert_array_equal(final_embedding(p, np.ones(3), 0, 0), 2 * np.ones(3))


def test_score_edge():
    assert score_edge([1, 0], [0, 1]) == 0.5
    z = np.array([math.sqrt(4.595), 0.0])
    assert score_edge(z, z) == pytest.approx(0.99, abs=1e-3)
    with pytest.raises(ValueError, match="dimension"):
        score_edge([1, 2], [1, 2, 3])


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_score_symmetric(a, b):
    assert score_edge(a, b) == score_edge(b, a)


def test_vectorised_forward_matches_per_node():
    rng = np.random.default_rng(2)
    n = 8
    net = MultiplexNetwork(n, tuple(rng.integers(0, n, size=(10, 2)) for _ in range(2)))
    cfg = ModelConfig(d=4, d_a=3, hops=2)
    p = init_params(n, 2, cfg, seed=2)
    fw = forward(p, Propagator(net, cfg.hops))
    for i in range(n):
        H = aggregate_neighbors(net, p, cfg, i)
        a = attention_weights(p, H)
        c = common_embedding(p, H, a)
        np.testing.assert_allclose(fw.a[i], a, atol=1e-12)
        for l in range(2):
            np.testing.assert_allclose(fw.z[i, l], final_embedding(p, c, i, l), atol=1e-12)


def test_permutation_equivariance():
    rng = np.random.default_rng(4)
    n = 10
    net = MultiplexNetwork(n, tuple(rng.integers(0, n, size=(15, 2)) for _ in range(2)))
    cfg = ModelConfig(d=4)
    p = init_params(n, 2, cfg, seed=4)
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    net2 = MultiplexNetwork(n, tuple(inv[e] for e in net.layers))
    p2 = p.copy()
    p2.layer_embed = p.layer_embed[perm].copy()
    p2.base_neighbor_embed = p.base_neighbor_embed[perm].copy()
    z = forward(p, Propagator(net, 2)).z
    z2 = forward(p2, Propagator(net2, 2)).z
    np.testing.assert_allclose(z2, z[perm], atol=1e-12)


def test_attributed_initial_embeddings():
    attrs = np.random.default_rng(0).normal(size=(5, 3))
    p = init_params(5, 2, ModelConfig(d=4), seed=0, attributes=attrs)
    h0 = p.initial_neighbor_embed()
    np.testing.assert_allclose(h0[2, 1], p.attr_transform[1] @ attrs[2])


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    net = MultiplexNetwork(4, ([[0, 1]], [[1, 2], [2, 3]]))
    cfg = ModelConfig(d=3, d_a=2, hops=1)
    p = init_params(4, 2, cfg, seed=9)
    save_checkpoint(tmp_path / "m.npz", p, cfg, active=net, split_seed=7)
    q, cfg2, extras = load_checkpoint(tmp_path / "m.npz", with_extras=True)
    assert cfg2 == cfg and q.seed == 9 and extras["split_seed"] == 7
    for name, v in p.trainable().items():
        assert np.array_equal(v, getattr(q, name)), name
    assert MultiplexNetwork(4, tuple(extras["active_layers"])).same_edges(net)
    z1 = forward(p, Propagator(net, 1)).z
    z2 = forward(q, Propagator(net, 1)).z
    assert np.array_equal(z1, z2)
