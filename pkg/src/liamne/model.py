"""Per-layer embeddings, attention-fused common embedding and final embedding.

Shapes used throughout: ``V`` nodes, ``L`` layers, ``d`` embedding size,
``d_a`` attention hidden size.  Layer-indexed tensors are stored node-major,
``(V, L, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import scipy.sparse as sp

from .graph import MultiplexNetwork
from .sampler import sigmoid

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    d: int = 64
    d_a: int | None = None
    hops: int = 2

    def __post_init__(self):
        if self.d_a is None:
            object.__setattr__(self, "d_a", self.d)
        if self.d < 1 or self.d_a < 1 or self.hops < 1:
            raise ValueError("d, d_a and hops must all be >= 1")


@dataclass
class ModelParams:
    layer_embed: np.ndarray
    w1: np.ndarray
    W2: np.ndarray
    W3: np.ndarray
    base_neighbor_embed: np.ndarray | None = None
    attr_transform: np.ndarray | None = None
    attributes: np.ndarray | None = None
    seed: int = 0

    TRAINABLE = ("layer_embed", "base_neighbor_embed", "attr_transform", "w1", "W2", "W3")

    def __post_init__(self):
        if (self.base_neighbor_embed is None) == (self.attr_transform is None):
            raise ValueError(
                "exactly one of base_neighbor_embed / attr_transform must be set"
            )
        if self.attr_transform is not None and self.attributes is None:
            raise ValueError("attr_transform requires node attributes")

    @property
    def num_nodes(self) -> int:
        return self.layer_embed.shape[0]

    @property
    def num_layers(self) -> int:
        return self.layer_embed.shape[1]

    @property
    def dim(self) -> int:
        return self.layer_embed.shape[2]

    def trainable(self) -> dict:
        return {k: getattr(self, k) for k in self.TRAINABLE if getattr(self, k) is not None}

    def copy(self) -> "ModelParams":
        kw = {}
        for f in fields(self):
            v = getattr(self, f.name)
            kw[f.name] = v.copy() if isinstance(v, np.ndarray) else v
        return ModelParams(**kw)

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.trainable().values())

    def initial_neighbor_embed(self) -> np.ndarray:
        """h0 with shape (V, L, d)."""
        if self.base_neighbor_embed is not None:
            return self.base_neighbor_embed
        return np.einsum("va,lda->vld", self.attributes, self.attr_transform)


def init_params(
    num_nodes: int,
    num_layers: int,
    cfg: ModelConfig,
    seed: int = 0,
    attributes: np.ndarray | None = None,
) -> ModelParams:
    """Draw every trainable tensor uniformly from [-1/sqrt(d), 1/sqrt(d)]."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(cfg.d)

    def u(*shape):
        return rng.uniform(-bound, bound, size=shape)

    layer_embed = u(num_nodes, num_layers, cfg.d)
    w1 = u(cfg.d_a)
    W2 = u(cfg.d_a, cfg.d)
    W3 = u(cfg.d, cfg.d)
    if attributes is None:
        return ModelParams(layer_embed, w1, W2, W3, base_neighbor_embed=u(num_nodes, num_layers, cfg.d), seed=seed)
    attributes = np.asarray(attributes, dtype=np.float64)
    f = u(num_layers, cfg.d, attributes.shape[1])
    return ModelParams(layer_embed, w1, W2, W3, attr_transform=f, attributes=attributes, seed=seed)


def init_for_network(net: MultiplexNetwork, cfg: ModelConfig, seed: int = 0) -> ModelParams:
    return init_params(net.num_nodes, net.num_layers, cfg, seed, net.attributes)


# ---------------------------------------------------------------------------
# mean aggregation


class Propagator:
    """Row-normalised neighbourhood-mean operators, one per layer.

    Isolated nodes map to themselves, so ``P @ h`` leaves their rows
    unchanged.
    """

    def __init__(self, net: MultiplexNetwork, hops: int):
        self.hops = hops
        self.num_nodes = net.num_nodes
        self.ops = []
        self.ops_t = []
        n = net.num_nodes
        for l in range(net.num_layers):
            adj = net.adjacency(l)
            deg = np.diff(adj.indptr).astype(np.float64)
            iso = deg == 0
            inv = np.where(iso, 0.0, 1.0 / np.maximum(deg, 1.0))
            P = sp.diags(inv) @ adj + sp.diags(iso.astype(np.float64))
            P = sp.csr_matrix(P)
            P.sort_indices()
            self.ops.append(P)
            self.ops_t.append(sp.csr_matrix(P.T))
        assert all(P.shape == (n, n) for P in self.ops)

    def forward(self, h0: np.ndarray) -> np.ndarray:
        """(V, L, d) -> (V, L, d), ``hops`` rounds of neighbour means per layer."""
        out = np.empty_like(h0)
        for l, P in enumerate(self.ops):
            h = h0[:, l, :]
            for _ in range(self.hops):
                h = P @ h
            out[:, l, :] = h
        return out

    def backward(self, grad_H: np.ndarray) -> np.ndarray:
        out = np.empty_like(grad_H)
        for l, PT in enumerate(self.ops_t):
            g = grad_H[:, l, :]
            for _ in range(self.hops):
                g = PT @ g
            out[:, l, :] = g
        return out


# ---------------------------------------------------------------------------
# forward / backward for all nodes at once


@dataclass
class Forward:
    h0: np.ndarray  # (V, L, d)
    H: np.ndarray  # (V, L, d)
    U: np.ndarray  # (V, L, d_a), tanh activations
    a: np.ndarray  # (V, L)
    m: np.ndarray  # (V, d), H a
    c: np.ndarray  # (V, d)
    z: np.ndarray  # (V, L, d)


def softmax(s, axis=-1):
    s = s - s.max(axis=axis, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=axis, keepdims=True)


def forward(params: ModelParams, prop: Propagator) -> Forward:
    h0 = params.initial_neighbor_embed()
    H = prop.forward(h0)
    U = np.tanh(H @ params.W2.T)
    a = softmax(U @ params.w1, axis=1)
    m = np.einsum("vl,vld->vd", a, H)
    c = m @ params.W3.T
    z = c[:, None, :] + params.layer_embed
    return Forward(h0, H, U, a, m, c, z)


def backward(params: ModelParams, prop: Propagator, fw: Forward, grad_z: np.ndarray) -> dict:
    """Gradients of a scalar loss w.r.t. every trainable tensor, given dL/dz."""
    grads = {"layer_embed": grad_z.copy()}
    g_c = grad_z.sum(axis=1)
    grads["W3"] = g_c.T @ fw.m
    g_m = g_c @ params.W3
    g_a = np.einsum("vd,vld->vl", g_m, fw.H)
    g_H = fw.a[:, :, None] * g_m[:, None, :]
    g_s = fw.a * (g_a - (fw.a * g_a).sum(axis=1, keepdims=True))
    grads["w1"] = np.einsum("vl,vlk->k", g_s, fw.U)
    g_pre = g_s[:, :, None] * params.w1 * (1.0 - fw.U**2)
    grads["W2"] = np.einsum("vlk,vld->kd", g_pre, fw.H)
    g_H += g_pre @ params.W2
    g_h0 = prop.backward(g_H)
    if params.base_neighbor_embed is not None:
        grads["base_neighbor_embed"] = g_h0
    else:
        grads["attr_transform"] = np.einsum("vld,va->lda", g_h0, params.attributes)
    return grads


# ---------------------------------------------------------------------------
# per-node operations


def aggregate_neighbors(
    net: MultiplexNetwork, params: ModelParams, cfg: ModelConfig, node: int
) -> np.ndarray:
    """Neighbour embedding matrix H_i with shape (d, L).

    Computed by explicit recursion over neighbour lists; the vectorised
    path is :class:`Propagator`.
    """
    h0 = params.initial_neighbor_embed()
    cols = []
    for l in range(net.num_layers):
        memo = {}

        def h(v, k):
            if k == 0:
                return h0[v, l]
            key = (v, k)
            if key not in memo:
                nb = net.neighbors(v, l)
                if nb:
                    memo[key] = np.mean([h(j, k - 1) for j in nb], axis=0)
                else:
                    memo[key] = h(v, k - 1)
            return memo[key]

        cols.append(h(node, cfg.hops))
    return np.stack(cols, axis=1)


def attention_weights(params: ModelParams, H_i: np.ndarray) -> np.ndarray:
    """Softmax over layers of ``w1 . tanh(W2 H_i)``."""
    return softmax(params.w1 @ np.tanh(params.W2 @ H_i))


def common_embedding(params: ModelParams, H_i: np.ndarray, a_i: np.ndarray) -> np.ndarray:
    return params.W3 @ (H_i @ a_i)


def final_embedding(params: ModelParams, c_i: np.ndarray, node: int, layer: int) -> np.ndarray:
    return c_i + params.layer_embed[node, layer]


def score_edge(z_i, z_j) -> float:
    """Edge probability ``sigmoid(z_i . z_j)``."""
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    if z_i.shape != z_j.shape:
        raise ValueError(f"dimension mismatch: {z_i.shape} vs {z_j.shape}")
    return sigmoid(float(z_i @ z_j))


def score_pairs(z_layer: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Vectorised :func:`score_edge` for ``(m, 2)`` pairs of one layer's embeddings."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return sigmoid(np.einsum("ij,ij->i", z_layer[pairs[:, 0]], z_layer[pairs[:, 1]]))


def final_embeddings(params: ModelParams, net: MultiplexNetwork, cfg: ModelConfig) -> np.ndarray:
    """All final embeddings, shape (V, L, d)."""
    return forward(params, Propagator(net, cfg.hops)).z


# ---------------------------------------------------------------------------
# checkpoint


def save_checkpoint(path, params: ModelParams, cfg: ModelConfig, active=None, split_seed=None):
    """Write an ``.npz`` archive.

    Keys: ``version``, ``dims`` = [V, L, d, d_a, hops], ``seed`` and one
    array per parameter tensor present (``attributes`` included for
    attributed models).  ``active`` (the network of the last training
    epoch) is stored as ``active_layer_<k>`` edge arrays so evaluation can
    aggregate over the same neighbourhoods; ``split_seed`` records the
    link-prediction split the model was trained against.
    """
    arrays = {
        "version": np.array(CHECKPOINT_VERSION),
        "dims": np.array([params.num_nodes, params.num_layers, cfg.d, cfg.d_a, cfg.hops]),
        "seed": np.array(params.seed),
    }
    for name in ModelParams.TRAINABLE + ("attributes",):
        v = getattr(params, name)
        if v is not None:
            arrays[name] = v
    if active is not None:
        for k, edges in enumerate(active.layers):
            arrays[f"active_layer_{k}"] = edges
    if split_seed is not None:
        arrays["split_seed"] = np.array(split_seed)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path, with_extras: bool = False):
    """Inverse of :func:`save_checkpoint`.

    Returns ``(params, cfg)``, or ``(params, cfg, extras)`` when
    ``with_extras``; ``extras`` has ``active_layers`` (list of edge arrays
    or None) and ``split_seed`` (int or None).
    """
    with np.load(path) as data:
        if int(data["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(data['version'])}")
        V, L, d, d_a, hops = (int(x) for x in data["dims"])
        skip = {"version", "dims", "seed", "split_seed"}
        kw = {k: data[k].copy() for k in data.files if k not in skip and not k.startswith("active_layer_")}
        params = ModelParams(seed=int(data["seed"]), **kw)
        active = None
        if "active_layer_0" in data.files:
            active = [data[f"active_layer_{k}"].copy() for k in range(L)]
        split_seed = int(data["split_seed"]) if "split_seed" in data.files else None
    if params.layer_embed.shape != (V, L, d):
        raise ValueError("checkpoint dims do not match stored tensors")
    cfg = ModelConfig(d=d, d_a=d_a, hops=hops)
    if with_extras:
        return params, cfg, {"active_layers": active, "split_seed": split_seed}
    return params, cfg
