"""Similarity-guided under-sampling of auxiliary layers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logit

from .graph import MultiplexNetwork

KEPT_IN_TARGET = "kept-in-target"
KEPT_HIGH = "kept-high"
KEPT_PROB = "kept-prob"
DROPPED_PROB = "dropped-prob"
DROPPED_LOW = "dropped-low"
VERDICTS = (KEPT_IN_TARGET, KEPT_HIGH, KEPT_PROB, DROPPED_PROB, DROPPED_LOW)


@dataclass(frozen=True)
class SamplerConfig:
    alpha: float = 0.2
    beta: float = 0.6
    target_layer: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= self.beta <= 1.0:
            raise ValueError(
                f"thresholds must satisfy 0 <= alpha <= beta <= 1 "
                f"(got alpha={self.alpha}, beta={self.beta})"
            )


@dataclass
class SampleResult:
    sampled_network: MultiplexNetwork
    per_layer_kept: dict
    decisions: dict | None = None
    """layer -> structured array with fields i, j, sim, verdict (index into VERDICTS)."""

    def kept_mask(self, layer: int) -> np.ndarray:
        v = self.decisions[layer]["verdict"]
        return v <= VERDICTS.index(KEPT_PROB)


def sigmoid(z):
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def similarity(x_i, x_j) -> float:
    """Logistic of the dot product of two target-layer embeddings."""
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise ValueError(f"dimension mismatch: {x_i.shape} vs {x_j.shape}")
    return sigmoid(float(x_i @ x_j))


def pair_dots(embeds: np.ndarray, edges: np.ndarray) -> np.ndarray:
    if len(edges) == 0:
        return np.zeros(0)
    return np.einsum("ij,ij->i", embeds[edges[:, 0]], embeds[edges[:, 1]])


def pair_similarity(embeds: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Vectorised :func:`similarity` over an ``(m, 2)`` edge array."""
    return sigmoid(pair_dots(embeds, edges))


def _edge_keys(edges: np.ndarray, n: int) -> np.ndarray:
    return edges[:, 0] * n + edges[:, 1]


def layer_rng(seed: int, layer: int) -> np.random.Generator:
    return np.random.default_rng([seed ^ layer, layer])


def undersample_layer(edges, target_keys, dots, alpha, beta, rng, n):
    """Verdict per edge of one auxiliary layer (indices into ``VERDICTS``).

    Thresholds are compared in logit space (``sim > beta`` iff
    ``dot > logit(beta)``), which stays exact where the float sigmoid
    saturates to 0 or 1.

    Every edge gets one uniform draw, in edge order, whether or not it
    lands in the probabilistic band.  Tying each draw to its edge keeps
    the kept count monotone in ``alpha`` and ``beta`` for a fixed seed.
    """
    verdict = np.full(len(edges), VERDICTS.index(DROPPED_LOW), dtype=np.int8)
    in_target = np.isin(_edge_keys(edges, n), target_keys)
    lo, hi = logit(alpha), logit(beta)
    high = ~in_target & (dots > hi)
    band = ~in_target & (dots >= lo) & (dots <= hi)
    sims = sigmoid(dots)
    verdict[in_target] = VERDICTS.index(KEPT_IN_TARGET)
    verdict[high] = VERDICTS.index(KEPT_HIGH)
    u = rng.random(len(edges))
    idx = np.flatnonzero(band)
    keep = u[idx] < sims[idx]
    verdict[idx[keep]] = VERDICTS.index(KEPT_PROB)
    verdict[idx[~keep]] = VERDICTS.index(DROPPED_PROB)
    return verdict


def undersample(
    net: MultiplexNetwork,
    layer_embeds: np.ndarray,
    cfg: SamplerConfig,
    source: MultiplexNetwork | None = None,
    emit_decisions: bool = False,
) -> SampleResult:
    """Under-sample every auxiliary layer of ``net``.

    Parameters
    ----------
    net : MultiplexNetwork
        Network whose auxiliary layers are sampled.
    layer_embeds : ndarray, shape (num_nodes, d)
        Target-layer embeddings used for the similarity.
    cfg : SamplerConfig
    source : MultiplexNetwork, optional
        Network providing the target edge set for the membership test;
        defaults to ``net``.
    emit_decisions : bool
        Keep a per-edge record (edge, similarity, verdict).
    """
    t = cfg.target_layer
    net._check_layer(t)
    layer_embeds = np.asarray(layer_embeds, dtype=np.float64)
    if layer_embeds.ndim != 2 or layer_embeds.shape[0] != net.num_nodes:
        raise ValueError("embeddings must cover every node")
    n = net.num_nodes
    target_keys = _edge_keys((source or net).layers[t], n)
    layers = list(net.layers)
    kept_counts = {}
    decisions = {} if emit_decisions else None
    kept_upper = VERDICTS.index(KEPT_PROB)
    for m in range(net.num_layers):
        if m == t:
            continue
        edges = net.layers[m]
        dots = pair_dots(layer_embeds, edges)
        sims = sigmoid(dots)
        verdict = undersample_layer(
            edges, target_keys, dots, cfg.alpha, cfg.beta, layer_rng(cfg.seed, m), n
        )
        keep = verdict <= kept_upper
        layers[m] = edges[keep]
        kept_counts[m] = int(keep.sum())
        if emit_decisions:
            rec = np.zeros(
                len(edges),
                dtype=[("i", np.int64), ("j", np.int64), ("sim", np.float64), ("verdict", np.int8)],
            )
            rec["i"], rec["j"], rec["sim"], rec["verdict"] = edges[:, 0], edges[:, 1], sims, verdict
            decisions[m] = rec
    return SampleResult(net.with_layers(layers), kept_counts, decisions)


def random_undersample(
    net: MultiplexNetwork, target_layer: int, keep_counts: dict, seed: int
) -> MultiplexNetwork:
    """Keep a uniformly random subset of ``keep_counts[m]`` edges per auxiliary layer."""
    layers = list(net.layers)
    for m, k in keep_counts.items():
        if m == target_layer:
            raise ValueError("target layer cannot be sampled")
        edges = net.layers[m]
        rng = layer_rng(seed, m)
        idx = np.sort(rng.choice(len(edges), size=min(k, len(edges)), replace=False))
        layers[m] = edges[idx]
    return net.with_layers(layers)
