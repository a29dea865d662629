"""Planted-partition multiplex generator and target-layer sparsification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import MultiplexNetwork

MIN_TARGET_EDGES = 10


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of a synthetic multiplex network.

    Layer 0 is the target layer; ``aux_layers`` lists ``(edge_count, rho)``
    for layers 1, 2, ...  ``p_in`` and ``p_out`` are relative propensities
    of within- and between-community pairs; only their ratio matters.
    """

    num_nodes: int = 1000
    num_communities: int = 4
    target_edges: int = 400
    aux_layers: tuple = ((20000, 0.5),)
    p_in: float = 0.9
    p_out: float = 0.02
    seed: int = 0

    def __post_init__(self):
        n, k = self.num_nodes, self.num_communities
        if k < 1 or n < 2 * k:
            raise ValueError("need at least two nodes per community")
        if not self.p_in > self.p_out >= 0:
            raise ValueError("require p_in > p_out >= 0")
        max_edges = n * (n - 1) // 2
        if not 0 < self.target_edges <= max_edges:
            raise ValueError(f"infeasible target edge count {self.target_edges}")
        if len(self.aux_layers) < 1:
            raise ValueError("at least one auxiliary layer is required")
        for count, rho in self.aux_layers:
            if not 0 < count <= max_edges:
                raise ValueError(f"infeasible auxiliary edge count {count}")
            if not 0.0 <= rho <= 1.0:
                raise ValueError(f"relevance must lie in [0, 1], got {rho}")


def assign_communities(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Balanced random community assignment (sizes differ by at most one)."""
    return rng.permutation(np.arange(n) % k)


def within_fraction(edges: np.ndarray, communities: np.ndarray) -> float:
    edges = np.asarray(edges).reshape(-1, 2)
    if len(edges) == 0:
        return float("nan")
    return float(np.mean(communities[edges[:, 0]] == communities[edges[:, 1]]))


class _PairSampler:
    """Draw distinct unordered pairs, either uniform or planted-partition."""

    def __init__(self, communities, rng):
        self.comm = communities
        self.n = len(communities)
        self.rng = rng
        self.members = [np.flatnonzero(communities == c) for c in range(communities.max() + 1)]
        sizes = np.array([len(m) for m in self.members])
        self.within_counts = sizes * (sizes - 1) // 2
        self.n_within = int(self.within_counts.sum())
        self.n_between = self.n * (self.n - 1) // 2 - self.n_within

    def _within(self, size):
        r = self.rng
        c = r.choice(len(self.members), size=size, p=self.within_counts / self.n_within)
        out = np.empty((size, 2), dtype=np.int64)
        for idx in range(len(self.members)):
            sel = np.flatnonzero(c == idx)
            if len(sel) == 0:
                continue
            m = self.members[idx]
            a = r.integers(0, len(m), size=len(sel))
            b = r.integers(0, len(m) - 1, size=len(sel))
            b = b + (b >= a)
            out[sel, 0], out[sel, 1] = m[a], m[b]
        return out

    def _uniform(self, size):
        a = self.rng.integers(0, self.n, size=size)
        b = self.rng.integers(0, self.n - 1, size=size)
        return np.column_stack([a, b + (b >= a)])

    def _between(self, size):
        out = np.empty((0, 2), dtype=np.int64)
        while len(out) < size:
            cand = self._uniform(2 * (size - len(out)) + 8)
            cand = cand[self.comm[cand[:, 0]] != self.comm[cand[:, 1]]]
            out = np.concatenate([out, cand])
        return out[:size]

    def draw(self, count, kind, p_in=1.0, p_out=0.0, exclude=None):
        """``count`` distinct pairs, disjoint from the key set ``exclude``."""
        taken = set() if exclude is None else exclude
        keys = []
        if kind == "planted":
            w_in = p_in * self.n_within
            prob_within = w_in / (w_in + p_out * self.n_between)
        for _ in range(1000):
            need = count - len(keys)
            if need == 0:
                break
            size = 2 * need + 16
            if kind == "uniform":
                cand = self._uniform(size)
            else:
                is_in = self.rng.random(size) < prob_within
                cand = np.empty((size, 2), dtype=np.int64)
                cand[is_in] = self._within(int(is_in.sum()))
                cand[~is_in] = self._between(int((~is_in).sum()))
            lo, hi = cand.min(axis=1), cand.max(axis=1)
            for key in (lo * self.n + hi).tolist():
                if key not in taken:
                    taken.add(key)
                    keys.append(key)
                    if len(keys) == count:
                        break
        else:
            raise ValueError(f"infeasible edge count {count}")
        keys = np.sort(np.array(keys, dtype=np.int64))
        return np.column_stack([keys // self.n, keys % self.n])


def generate(cfg: SynthConfig) -> MultiplexNetwork:
    """Draw a multiplex network; labels are the planted community ids."""
    rng = np.random.default_rng(cfg.seed)
    comm = assign_communities(cfg.num_nodes, cfg.num_communities, rng)
    ps = _PairSampler(comm, rng)
    layers = [ps.draw(cfg.target_edges, "planted", cfg.p_in, cfg.p_out)]
    for count, rho in cfg.aux_layers:
        n_rel = int(round(rho * count))
        seen = set()
        rel = ps.draw(n_rel, "planted", cfg.p_in, cfg.p_out, exclude=seen)
        noise = ps.draw(count - n_rel, "uniform", exclude=seen)
        layers.append(np.concatenate([rel, noise]))
    labels = {i: int(c) for i, c in enumerate(comm)}
    return MultiplexNetwork(cfg.num_nodes, tuple(layers), labels=labels)


def sparsify_target(
    net: MultiplexNetwork, target_layer: int, keep_fraction: float, seed: int = 0
) -> MultiplexNetwork:
    """Keep exactly ``round(keep_fraction * |E_t|)`` uniformly chosen target edges."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    edges = net.layers[target_layer]
    k = int(round(keep_fraction * len(edges)))
    if k < MIN_TARGET_EDGES:
        raise ValueError(
            f"sparsified target layer would have {k} edges (< {MIN_TARGET_EDGES})"
        )
    if k == len(edges):
        return net
    idx = np.sort(np.random.default_rng(seed).choice(len(edges), size=k, replace=False))
    return net.with_layer(target_layer, edges[idx])
