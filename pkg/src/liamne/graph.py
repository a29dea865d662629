"""Multiplex network container, text loaders and layer statistics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised for malformed or inconsistent network input."""


def _normalize_edges(edges, num_nodes: int, layer: int) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
        raise GraphFormatError(
            f"endpoint out of range in layer {layer} (num_nodes={num_nodes})"
        )
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        logger.warning("layer %d: dropped %d self-loops", layer, int(loops.sum()))
        arr = arr[~loops]
    arr = np.sort(arr, axis=1)
    if len(arr):
        arr = np.unique(arr, axis=0)
    return arr


@dataclass(frozen=True, eq=False)
class MultiplexNetwork:
    """Undirected, unweighted multiplex network over nodes ``0..num_nodes-1``.

    Each layer is stored as an ``(m, 2)`` int array of unique pairs ``i < j``
    in lexicographic order. Instances are never mutated after construction;
    derived networks are built with :meth:`with_layer`.
    """

    num_nodes: int
    layers: tuple
    attributes: np.ndarray | None = None
    labels: Mapping[int, int] | None = None
    node_names: tuple | None = None
    _adj_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.num_nodes < 1:
            raise GraphFormatError("network needs at least one node")
        if len(self.layers) < 2:
            raise GraphFormatError("a multiplex network needs at least 2 layers")
        layers = tuple(
            _normalize_edges(e, self.num_nodes, l) for l, e in enumerate(self.layers)
        )
        for arr in layers:
            arr.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        if self.attributes is not None:
            attrs = np.array(self.attributes, dtype=np.float64)
            if attrs.ndim != 2 or attrs.shape[0] != self.num_nodes:
                raise GraphFormatError(
                    f"attribute row count mismatch: expected {self.num_nodes} rows, "
                    f"got shape {attrs.shape}"
                )
            attrs.setflags(write=False)
            object.__setattr__(self, "attributes", attrs)
        if self.labels is not None:
            labels = {int(k): int(v) for k, v in self.labels.items()}
            bad = [k for k in labels if not 0 <= k < self.num_nodes]
            if bad:
                raise GraphFormatError(f"label for unknown node {bad[0]}")
            object.__setattr__(self, "labels", labels)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def edge_count(self, layer: int) -> int:
        return len(self.layers[layer])

    def edge_set(self, layer: int) -> set:
        return {(int(i), int(j)) for i, j in self.layers[layer]}

    def has_edge(self, layer: int, i: int, j: int) -> bool:
        return bool(self.adjacency(layer)[i, j])

    def adjacency(self, layer: int) -> sp.csr_matrix:
        """Symmetric 0/1 CSR adjacency matrix of one layer (cached)."""
        if layer not in self._adj_cache:
            e = self.layers[layer]
            n = self.num_nodes
            rows = np.concatenate([e[:, 0], e[:, 1]])
            cols = np.concatenate([e[:, 1], e[:, 0]])
            data = np.ones(len(rows))
            adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
            adj.sort_indices()
            self._adj_cache[layer] = adj
        return self._adj_cache[layer]

    def neighbors(self, node: int, layer: int) -> list[int]:
        """Sorted neighbour ids of ``node`` on ``layer``."""
        self._check_node(node)
        self._check_layer(layer)
        adj = self.adjacency(layer)
        return [int(j) for j in adj.indices[adj.indptr[node] : adj.indptr[node + 1]]]

    def degrees(self, layer: int) -> np.ndarray:
        return np.diff(self.adjacency(layer).indptr)

    def with_layer(self, layer: int, edges) -> "MultiplexNetwork":
        """Return a copy with one layer's edge set replaced."""
        self._check_layer(layer)
        layers = list(self.layers)
        layers[layer] = edges
        return self.with_layers(layers)

    def with_layers(self, layers: Sequence) -> "MultiplexNetwork":
        return MultiplexNetwork(
            self.num_nodes,
            tuple(layers),
            attributes=self.attributes,
            labels=self.labels,
            node_names=self.node_names,
        )

    def same_edges(self, other: "MultiplexNetwork") -> bool:
        return (
            self.num_nodes == other.num_nodes
            and self.num_layers == other.num_layers
            and all(np.array_equal(a, b) for a, b in zip(self.layers, other.layers))
        )

    def _check_node(self, node: int):
        if not 0 <= node < self.num_nodes:
            raise IndexError(f"node {node} out of range")

    def _check_layer(self, layer: int):
        if not 0 <= layer < self.num_layers:
            raise IndexError(f"layer {layer} out of range")


@dataclass(frozen=True)
class LayerStats:
    edges_per_layer: tuple
    densest: int
    sparsest: int
    imbalance_ratio: float
    target_density: float


def imbalance_ratio(max_edges: int, min_edges: int) -> float:
    """Natural log of the densest-to-sparsest edge-count ratio."""
    if min_edges <= 0:
        raise ValueError("imbalance ratio undefined: empty layer")
    return math.log(max_edges / min_edges)


def layer_density(target_edges: int, num_nodes: int) -> float:
    return target_edges / (num_nodes * (num_nodes - 1))


def compute_stats(net: MultiplexNetwork, target_layer: int) -> LayerStats:
    net._check_layer(target_layer)
    counts = tuple(net.edge_count(l) for l in range(net.num_layers))
    if min(counts) == 0:
        raise ValueError("imbalance ratio undefined: empty layer")
    densest = int(np.argmax(counts))
    sparsest = int(np.argmin(counts))
    return LayerStats(
        edges_per_layer=counts,
        densest=densest,
        sparsest=sparsest,
        imbalance_ratio=imbalance_ratio(counts[densest], counts[sparsest]),
        target_density=layer_density(counts[target_layer], net.num_nodes),
    )


# ---------------------------------------------------------------------------
# text formats


def _tokens(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def _parse_id(tok, lineno, names: dict | None):
    try:
        return int(tok)
    except ValueError:
        if names is None:
            raise GraphFormatError(f"line {lineno}: expected integer, got {tok!r}")
        return names.setdefault(tok, len(names))


def load_multiplex(edge_file, attr_file=None, label_file=None, string_ids=False):
    """Load a network from the whitespace-separated text formats.

    Parameters
    ----------
    edge_file : path
        Lines ``layer src dst``; ``#`` comments; optional header
        ``nodes N layers L``.
    attr_file : path, optional
        Lines ``node v1 ... vd``.
    label_file : path, optional
        Lines ``node class``.
    string_ids : bool
        Map arbitrary node tokens to dense ids in order of first appearance.
        The mapping is kept in ``node_names``.
    """
    names = {} if string_ids else None
    declared_nodes = declared_layers = None
    raw: dict[int, list] = {}
    for lineno, tok in _tokens(edge_file):
        if tok[0] == "nodes":
            if len(tok) != 4 or tok[2] != "layers":
                raise GraphFormatError(f"line {lineno}: malformed header")
            try:
                declared_nodes, declared_layers = int(tok[1]), int(tok[3])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: malformed header") from None
            continue
        if len(tok) != 3:
            raise GraphFormatError(f"line {lineno}: expected 3 fields, got {len(tok)}")
        try:
            layer = int(tok[0])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: bad layer id {tok[0]!r}") from None
        src = _parse_id(tok[1], lineno, names)
        dst = _parse_id(tok[2], lineno, names)
        if layer < 0 or src < 0 or dst < 0:
            raise GraphFormatError(f"line {lineno}: negative id")
        if declared_nodes is not None and max(src, dst) >= declared_nodes:
            raise GraphFormatError(
                f"line {lineno}: endpoint out of range (nodes={declared_nodes})"
            )
        if declared_layers is not None and layer >= declared_layers:
            raise GraphFormatError(f"line {lineno}: layer id out of range")
        raw.setdefault(layer, []).append((src, dst))

    if declared_nodes is None:
        top = max((max(max(e) for e in v) for v in raw.values()), default=-1)
        declared_nodes = len(names) if names is not None else top + 1
    if declared_layers is None:
        declared_layers = max(raw, default=-1) + 1
    layers = [np.array(raw.get(l, []), dtype=np.int64) for l in range(declared_layers)]

    attributes = None
    if attr_file is not None:
        rows = {}
        for lineno, tok in _tokens(attr_file):
            node = _parse_id(tok[0], lineno, names)
            try:
                rows[node] = [float(v) for v in tok[1:]]
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad attribute value") from None
        if sorted(rows) != list(range(declared_nodes)):
            raise GraphFormatError(
                f"attribute row count mismatch: {len(rows)} rows for {declared_nodes} nodes"
            )
        widths = {len(v) for v in rows.values()}
        if len(widths) != 1:
            raise GraphFormatError("attribute rows have unequal length")
        attributes = np.array([rows[i] for i in range(declared_nodes)])

    labels = None
    if label_file is not None:
        labels = {}
        for lineno, tok in _tokens(label_file):
            if len(tok) != 2:
                raise GraphFormatError(f"line {lineno}: expected 'node class'")
            labels[_parse_id(tok[0], lineno, names)] = _parse_id(tok[1], lineno, None)

    node_names = None
    if names is not None:
        node_names = tuple(sorted(names, key=names.get))
    return MultiplexNetwork(
        declared_nodes, tuple(layers), attributes, labels, node_names=node_names
    )


def save_multiplex(net: MultiplexNetwork, edge_file, label_file=None, attr_file=None):
    """Write ``net`` in the formats read by :func:`load_multiplex`."""
    with open(edge_file, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {net.num_nodes} layers {net.num_layers}\n")
        for l, edges in enumerate(net.layers):
            for i, j in edges:
                fh.write(f"{l} {i} {j}\n")
    if label_file is not None and net.labels is not None:
        with open(label_file, "w", encoding="utf-8") as fh:
            for node in sorted(net.labels):
                fh.write(f"{node} {net.labels[node]}\n")
    if attr_file is not None and net.attributes is not None:
        with open(attr_file, "w", encoding="utf-8") as fh:
            for i, row in enumerate(net.attributes):
                fh.write(str(i) + " " + " ".join(repr(float(v)) for v in row) + "\n")


def sibling_path(edge_file, suffix: str) -> Path:
    """``net.txt`` -> ``net.labels.txt`` style companion file path."""
    p = Path(edge_file)
    return p.with_name(f"{p.stem}.{suffix}{p.suffix}")
