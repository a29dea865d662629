"""Objective, negative sampling, gradients and the training loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .graph import MultiplexNetwork
from .model import (
    ModelConfig,
    ModelParams,
    Propagator,
    backward,
    forward,
    init_for_network,
)
from .sampler import SamplerConfig, random_undersample, undersample

VARIANTS = ("full", "random-sampling", "no-sampling")
# shared weights: stepped with batch-mean gradients; node tables use summed gradients
DENSE = ("w1", "W2", "W3", "attr_transform")

# named RNG sub-streams derived from the run seed
STREAM_INIT, STREAM_SHUFFLE, STREAM_NEG, STREAM_SAMPLER, STREAM_RANDOM = range(5)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.025
    neg_ratio: int = 5
    batch_size: int = 512
    seed: int = 0
    sampling_start_epoch: int = 2
    resample_each_epoch: bool = True
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    variant: str = "full"
    similarity_source: str = "final"
    fixed_negatives: bool = False
    dense_learning_rate: float | None = None
    neighbor_learning_rate: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.neg_ratio < 1:
            raise ValueError("neg_ratio must be >= 1")
        if self.sampling_start_epoch < 1:
            raise ValueError("sampling_start_epoch must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        for name in ("dense_learning_rate", "neighbor_learning_rate"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0 (0 = full batch)")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.similarity_source not in ("final", "layer"):
            raise ValueError("similarity_source must be 'final' or 'layer'")

    @property
    def target_layer(self) -> int:
        return self.sampler.target_layer


@dataclass
class EpochRecord:
    epoch: int
    l_pos: float
    l_neg: float
    l_total: float
    kept_edges: tuple
    seconds: float


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    active_network: MultiplexNetwork | None = field(default=None, repr=False)
    """Network (sampled, if sampling ran) used in the last epoch."""

    def totals(self) -> np.ndarray:
        return np.array([r.l_total for r in self.records])

    def write_csv(self, path):
        """Columns: epoch, l_pos, l_neg, l_total, kept_edges_layer_<k>..."""
        n_layers = len(self.records[0].kept_edges) if self.records else 0
        header = ["epoch", "l_pos", "l_neg", "l_total"] + [
            f"kept_edges_layer_{k}" for k in range(n_layers)
        ]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for r in self.records:
                row = [str(r.epoch), repr(r.l_pos), repr(r.l_neg), repr(r.l_total)]
                row += [str(k) for k in r.kept_edges]
                fh.write(",".join(row) + "\n")


def stream(seed: int, name: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed, name, *keys])


# ---------------------------------------------------------------------------
# losses


def softplus(x):
    return np.logaddexp(0.0, x)


def all_positive_edges(net: MultiplexNetwork) -> np.ndarray:
    """``(m, 3)`` array of ``(layer, i, j)`` rows, layer-major."""
    parts = [
        np.column_stack([np.full(len(e), l, dtype=np.int64), e])
        for l, e in enumerate(net.layers)
    ]
    return np.concatenate(parts) if parts else np.zeros((0, 3), dtype=np.int64)


def _dots(z, layer, i, j):
    return np.einsum("ij,ij->i", z[i, layer], z[j, layer])


def positive_loss(params: ModelParams, net: MultiplexNetwork, cfg: ModelConfig, z=None) -> float:
    """Sum over layers and edges of ``-log sigmoid(z_i . z_j)``."""
    if z is None:
        z = forward(params, Propagator(net, cfg.hops)).z
    pos = all_positive_edges(net)
    if len(pos) == 0:
        return 0.0
    return float(softplus(-_dots(z, pos[:, 0], pos[:, 1], pos[:, 2])).sum())


def negative_loss(
    params: ModelParams,
    pairs,
    target_layer: int,
    net: MultiplexNetwork,
    cfg: ModelConfig,
    z=None,
) -> float:
    """Sum over target-layer negative pairs of ``-log(1 - sigmoid(z_i . z_j))``."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return 0.0
    if z is None:
        z = forward(params, Propagator(net, cfg.hops)).z
    return float(softplus(_dots(z, target_layer, pairs[:, 0], pairs[:, 1])).sum())


# ---------------------------------------------------------------------------
# negative sampling


def sample_negatives(
    net: MultiplexNetwork,
    target_layer: int,
    count: int,
    seed=0,
    max_rounds: int = 64,
    exclude=None,
) -> np.ndarray:
    """Uniform distinct unordered non-edges ``(i, j)``, ``i < j``, of the target layer.

    ``seed`` may be an int or a ``numpy.random.Generator``.  Pairs listed in
    ``exclude`` are never returned.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = net.num_nodes
    total_pairs = n * (n - 1) // 2
    edges = net.layers[target_layer]
    if exclude is not None and len(exclude):
        ex = np.sort(np.asarray(exclude, dtype=np.int64).reshape(-1, 2), axis=1)
        edges = np.unique(np.concatenate([edges, ex]), axis=0)
    available = total_pairs - len(edges)
    if count > available:
        raise ValueError(
            f"cannot draw {count} distinct negatives: only {available} non-edges in target layer"
        )
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    taken = set((edges[:, 0] * n + edges[:, 1]).tolist())
    edge_keys = np.fromiter(taken, dtype=np.int64, count=len(taken))
    out = np.empty(count, dtype=np.int64)
    filled = 0
    for _ in range(max_rounds):
        need = count - filled
        draw = max(16, int(need * 1.3 * total_pairs / max(available - filled, 1)) + 16)
        i = rng.integers(0, n, size=draw)
        j = rng.integers(0, n - 1, size=draw)
        j = j + (j >= i)  # uniform over j != i
        keys = np.minimum(i, j) * n + np.maximum(i, j)
        keys = keys[~np.isin(keys, edge_keys)]
        for k in keys.tolist():
            if k not in taken:
                taken.add(k)
                out[filled] = k
                filled += 1
                if filled == count:
                    return np.column_stack([out // n, out % n])
    raise RuntimeError(
        f"negative sampling gave up after {max_rounds} rounds "
        f"({filled}/{count} drawn); target layer is too dense"
    )


# ---------------------------------------------------------------------------
# gradients


@dataclass
class Batch:
    """Positive ``(layer, i, j)`` rows plus target-layer negative pairs."""

    positives: np.ndarray
    negatives: np.ndarray
    target_layer: int

    @classmethod
    def empty(cls, target_layer=0):
        return cls(np.zeros((0, 3), np.int64), np.zeros((0, 2), np.int64), target_layer)


def _pair_gradient(z_layer, i, j, coef, n):
    """d/dz of sum_k coef_k * (z_i . z_j) for one layer, as a (V, d) array."""
    S = sp.csr_matrix(
        (np.concatenate([coef, coef]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(n, n),
    )
    return S @ z_layer


def loss_and_gradients(params: ModelParams, prop: Propagator, batch: Batch):
    """Return ``(l_pos, l_neg, grads)`` for the summed batch loss."""
    fw = forward(params, prop)
    z = fw.z
    V, L, _ = z.shape
    grad_z = np.zeros_like(z)
    pos, neg, t = batch.positives, batch.negatives, batch.target_layer
    l_pos = l_neg = 0.0
    if len(pos):
        dots = _dots(z, pos[:, 0], pos[:, 1], pos[:, 2])
        l_pos = float(softplus(-dots).sum())
        coef = -np.exp(-softplus(dots))  # d/d(dot) of softplus(-dot) = sigmoid(dot) - 1
        for l in range(L):
            sel = pos[:, 0] == l
            if sel.any():
                grad_z[:, l] += _pair_gradient(z[:, l], pos[sel, 1], pos[sel, 2], coef[sel], V)
    if len(neg):
        dots = _dots(z, t, neg[:, 0], neg[:, 1])
        l_neg = float(softplus(dots).sum())
        coef = np.exp(-softplus(-dots))  # sigmoid(dot)
        grad_z[:, t] += _pair_gradient(z[:, t], neg[:, 0], neg[:, 1], coef, V)
    return l_pos, l_neg, backward(params, prop, fw, grad_z)


def gradients(params: ModelParams, batch: Batch, prop: Propagator) -> dict:
    """Analytic gradients of the batch loss for every trainable tensor."""
    return loss_and_gradients(params, prop, batch)[2]


def total_loss(params: ModelParams, prop: Propagator, batch: Batch) -> float:
    l_pos, l_neg, _ = loss_and_gradients(params, prop, batch)
    return l_pos + l_neg


# ---------------------------------------------------------------------------
# training loop


def target_embeddings(params: ModelParams, prop: Propagator, target_layer: int, source: str):
    if source == "layer":
        return params.layer_embed[:, target_layer]
    return forward(params, prop).z[:, target_layer]


def train(
    net: MultiplexNetwork,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    params: ModelParams | None = None,
    on_epoch=None,
    exclude_negatives=None,
):
    """Fit the model on ``net``.

    Epoch 1 uses the full network.  From ``sampling_start_epoch`` on, the
    auxiliary layers are re-sampled with the embeddings left by the previous
    epoch (``variant='full'``), or the same number of edges is kept uniformly
    at random (``'random-sampling'``).  ``on_epoch(record, params, active)``
    is called after each epoch.  ``exclude_negatives`` lists pairs that
    must never be drawn as training negatives (held-out evaluation pairs).

    Returns ``(params, TrainLog)``.
    """
    t = train_cfg.target_layer
    net._check_layer(t)
    seed = train_cfg.seed
    if params is None:
        params = init_for_network(net, model_cfg, seed=seed)
    params = params.copy()
    log = TrainLog()
    active = net
    prop = Propagator(active, model_cfg.hops)
    fixed_neg = None
    lr = train_cfg.learning_rate
    dense_lr = train_cfg.dense_learning_rate
    neighbor_lr = train_cfg.neighbor_learning_rate

    for epoch in range(1, train_cfg.epochs + 1):
        t0 = time.perf_counter()
        sampling_due = train_cfg.variant != "no-sampling" and epoch >= train_cfg.sampling_start_epoch
        if sampling_due and (train_cfg.resample_each_epoch or active is net):
            base = net if train_cfg.resample_each_epoch else active
            embeds = target_embeddings(params, prop, t, train_cfg.similarity_source)
            scfg = replace(train_cfg.sampler, seed=int(stream(seed, STREAM_SAMPLER, epoch).integers(2**31)))
            res = undersample(base, embeds, scfg, source=net)
            if train_cfg.variant == "full":
                active = res.sampled_network
            else:
                active = random_undersample(
                    base, t, res.per_layer_kept, int(stream(seed, STREAM_RANDOM, epoch).integers(2**31))
                )
            prop = Propagator(active, model_cfg.hops)

        pos = all_positive_edges(active)
        order = stream(seed, STREAM_SHUFFLE, epoch).permutation(len(pos))
        pos = pos[order]
        bs = train_cfg.batch_size or max(len(pos), 1)
        neg_rng = stream(seed, STREAM_NEG, epoch)
        l_pos_sum = l_neg_sum = 0.0
        for step, start in enumerate(range(0, max(len(pos), 1), bs)):
            chunk = pos[start : start + bs]
            n_neg = train_cfg.neg_ratio * len(chunk)
            if train_cfg.fixed_negatives:
                if fixed_neg is None:
                    fixed_neg = sample_negatives(
                        net, t, n_neg, stream(seed, STREAM_NEG, 0), exclude=exclude_negatives
                    )
                negs = fixed_neg
            else:
                negs = sample_negatives(net, t, n_neg, neg_rng, exclude=exclude_negatives)
            l_pos, l_neg, grads = loss_and_gradients(params, prop, Batch(chunk, negs, t))
            if not (np.isfinite(l_pos) and np.isfinite(l_neg)):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}")
            n_pairs = max(len(chunk) + len(negs), 1)
            for name, g in grads.items():
                if name in DENSE and dense_lr is not None:
                    # shared weights: batch-mean gradient
                    getattr(params, name)[...] -= dense_lr * g / n_pairs
                elif name == "base_neighbor_embed" and neighbor_lr is not None:
                    getattr(params, name)[...] -= neighbor_lr * g
                else:
                    getattr(params, name)[...] -= lr * g
            if not params.all_finite():
                raise TrainingDiverged(f"non-finite parameters at epoch {epoch}, step {step}")
            l_pos_sum += l_pos
            l_neg_sum += l_neg

        rec = EpochRecord(
            epoch,
            l_pos_sum,
            l_neg_sum,
            l_pos_sum + l_neg_sum,
            tuple(active.edge_count(l) for l in range(active.num_layers)),
            time.perf_counter() - t0,
        )
        log.records.append(rec)
        if on_epoch is not None:
            on_epoch(rec, params, active)
    log.active_network = active
    return params, log
