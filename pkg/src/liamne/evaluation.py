"""Link prediction (AUC) and node classification (macro/micro F1)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .graph import MultiplexNetwork
from .model import ModelConfig, ModelParams, Propagator, forward, score_pairs
from .trainer import TrainConfig, sample_negatives, train

MIN_TARGET_EDGES = 10


@dataclass
class SplitManifest:
    train_edges: np.ndarray
    valid_edges: np.ndarray
    test_edges: np.ndarray
    valid_negatives: np.ndarray
    test_negatives: np.ndarray
    seed: int
    train_network: MultiplexNetwork = field(repr=False)

    @property
    def sizes(self) -> tuple:
        return len(self.train_edges), len(self.valid_edges), len(self.test_edges)

    def heldout_negatives(self) -> np.ndarray:
        return np.concatenate([self.valid_negatives, self.test_negatives])

    def heldout_pairs(self) -> np.ndarray:
        """Every valid/test pair, positive or negative."""
        return np.concatenate(
            [self.valid_edges, self.test_edges, self.valid_negatives, self.test_negatives]
        )


@dataclass
class EvalReport:
    auc: float | None = None
    valid_auc: float | None = None
    macro_f1: float | None = None
    micro_f1: float | None = None
    counts: dict = field(default_factory=dict)


def split_edges(net: MultiplexNetwork, target_layer: int, ratios=(8, 1, 1), seed: int = 0) -> SplitManifest:
    """Random train/valid/test partition of the target layer's edges.

    Valid and test sizes are ``floor(m * r / sum(ratios))``; train takes the
    remainder.  Each held-out positive gets one uniform non-edge partner.
    The returned ``train_network`` has the held-out positives removed.
    """
    edges = net.layers[target_layer]
    m = len(edges)
    if m < MIN_TARGET_EDGES:
        raise ValueError(f"target layer too small for splitting ({m} < {MIN_TARGET_EDGES} edges)")
    total = sum(ratios)
    n_valid = m * ratios[1] // total
    n_test = m * ratios[2] // total
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    valid_idx = np.sort(perm[:n_valid])
    test_idx = np.sort(perm[n_valid : n_valid + n_test])
    train_idx = np.sort(perm[n_valid + n_test :])
    negs = sample_negatives(net, target_layer, n_valid + n_test, rng)
    return SplitManifest(
        train_edges=edges[train_idx],
        valid_edges=edges[valid_idx],
        test_edges=edges[test_idx],
        valid_negatives=negs[:n_valid],
        test_negatives=negs[n_valid:],
        seed=seed,
        train_network=net.with_layer(target_layer, edges[train_idx]),
    )


def auc(scores_pos, scores_neg) -> float:
    """Mann-Whitney estimate of P(positive outscores negative); ties count 1/2."""
    pos = np.asarray(scores_pos, dtype=np.float64).ravel()
    neg = np.asarray(scores_neg, dtype=np.float64).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("auc needs non-empty positive and negative score lists")
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def target_scores(params: ModelParams, net: MultiplexNetwork, cfg: ModelConfig, target_layer: int, pairs):
    z = forward(params, Propagator(net, cfg.hops)).z[:, target_layer]
    return score_pairs(z, pairs)


def predict_links(
    params: ModelParams,
    manifest: SplitManifest,
    target_layer: int,
    cfg: ModelConfig,
    net: MultiplexNetwork | None = None,
) -> EvalReport:
    """Score held-out pairs with target-layer final embeddings.

    Neighbour aggregation runs on ``net`` (the network the model finished
    training on, possibly under-sampled), defaulting to the manifest's
    training network.
    """
    net = manifest.train_network if net is None else net
    z = forward(params, Propagator(net, cfg.hops)).z[:, target_layer]
    report = EvalReport(
        auc=auc(score_pairs(z, manifest.test_edges), score_pairs(z, manifest.test_negatives)),
        counts={"train": len(manifest.train_edges), "valid": len(manifest.valid_edges), "test": len(manifest.test_edges)},
    )
    if len(manifest.valid_edges):
        report.valid_auc = auc(
            score_pairs(z, manifest.valid_edges), score_pairs(z, manifest.valid_negatives)
        )
    return report


def run_link_prediction(
    net: MultiplexNetwork,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    split_seed: int = 0,
    params=None,
):
    """Split, train on the training network, score the held-out pairs.

    Returns ``(report, params, log, manifest)``.
    """
    t = train_cfg.target_layer
    manifest = split_edges(net, t, seed=split_seed)
    params, log = train(
        manifest.train_network, model_cfg, train_cfg, params=params,
        exclude_negatives=manifest.heldout_pairs(),
    )
    report = predict_links(params, manifest, t, model_cfg, net=log.active_network)
    return report, params, log, manifest


# ---------------------------------------------------------------------------
# node classification


class SoftmaxRegression:
    """Multinomial logistic regression fitted by full-batch gradient descent.

    Features are standardised with training-set statistics.
    """

    def __init__(self, l2=1e-4, steps=500, learning_rate=0.1):
        self.l2 = l2
        self.steps = steps
        self.learning_rate = learning_rate

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("classification needs at least two classes")
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        self.scale_[self.scale_ == 0] = 1.0
        Xs = (X - self.mean_) / self.scale_
        Y = (y[:, None] == self.classes_[None, :]).astype(np.float64)
        n, d = Xs.shape
        self.W_ = np.zeros((d, len(self.classes_)))
        self.b_ = np.zeros(len(self.classes_))
        for _ in range(self.steps):
            P = self._proba(Xs)
            G = (P - Y) / n
            self.W_ -= self.learning_rate * (Xs.T @ G + self.l2 * self.W_)
            self.b_ -= self.learning_rate * G.sum(axis=0)
        return self

    def _proba(self, Xs):
        s = Xs @ self.W_ + self.b_
        s -= s.max(axis=1, keepdims=True)
        e = np.exp(s)
        return e / e.sum(axis=1, keepdims=True)

    def predict_proba(self, X):
        return self._proba((np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def confusion_matrix(y_true, y_pred, classes=None) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if classes is None:
        classes = np.union1d(y_true, y_pred)
    index = {c: k for k, c in enumerate(classes.tolist())}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true.tolist(), y_pred.tolist()):
        cm[index[t], index[p]] += 1
    return cm, classes


def f1_scores(y_true, y_pred) -> tuple[float, float]:
    """``(macro_f1, micro_f1)`` over the union of true and predicted classes."""
    cm, _ = confusion_matrix(y_true, y_pred)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    macro = float(per_class.mean())
    micro = float(2 * tp.sum() / (2 * tp.sum() + fp.sum() + fn.sum()))
    return macro, micro


def node_features(params: ModelParams, net: MultiplexNetwork, cfg: ModelConfig) -> np.ndarray:
    """Mean over layers of the final embeddings, shape (V, d)."""
    return forward(params, Propagator(net, cfg.hops)).z.mean(axis=1)


def split_nodes(nodes, ratios=(8, 1, 1), seed=0):
    nodes = np.asarray(nodes)
    total = sum(ratios)
    n_valid = len(nodes) * ratios[1] // total
    n_test = len(nodes) * ratios[2] // total
    perm = np.random.default_rng(seed).permutation(nodes)
    return perm[n_valid + n_test :], perm[:n_valid], perm[n_valid : n_valid + n_test]


def classify_features(features, labels: dict, split_seed=0, classifier=None) -> EvalReport:
    nodes = np.array(sorted(labels))
    y_all = np.array([labels[i] for i in nodes])
    if len(np.unique(y_all)) < 2:
        raise ValueError("classification needs at least two classes")
    train_n, valid_n, test_n = split_nodes(nodes, seed=split_seed)
    lab = lambda idx: np.array([labels[int(i)] for i in idx])
    clf = classifier or SoftmaxRegression()
    clf.fit(features[train_n], lab(train_n))
    macro, micro = f1_scores(lab(test_n), clf.predict(features[test_n]))
    return EvalReport(
        macro_f1=macro,
        micro_f1=micro,
        counts={"train": len(train_n), "valid": len(valid_n), "test": len(test_n)},
    )


def classify_nodes(
    params: ModelParams, labels: dict, split_seed: int, net: MultiplexNetwork, cfg: ModelConfig
) -> EvalReport:
    """Fit softmax regression on layer-averaged final embeddings; report test F1."""
    if labels is None:
        raise ValueError("network has no labels")
    return classify_features(node_features(params, net, cfg), labels, split_seed)


def with_target(train_cfg: TrainConfig, target_layer: int) -> TrainConfig:
    return replace(train_cfg, sampler=replace(train_cfg.sampler, target_layer=target_layer))
