"""Multiplex network embedding with similarity-guided under-sampling of
auxiliary layers, for link prediction on a sparse target layer."""

__version__ = "0.1.0"

from .graph import (  # noqa: E402
    GraphFormatError,
    LayerStats,
    MultiplexNetwork,
    compute_stats,
    imbalance_ratio,
    layer_density,
    load_multiplex,
    save_multiplex,
)
from .model import ModelConfig, ModelParams, init_params, load_checkpoint, save_checkpoint  # noqa: E402
from .sampler import SampleResult, SamplerConfig, random_undersample, similarity, undersample  # noqa: E402
from .synth import SynthConfig, generate, sparsify_target  # noqa: E402
from .trainer import TrainConfig, TrainingDiverged, TrainLog, train  # noqa: E402
from .evaluation import auc, classify_nodes, f1_scores, run_link_prediction, split_edges  # noqa: E402

__all__ = [
    "GraphFormatError", "LayerStats", "MultiplexNetwork", "compute_stats", "imbalance_ratio",
    "layer_density", "load_multiplex", "save_multiplex", "ModelConfig", "ModelParams",
    "init_params", "load_checkpoint", "save_checkpoint", "SampleResult", "SamplerConfig",
    "random_undersample", "similarity", "undersample", "SynthConfig", "generate",
    "sparsify_target", "TrainConfig", "TrainingDiverged", "TrainLog", "train", "auc",
    "classify_nodes", "f1_scores", "run_link_prediction", "split_edges",
]
