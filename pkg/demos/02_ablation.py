"""Compare similarity-guided sampling with random and no sampling.

Three training variants on the same networks and splits:

* ``full``             drop auxiliary edges whose endpoints look dissimilar
* ``random-sampling``  drop the same number of auxiliary edges at random
* ``no-sampling``      keep every auxiliary edge

Takes a couple of minutes on one core.
"""

import numpy as np

from liamne.evaluation import run_link_prediction
from liamne.model import ModelConfig
from liamne.synth import SynthConfig, generate
from liamne.trainer import TrainConfig

SEEDS = range(5)
model_cfg = ModelConfig(d=64)

aucs = {v: [] for v in ("full", "random-sampling", "no-sampling")}
for seed in SEEDS:
    net = generate(SynthConfig(seed=seed))
    for variant in aucs:
        cfg = TrainConfig(epochs=8, neg_ratio=1, learning_rate=0.005, dense_learning_rate=0.5,
                          neighbor_learning_rate=1.0, seed=seed, variant=variant)
        report, *_ = run_link_prediction(net, model_cfg, cfg, split_seed=seed)
        aucs[variant].append(report.auc)
    print(f"seed {seed}: " + ", ".join(f"{v} {aucs[v][-1]:.3f}" for v in aucs))

print()
for variant, vals in aucs.items():
    print(f"{variant:16s} mean AUC {np.mean(vals):.4f} (sd {np.std(vals, ddof=1):.4f})")
