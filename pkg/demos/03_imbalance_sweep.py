"""Sparsify the target layer and watch how link prediction degrades.

The same sweep is available from the command line:

    liamne synth --out net.txt
    liamne sweep --data net.txt --config configs/synthetic.cfg \
        --axis keep_fraction --values 1.0,0.3,0.1,0.03 --csv sweep.csv
"""

import numpy as np

from liamne.evaluation import run_link_prediction
from liamne.graph import compute_stats
from liamne.model import ModelConfig
from liamne.synth import SynthConfig, generate, sparsify_target
from liamne.trainer import TrainConfig

KEEP = (1.0, 0.3, 0.1, 0.03)
SEEDS = range(3)
model_cfg = ModelConfig(d=64)

print("keep   mu     full    no-sampling")
for keep in KEEP:
    row = {}
    for variant in ("full", "no-sampling"):
        vals = []
        for seed in SEEDS:
            net = sparsify_target(generate(SynthConfig(seed=seed)), 0, keep, seed)
            cfg = TrainConfig(epochs=8, neg_ratio=1, learning_rate=0.005, dense_learning_rate=0.5,
                              neighbor_learning_rate=1.0, seed=seed, variant=variant)
            vals.append(run_link_prediction(net, model_cfg, cfg, split_seed=seed)[0].auc)
        row[variant] = np.mean(vals)
    mu = compute_stats(net, 0).imbalance_ratio
    print(f"{keep:<5}  {mu:.2f}   {row['full']:.3f}   {row['no-sampling']:.3f}")
