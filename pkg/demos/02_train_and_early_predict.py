"""Two-stage training and prediction from partial recordings.

The cube learns from the training half without labels (STDP), then one
output neuron per training sample stores the sample's firing order. Test
samples are classified by their nearest stored orders, first from the full
recording and then from its first 75% and 50%.
"""

import numpy as np

from neucube.dataset import SyntheticConfig, generate_synthetic
from neucube.pipeline import NeuCube, PipelineConfig, stratified_folds, with_overrides

data = generate_synthetic(SyntheticConfig(seed=3))
test_idx, train_idx = stratified_folds(data.labels, 2, seed=3)
train, test = data.subset(train_idx), data.subset(test_idx)

for mode in ("graph", "random"):
    model = NeuCube(with_overrides(PipelineConfig(), mapping_mode=mode)).fit(train)
    sparsity = np.mean([r.sparsity for r in model.train_records])
    early = model.early_scores(test)
    scores = ", ".join(f"{int(100 * f)}%: {a:.2f}" for f, a in early.items())
    print(f"{mode:>6} mapping  objective {model.mapping.objective:6.3f}  firing {100 * sparsity:.1f}%  accuracy {scores}")
    print("        stage timings (s): " + ", ".join(f"{k} {v:.2f}" for k, v in model.timings.items()))

# a readout with one neighbour and no drift reproduces its own training labels
memo = NeuCube(with_overrides(PipelineConfig(), desnn__k=1, desnn__drift=0.0)).fit(train)
print(f"training-set recall with k=1, drift=0: {memo.score(train):.2f}")
