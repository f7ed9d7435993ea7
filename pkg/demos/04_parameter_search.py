"""Genetic search over the seven model parameters.

Each genome sets the encoding threshold, firing threshold, STDP rate,
refractory time, rank-order modulation, drift and neighbour count. Its
fitness is the 2-fold cross-validation error. The same search runs once
with graph-matched and once with random input placement, using identical
seeds. A short run is used here. The full setting is 16 generations of
50 genomes, e.g. `neucube optimize --compare-mapping`.
"""

import time

from neucube.dataset import SyntheticConfig, generate_synthetic
from neucube.optimizer import GaConfig, compare_mapping

data = generate_synthetic(SyntheticConfig(seed=0))
t0 = time.perf_counter()
runs = compare_mapping(data, cfg=GaConfig(generations=4, population=12, elite_count=2, seed=0))

for mode, res in runs.items():
    trend = " ".join(f"{e:.3f}" for e in res.trace.best_error)
    print(f"{mode:>6}: best-so-far error per generation {trend}  ({res.evaluations} evaluations)")
    print("        " + ", ".join(f"{k}={v:.3g}" for k, v in res.params.items()))
print(f"elapsed {time.perf_counter() - t0:.0f} s")
