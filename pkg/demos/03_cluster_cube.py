"""Which part of the trained cube belongs to which input variable?

After unsupervised training, the spikes exchanged between neuron pairs form
an affinity graph. Each input neuron injects its own label into that graph.
The label spreads, more slowly through neurons that exchange many spikes
with their neighbours. Every neuron then takes the label it received most
of. The iterative spread is checked against the direct linear solve.
"""

import os
import tempfile

import numpy as np

from neucube.analysis import (
    assign_clusters,
    closed_form,
    export_snapshot,
    propagate,
    propagation_rates,
    source_matrix,
    spectral_radius,
    write_json,
)
from neucube.dataset import SyntheticConfig, generate_synthetic
from neucube.pipeline import NeuCube
from neucube.reservoir import spike_flow

data = generate_synthetic(SyntheticConfig(seed=1))
model = NeuCube().fit(data)
cube = model.cube

A = spike_flow(cube)
print(f"{cube.n_neurons} neurons, {cube.n_synapses} synapses, {int(A.sum()) // 2} spikes exchanged during training")

F_src = source_matrix(cube.n_neurons, cube.variable_neurons)
rates = propagation_rates(A, cube.positions)
print(f"spectral radius of the propagation operator: {spectral_radius(A, rates):.4f} (< 1 guarantees convergence)")

it = propagate(A, F_src, rates)
cf = closed_form(A, F_src, rates)
print(f"iterations {it.iterations}, max difference to the direct solve {np.abs(it.influence - cf.influence).max():.1e}")

clusters = assign_clusters(it, F_src)
counts = clusters.counts(data.v)
unassigned = int((clusters.labels < 0).sum())
for name, c in zip(data.variable_names, counts):
    print(f"  {name}: {c:3d} neurons {'#' * (c // 4)}")
print(f"  unassigned (no information arrived): {unassigned}")

out = tempfile.mkdtemp(prefix="neucube_")
write_json(export_snapshot(cube, "clusters", clusters=clusters), os.path.join(out, "clusters.json"))
write_json(export_snapshot(cube, "connectivity"), os.path.join(out, "connectivity.json"))
print(f"snapshots for external plotting written to {out}")
