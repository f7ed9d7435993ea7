import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.csgraph import connected_components

from neucube.analysis import (
    UNASSIGNED,
    ClusterAssignment,
    PropagationConfig,
    assign_clusters,
    closed_form,
    cluster_cube,
    export_snapshot,
    firing_frames,
    neighbour_mean_affinity,
    normalized_adjacency,
    propagate,
    propagation_rates,
    rates_from_affinity,
    source_matrix,
    spectral_radius,
    write_json,
)
from neucube.reservoir import CubeConfig, LIFParams, build_cube, simulate, spike_flow


@st.composite
def instances(draw):
    """Random sparse symmetric affinity, input neurons and rates."""
    n = draw(st.integers(3, 40))
    v = draw(st.integers(1, min(5, n)))
    seed = draw(st.integers(0, 10_000))
    rng = np.random.default_rng(seed)
    A = rng.random((n, n)) * (rng.random((n, n)) < draw(st.floats(0.0, 0.4)))
    A = np.triu(A, 1)
    A = A + A.T
    inputs = rng.choice(n, v, replace=False)
    rates = rng.uniform(0.0, 1.0 - 1e-6, n)
    return A, source_matrix(n, inputs), rates


def line(n=10):
    A = np.zeros((n, n))
    for i in range(n - 1):
        A[i, i + 1] = A[i + 1, i] = 1.0
    return A


# ----------------------------------------------------------------- rates


def test_rate_examples():
    assert rates_from_affinity([1e6], 1.0, 0.99).tolist() == [0.0]
    assert rates_from_affinity([0.0], 1.0, 0.99).tolist() == [0.99]
    sigma = 0.7
    assert rates_from_affinity([sigma * math.sqrt(2 * math.log(2))], sigma, 0.99)[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        rates_from_affinity([1.0], 0.0, 0.5)


def test_neighbour_mean_uses_3d_moore_neighbourhood():
    pos = np.array([[x, y, z] for x in range(3) for y in range(3) for z in range(3)])
    A = np.zeros((27, 27))
    centre = 13
    A[centre, :] = A[:, centre] = 2.0
    A[centre, centre] = 0.0
    dbar = neighbour_mean_affinity(A, pos)
    assert dbar[centre] == pytest.approx(2.0)  # all 26 neighbours
    assert dbar[0] == pytest.approx(2.0 / 7)  # corner: 7 neighbours, one of them the centre


def test_rates_capped_and_defaulted():
    pos = np.array([[i, 0, 0] for i in range(5)])
    r = propagation_rates(np.zeros((5, 5)), pos, PropagationConfig(rate_cap=0.9))
    assert np.all(r == 0.9)


# ----------------------------------------------------------- propagation


def test_no_edges_leaves_only_inputs_assigned():
    F_src = source_matrix(6, [1, 4])
    res = propagate(np.zeros((6, 6)), F_src, np.full(6, 0.5))
    assert np.allclose(res.raw, 0.5 * F_src)
    assert res.assigned.tolist() == [False, True, False, False, True, False]
    assert assign_clusters(res).labels.tolist() == [-1, 0, -1, -1, 1, -1]


def test_two_neuron_hand_solution():
    # S = [[0,1],[1,0]], source at neuron 0, uniform rate r:
    # f0 = r f1 + (1 - r), f1 = r f0  ->  f0 = 1/(1 + r), f1 = r/(1 + r)
    r = 0.6
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = propagate(A, source_matrix(2, [0]), np.full(2, r))
    assert res.raw[:, 0] == pytest.approx([1 / (1 + r), r / (1 + r)], abs=1e-9)


def test_zero_rates_return_sources():
    F_src = source_matrix(5, [0, 3])
    res = closed_form(line(5), F_src, np.zeros(5))
    assert np.array_equal(res.raw, F_src)


@settings(max_examples=60)
@given(instances())
def test_iteration_matches_closed_form(inst):
    A, F_src, rates = inst
    it = propagate(A, F_src, rates, PropagationConfig(tol=1e-13))
    cf = closed_form(A, F_src, rates)
    assert np.abs(it.raw - cf.raw).max() < 1e-8
    assert np.abs(it.influence - cf.influence).max() < 1e-8
    assert np.array_equal(it.assigned, cf.assigned)


@settings(max_examples=60)
@given(instances())
def test_fixed_point_residual_and_row_sums(inst):
    A, F_src, rates = inst
    cfg = PropagationConfig()
    res = propagate(A, F_src, rates, cfg)
    S = normalized_adjacency(A).toarray()
    step = rates[:, None] * (S @ res.raw) + (1 - rates)[:, None] * F_src
    assert np.abs(res.raw - step).max() < cfg.tol
    sums = res.influence[res.assigned].sum(axis=1)
    assert np.allclose(sums, 1.0, atol=1e-12)
    assert not res.influence[~res.assigned].any()


@settings(max_examples=60)
@given(instances())
def test_unassigned_iff_unreachable(inst):
    A, F_src, rates = inst
    res = propagate(A, F_src, rates)
    _, comp = connected_components(A > 0, directed=False)
    source_comps = set(comp[np.nonzero(F_src)[0]].tolist())
    reachable = np.array([c in source_comps for c in comp])
    assert np.array_equal(res.assigned, reachable)


@settings(max_examples=60)
@given(instances())
def test_spectral_radius_below_one(inst):
    A, _, rates = inst
    rho = spectral_radius(A, rates)
    assert rho < 1.0
    S = normalized_adjacency(A).toarray()
    exact = np.abs(np.linalg.eigvals(rates[:, None] * S)).max()
    assert rho == pytest.approx(exact, abs=1e-6)


# --------------------------------------------------------------- labels


def test_label_rules():
    assert assign_clusters(np.array([[0, 0, 0, 1.0]])).labels.tolist() == [3]
    assert assign_clusters(np.array([[0.5, 0.5]])).labels.tolist() == [0]
    assert assign_clusters(np.zeros((1, 2))).labels.tolist() == [UNASSIGNED]


def test_line_graph_splits_at_midpoint():
    F_src = source_matrix(10, [0, 9])
    res = propagate(line(10), F_src, np.full(10, 0.9))
    labels = assign_clusters(res, F_src).labels
    assert labels.tolist() == [0] * 5 + [1] * 5


def test_cluster_cube_on_trained_cube():
    cube = build_cube(CubeConfig(4, 4, 4, connection_prob=1.0, seed=2), LIFParams(0.12, 0.1, 2), 3)
    cube.assign_mapping([0, 1, 2])
    row = np.random.default_rng(0).choice([-1, 0, 1], size=(40, 3))
    simulate(cube, row, "plastic", 0.1)
    A = spike_flow(cube)
    clusters = cluster_cube(A, cube.positions, cube.variable_neurons)
    for j, nid in enumerate(cube.variable_neurons):
        assert clusters.labels[nid] == j
    assert clusters.counts().sum() == (clusters.labels >= 0).sum()


# ------------------------------------------------------------- snapshots


def test_snapshots_round_trip(tmp_path):
    cube = build_cube(CubeConfig(2, 2, 2, connection_prob=0.0), LIFParams(), 2)
    doc = export_snapshot(cube, "connectivity")
    assert doc["synapses"] == []
    cube = build_cube(CubeConfig(3, 3, 3, connection_prob=1.0), LIFParams(), 2)
    cube.assign_mapping([1, 0])
    rec = simulate(cube, np.ones((4, 2)))
    F_src = source_matrix(cube.n_neurons, cube.variable_neurons)
    res = propagate(spike_flow(rec), F_src, np.full(cube.n_neurons, 0.8))
    clusters = assign_clusters(res, F_src)
    for kind, extra in (("connectivity", {}), ("firing_frame", {"record": rec, "tick": 1}), ("clusters", {"clusters": clusters})):
        doc = export_snapshot(cube, kind, **extra)
        write_json(doc, tmp_path / f"{kind}.json")
        assert json.loads((tmp_path / f"{kind}.json").read_text()) == doc
    doc = export_snapshot(cube, "clusters", clusters=clusters)
    hist = np.bincount([l for l in doc["labels"] if l >= 0], minlength=2)
    assert hist.tolist() == clusters.counts().tolist()
    frames = firing_frames(cube, rec)
    assert [f["tick"] for f in frames] == [0, 1, 2, 3]
    assert frames[0]["fired"] == np.flatnonzero(rec.fired[0]).tolist()


def test_snapshot_errors():
    cube = build_cube(CubeConfig(2, 2, 2), LIFParams(), 1)
    with pytest.raises(ValueError):
        export_snapshot(cube, "bogus")
    with pytest.raises(ValueError):
        export_snapshot(cube, "firing_frame")
    with pytest.raises(ValueError):
        export_snapshot(cube, "clusters", clusters=ClusterAssignment(np.zeros(3, dtype=int), np.zeros((3, 1))))
