"""Neuronal cluster structure of a trained cube by information propagation.

Input neurons act as sources. Influence spreads over the normalised
spike-flow graph ``S = D^-1/2 A D^-1/2`` at per-neuron rates, and every
neuron is labelled with the source it received most from.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

UNASSIGNED = -1


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"propagation did not converge in {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class PropagationConfig:
    sigma: float | None = None  # None: median of the neighbour affinities
    tol: float = 1e-10
    max_iter: int = 10000
    rate_cap: float = 1.0 - 1e-6

    def __post_init__(self):
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if not 0.0 < self.rate_cap < 1.0:
            raise ValueError("rate_cap must be in (0, 1)")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("need tol > 0 and max_iter >= 1")


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray  # variable index per neuron, UNASSIGNED where no information arrived
    influence: np.ndarray  # (N, v), assigned rows sum to 1

    def counts(self, v: int | None = None) -> np.ndarray:
        v = self.influence.shape[1] if v is None else v
        lab = self.labels[self.labels >= 0]
        return np.bincount(lab, minlength=v)


@dataclass(frozen=True)
class PropagationResult:
    influence: np.ndarray  # normalised F
    raw: np.ndarray  # converged F~ before normalisation
    assigned: np.ndarray  # rows with positive total information
    iterations: int
    residual: float


def source_matrix(n_neurons: int, input_neurons) -> np.ndarray:
    """``(N, v)`` 0/1 matrix with a single 1 per column at the variable's input neuron."""
    ids = np.asarray(input_neurons, dtype=int)
    F = np.zeros((n_neurons, ids.size))
    F[ids, np.arange(ids.size)] = 1.0
    return F


def neighbour_mean_affinity(A, positions) -> np.ndarray:
    """Mean of ``A`` over each neuron's lattice neighbours (Chebyshev distance 1)."""
    P = np.asarray(positions, dtype=float)
    tree = cKDTree(P)
    pairs = tree.query_pairs(1.0 + 1e-9, p=np.inf, output_type="ndarray")
    n = len(P)
    A = sparse.csr_array(A)
    vals = np.asarray(A[pairs[:, 0], pairs[:, 1]]).ravel() if pairs.size else np.zeros(0)
    total = np.bincount(pairs[:, 0], vals, minlength=n) + np.bincount(pairs[:, 1], vals, minlength=n)
    count = np.bincount(pairs[:, 0], minlength=n) + np.bincount(pairs[:, 1], minlength=n)
    return np.divide(total, count, out=np.zeros(n), where=count > 0)


def rates_from_affinity(dbar, sigma: float, rate_cap: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    dbar = np.asarray(dbar, dtype=float)
    return np.minimum(np.exp(-np.square(dbar) / (2 * sigma**2)), rate_cap)


def default_sigma(dbar) -> float:
    dbar = np.asarray(dbar, dtype=float)
    m = float(np.median(dbar))
    if m > 0:
        return m
    pos = dbar[dbar > 0]
    return float(np.median(pos)) if pos.size else 1.0


def propagation_rates(A, positions, cfg: PropagationConfig | None = None) -> np.ndarray:
    """Diagonal of ``I_rate``: ``min(exp(-dbar^2 / 2 sigma^2), rate_cap)``."""
    cfg = cfg or PropagationConfig()
    dbar = neighbour_mean_affinity(A, positions)
    sigma = cfg.sigma if cfg.sigma is not None else default_sigma(dbar)
    return rates_from_affinity(dbar, sigma, cfg.rate_cap)


def normalized_adjacency(A) -> sparse.csr_array:
    """``D^-1/2 A D^-1/2`` with zero-degree rows and columns left at 0."""
    A = sparse.csr_array(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError("affinity matrix must be square")
    if A.nnz and A.data.min() < 0:
        raise ValueError("affinity matrix must be non-negative")
    deg = np.asarray(A.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=inv, where=deg > 0)
    Dm = sparse.diags_array(inv)
    return sparse.csr_array(Dm @ A @ Dm)


def _normalise(raw: np.ndarray):
    g = raw.sum(axis=1)
    assigned = g > 0
    F = np.zeros_like(raw)
    F[assigned] = raw[assigned] / g[assigned, None]
    return F, assigned


def propagate(A, F_src, rates, cfg: PropagationConfig | None = None) -> PropagationResult:
    """Iterate ``F~ <- R S F~ + (I - R) F_src`` from ``F~ = F_src``, then row-normalise.

    Stops once both ``F~`` and its row-normalised form move by less than
    ``tol``; weakly reached neurons carry little mass, so a small absolute
    change in ``F~`` can still be a large change in their normalised row.
    """
    cfg = cfg or PropagationConfig()
    S = normalized_adjacency(A)
    r = np.asarray(rates, dtype=float)
    F_src = np.asarray(F_src, dtype=float)
    RS = sparse.csr_array(sparse.diags_array(r) @ S)
    base = (1.0 - r)[:, None] * F_src
    F = F_src.copy()
    norm, _ = _normalise(F)
    residual = np.inf
    for it in range(1, cfg.max_iter + 1):
        nxt = RS @ F + base
        nxt_norm, assigned = _normalise(nxt)
        if F.size:
            residual = max(float(np.max(np.abs(nxt - F))), float(np.max(np.abs(nxt_norm - norm))))
        else:
            residual = 0.0
        F, norm = nxt, nxt_norm
        if residual < cfg.tol:
            return PropagationResult(norm, F, assigned, it, residual)
    raise ConvergenceError(residual, cfg.max_iter)


def closed_form(A, F_src, rates, max_n: int = 5000) -> PropagationResult:
    """Fixed point ``(I - R S)^-1 (I - R) F_src`` by a direct solve."""
    S = normalized_adjacency(A)
    n = S.shape[0]
    if n > max_n:
        raise ValueError(f"dense solve limited to N <= {max_n}")
    r = np.asarray(rates, dtype=float)
    M = np.eye(n) - r[:, None] * S.toarray()
    rhs = (1.0 - r)[:, None] * np.asarray(F_src, dtype=float)
    raw = np.linalg.solve(M, rhs)
    influence, assigned = _normalise(raw)
    return PropagationResult(influence, raw, assigned, 0, 0.0)


def spectral_radius(A, rates, iters: int = 5000, tol: float = 1e-12, seed: int = 0) -> float:
    """Spectral radius of ``R S`` by power iteration.

    ``R S`` is similar to the symmetric ``R^1/2 S R^1/2``, whose largest
    absolute eigenvalue is reached by plain power iteration.
    """
    S = normalized_adjacency(A)
    h = np.sqrt(np.asarray(rates, dtype=float))
    M = sparse.csr_array(sparse.diags_array(h) @ S @ sparse.diags_array(h))
    x = np.random.default_rng(seed).random(S.shape[0]) + 0.1
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = M @ x
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        x = y / new
        if abs(new - lam) < tol:
            return new
        lam = new
    return lam


def assign_clusters(result, F_src=None) -> ClusterAssignment:
    """Argmax source per neuron; ties go to the lowest variable index.

    Rows that received no information stay :data:`UNASSIGNED`. Accepts a
    :class:`PropagationResult` or a plain normalised ``F`` (all-zero rows
    count as unassigned). When ``F_src`` is given, each input neuron keeps
    its own variable's label.
    """
    if isinstance(result, PropagationResult):
        F, assigned = result.influence, result.assigned
    else:
        F = np.asarray(result, dtype=float)
        assigned = F.sum(axis=1) > 0
    labels = np.where(assigned, np.argmax(F, axis=1), UNASSIGNED)
    if F_src is not None:
        rows, cols = np.nonzero(np.asarray(F_src))
        labels[rows] = cols
    return ClusterAssignment(labels, F)


def cluster_cube(A, positions, input_neurons, cfg: PropagationConfig | None = None) -> ClusterAssignment:
    """Rates, propagation and labelling in one call."""
    cfg = cfg or PropagationConfig()
    F_src = source_matrix(len(positions), input_neurons)
    rates = propagation_rates(A, positions, cfg)
    return assign_clusters(propagate(A, F_src, rates, cfg), F_src)


# ------------------------------------------------------------- snapshots

SNAPSHOT_KINDS = ("connectivity", "firing_frame", "clusters")


def export_snapshot(cube, kind: str, record=None, tick: int = 0, clusters: ClusterAssignment | None = None) -> dict:
    """JSON-ready visualisation document.

    Every kind carries ``positions`` and ``input_ids``; ``connectivity``
    adds ``synapses`` (pre, post, weight), ``firing_frame`` adds ``tick``
    and ``fired`` (neuron ids), ``clusters`` adds ``labels`` and
    ``influence`` rows.
    """
    if kind not in SNAPSHOT_KINDS:
        raise ValueError(f"kind must be one of {SNAPSHOT_KINDS}")
    doc = {
        "kind": kind,
        "positions": np.asarray(cube.positions).tolist(),
        "input_ids": np.asarray(cube.input_ids).tolist(),
        "variable_neurons": None if cube.mapping is None else cube.variable_neurons.tolist(),
    }
    if kind == "connectivity":
        doc["synapses"] = [
            {"pre": int(a), "post": int(b), "weight": float(w)} for a, b, w in zip(cube.pre, cube.post, cube.weights)
        ]
    elif kind == "firing_frame":
        if record is None:
            raise ValueError("firing_frame needs a record")
        fired = np.asarray(record.fired)
        if fired.shape[1] != cube.n_neurons:
            raise ValueError("record and cube differ in neuron count")
        doc["tick"] = int(tick)
        doc["fired"] = np.flatnonzero(fired[tick]).tolist()
    else:
        if clusters is None:
            raise ValueError("clusters snapshot needs a ClusterAssignment")
        if clusters.labels.size != cube.n_neurons:
            raise ValueError("cluster labels and cube differ in neuron count")
        doc["labels"] = clusters.labels.tolist()
        doc["influence"] = clusters.influence.tolist()
    return doc


def firing_frames(cube, record) -> list[dict]:
    return [export_snapshot(cube, "firing_frame", record, tick) for tick in range(record.t)]


def write_json(doc, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)
