"""Graph-matching placement of temporal variables onto input neurons.

Two graphs over ``v`` vertices are matched: the neuron similarity graph
(NSG, k-nearest input neurons weighted by inverse distance) and the signal
similarity graph (SSG, k most similar variables weighted by similarity).
The permutation minimising ``||A_n - P A_s P^T||_F^2`` is searched by
affinity-seeded 2-opt local search with restarts, and can be checked
against full enumeration for small ``v``.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .similarity import SimilarityMatrix

log = logging.getLogger(__name__)

EXHAUSTIVE_MAX_V = 9


@dataclass(frozen=True)
class WeightedGraph:
    """Symmetric weighted graph; ``mask`` marks edges (an SSG edge may carry
    zero weight)."""

    adjacency: np.ndarray
    payload: np.ndarray | tuple | None = None
    mask: np.ndarray | None = None

    @property
    def v(self) -> int:
        return self.adjacency.shape[0]

    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edge_mask(self) -> np.ndarray:
        return self.adjacency > 0 if self.mask is None else self.mask

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.edge_mask(), 1))
        return list(zip(i.tolist(), j.tolist()))


@dataclass(frozen=True)
class Mapping:
    """``permutation[j]`` is the input-neuron slot hosting variable ``j``."""

    permutation: np.ndarray
    objective: float = math.nan

    def __post_init__(self):
        p = np.asarray(self.permutation, dtype=int)
        if sorted(p.tolist()) != list(range(p.size)):
            raise ValueError(f"not a permutation: {p.tolist()}")
        object.__setattr__(self, "permutation", p)

    @property
    def v(self) -> int:
        return self.permutation.size

    def matrix(self) -> np.ndarray:
        """Permutation matrix ``P`` with ``P[perm[j], j] = 1``."""
        P = np.zeros((self.v, self.v))
        P[self.permutation, np.arange(self.v)] = 1.0
        return P


@dataclass(frozen=True)
class MappingConfig:
    k_nsg: int = 3
    k_ssg: int = 3
    sigma_n: float = 0.5
    sigma_e: float = 0.5
    solver: str = "greedy_2opt"
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.k_nsg < 1 or self.k_ssg < 1:
            raise ValueError("neighbour counts must be >= 1")
        if self.sigma_n <= 0 or self.sigma_e <= 0:
            raise ValueError("affinity widths must be > 0")
        if self.solver not in ("greedy_2opt", "exhaustive"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


def _symmetric_knn(order_rows: np.ndarray, k: int, v: int) -> np.ndarray:
    mask = np.zeros((v, v), dtype=bool)
    for i in range(v):
        for j in order_rows[i][:k]:
            mask[i, j] = True
    return mask | mask.T


def _clamp_k(k: int, v: int) -> int:
    if v < 2:
        raise ValueError("a graph needs at least 2 vertices")
    if k >= v:
        raise ValueError(f"k={k} must be smaller than v={v}")
    return k


def build_nsg(coords, k: int) -> WeightedGraph:
    """k-nearest-neighbour graph of input neurons, weight ``1/distance``."""
    X = np.asarray(coords, dtype=float)
    v = X.shape[0]
    k = _clamp_k(k, v)
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    off = ~np.eye(v, dtype=bool)
    if np.any(D[off] == 0):
        raise ValueError("duplicate input-neuron coordinates")
    Dm = D.copy()
    np.fill_diagonal(Dm, np.inf)
    order = np.argsort(Dm, axis=1, kind="stable")
    mask = _symmetric_knn(order, k, v)
    A = np.zeros((v, v))
    A[mask] = 1.0 / D[mask]
    return WeightedGraph(A, X, mask)


def build_ssg(sim: SimilarityMatrix | np.ndarray, k: int) -> WeightedGraph:
    """Top-k similarity graph of variables; ties go to the lower index."""
    S = np.asarray(getattr(sim, "values", sim), dtype=float)
    v = S.shape[0]
    k = _clamp_k(k, v)
    if not np.allclose(S, S.T, atol=1e-9):
        raise ValueError("similarity matrix must be symmetric")
    Sm = S.copy()
    np.fill_diagonal(Sm, -np.inf)
    order = np.argsort(-Sm, axis=1, kind="stable")
    mask = _symmetric_knn(order, k, v)
    A = np.where(mask, np.maximum(S, 0.0), 0.0)
    np.fill_diagonal(A, 0.0)
    for i in range(v):
        if not np.any(A[i] > 0):
            log.warning("SSG vertex %d has only zero-weight edges", i)
    names = getattr(sim, "variable_names", None) or tuple(range(v))
    return WeightedGraph(A, tuple(names), mask)


def _normalised_degree(g: WeightedGraph, name: str) -> np.ndarray:
    d = g.degree()
    top = d.max()
    if not top > 0:
        raise ValueError(f"{name} has no positive edge weight; degree normalisation undefined")
    return d / top


def vertex_affinity(nsg: WeightedGraph, ssg: WeightedGraph, sigma_n: float) -> np.ndarray:
    """``[i_nsg, i_ssg]`` entry ``exp(-|d~ - c~|^2 / 2 sigma_n^2)``."""
    if nsg.v != ssg.v:
        raise ValueError("graphs differ in vertex count")
    d = _normalised_degree(nsg, "NSG")
    c = _normalised_degree(ssg, "SSG")
    return np.exp(-np.square(d[:, None] - c[None, :]) / (2 * sigma_n**2))


def rescaled_nsg(nsg: WeightedGraph) -> np.ndarray:
    top = nsg.adjacency.max()
    if not top > 0:
        raise ValueError("NSG has no positive edge weight")
    return nsg.adjacency / top


def edge_affinity(nsg: WeightedGraph, ssg: WeightedGraph, sigma_e: float, nsg_edge, ssg_edge) -> float:
    i, j = nsg_edge
    k, l = ssg_edge
    if not nsg.edge_mask()[i, j]:
        raise ValueError(f"({i}, {j}) is not an NSG edge")
    if not ssg.edge_mask()[k, l]:
        raise ValueError(f"({k}, {l}) is not an SSG edge")
    a = rescaled_nsg(nsg)[i, j]
    b = ssg.adjacency[k, l]
    return float(np.exp(-((a - b) ** 2) / (2 * sigma_e**2)))


def qap_objective(A_n, A_s, mapping) -> float:
    """``||A_n - P A_s P^T||_F^2`` by permuted lookup."""
    p = np.asarray(getattr(mapping, "permutation", mapping), dtype=int)
    diff = np.asarray(A_n)[np.ix_(p, p)] - np.asarray(A_s)
    return float(np.sum(diff * diff))


def _swap_deltas(A_n: np.ndarray, A_s: np.ndarray, p: np.ndarray, budget: int = 1 << 22) -> np.ndarray:
    """Objective change for swapping the slots of every variable pair."""
    v = p.size
    deltas = np.full((v, v), np.inf)
    current = np.sum((A_n[np.ix_(p, p)] - A_s) ** 2)
    ia, ib = np.triu_indices(v, 1)
    step = max(1, budget // (v * v))
    for lo in range(0, ia.size, step):
        a, b = ia[lo : lo + step], ib[lo : lo + step]
        q = np.tile(p, (a.size, 1))
        rows = np.arange(a.size)
        q[rows, a], q[rows, b] = p[b], p[a]
        diff = A_n[q[:, :, None], q[:, None, :]] - A_s
        deltas[a, b] = np.sum(diff * diff, axis=(1, 2)) - current
    return deltas


def two_opt(A_n, A_s, perm) -> np.ndarray:
    """Best-improvement pairwise swaps until no swap lowers the objective."""
    p = np.array(perm, dtype=int)
    if p.size < 2:
        return p
    while True:
        deltas = _swap_deltas(A_n, A_s, p)
        a, b = np.unravel_index(np.argmin(deltas), deltas.shape)
        if not deltas[a, b] < -1e-12:
            return p
        p[a], p[b] = p[b], p[a]


def greedy_seed(affinity: np.ndarray) -> np.ndarray:
    """Assign (slot, variable) pairs in decreasing affinity, each side once."""
    v = affinity.shape[0]
    flat = np.argsort(-affinity, axis=None, kind="stable")
    perm = np.full(v, -1)
    used = np.zeros(v, dtype=bool)
    for idx in flat:
        slot, var = divmod(int(idx), v)
        if perm[var] < 0 and not used[slot]:
            perm[var] = slot
            used[slot] = True
    return perm


def structural_seed(A_n, A_s, affinity: np.ndarray, sigma_e: float) -> np.ndarray:
    """Sequential seeding scored by vertex affinity times mean edge affinity
    to the variables already placed."""
    v = affinity.shape[0]
    perm = np.full(v, -1)
    free = np.ones(v, dtype=bool)
    placed: list[int] = []
    order = np.argsort(-A_s.sum(axis=1), kind="stable")
    for var in order:
        score = affinity[:, var].copy()
        if placed:
            slots = perm[placed]
            e = np.exp(-np.square(A_n[:, slots] - A_s[var, placed][None, :]) / (2 * sigma_e**2))
            score = score * e.mean(axis=1)
        score[~free] = -np.inf
        slot = int(np.argmax(score))
        perm[var] = slot
        free[slot] = False
        placed.append(int(var))
    return perm


def solve_mapping(nsg: WeightedGraph, ssg: WeightedGraph, cfg: MappingConfig | None = None) -> Mapping:
    """Best permutation from greedy, structural, identity and random starts,
    each refined by 2-opt."""
    cfg = cfg or MappingConfig()
    if nsg.v != ssg.v:
        raise ValueError("graphs differ in vertex count")
    if cfg.solver == "exhaustive":
        return exhaustive_mapping(nsg, ssg)
    A_n = rescaled_nsg(nsg)
    A_s = ssg.adjacency
    aff = vertex_affinity(nsg, ssg, cfg.sigma_n)
    rng = np.random.default_rng(cfg.seed)
    starts = [greedy_seed(aff), structural_seed(A_n, A_s, aff, cfg.sigma_e), np.arange(nsg.v)]
    starts += [rng.permutation(nsg.v) for _ in range(cfg.restarts)]
    best, best_obj = None, math.inf
    for start in starts:
        p = two_opt(A_n, A_s, start)
        obj = qap_objective(A_n, A_s, p)
        if obj < best_obj - 1e-12:
            best, best_obj = p, obj
    return Mapping(best, best_obj)


def exhaustive_mapping(nsg: WeightedGraph, ssg: WeightedGraph) -> Mapping:
    """Global minimiser by enumeration; ties go to the lexicographically
    smallest permutation."""
    v = nsg.v
    if v > EXHAUSTIVE_MAX_V:
        raise ValueError(f"exhaustive search limited to v <= {EXHAUSTIVE_MAX_V}, got {v}")
    if v != ssg.v:
        raise ValueError("graphs differ in vertex count")
    if v == 1:
        return Mapping(np.zeros(1, dtype=int), 0.0)
    return exhaustive_qap(rescaled_nsg(nsg), ssg.adjacency)


def exhaustive_qap(A_n, A_s) -> Mapping:
    A_n = np.asarray(A_n, dtype=float)
    A_s = np.asarray(A_s, dtype=float)
    v = A_n.shape[0]
    if v > EXHAUSTIVE_MAX_V:
        raise ValueError(f"exhaustive search limited to v <= {EXHAUSTIVE_MAX_V}, got {v}")
    best, best_obj = None, math.inf
    perms = itertools.permutations(range(v))
    chunk = 20000
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.intp)
        if block.size == 0:
            break
        sub = A_n[block[:, :, None], block[:, None, :]]
        obj = ((sub - A_s[None]) ** 2).sum(axis=(1, 2))
        i = int(np.argmin(obj))  # first minimum = lexicographically smallest
        if obj[i] < best_obj:
            best, best_obj = block[i].copy(), float(obj[i])
    return Mapping(best, best_obj)


def random_mapping(v: int, seed) -> Mapping:
    return Mapping(np.random.default_rng(seed).permutation(v))


def write_mapping(mapping: Mapping, coords, path, variable_names=None, neuron_ids=None) -> None:
    """CSV ``variable,input_neuron_id,x,y,z``, one row per variable."""
    coords = np.asarray(coords)
    names = variable_names or [str(j) for j in range(mapping.v)]
    ids = neuron_ids if neuron_ids is not None else list(range(mapping.v))
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "input_neuron_id", "x", "y", "z"])
        for j, slot in enumerate(mapping.permutation):
            x, y, z = (float(c) for c in coords[slot])
            w.writerow([names[j], int(ids[slot]), repr(x), repr(y), repr(z)])
    os.replace(tmp, path)
