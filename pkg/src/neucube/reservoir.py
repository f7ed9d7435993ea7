"""The 3D spiking reservoir: lattice wiring, LIF dynamics and STDP."""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse

PLASTIC = "plastic"
FROZEN = "frozen"

INPUT_GAIN = 1.1  # input spikes inject this multiple of the firing threshold
STDP_WINDOW = 10


@dataclass(frozen=True)
class CubeConfig:
    n_x: int = 6
    n_y: int = 6
    n_z: int = 6
    connection_radius: float = 3.0
    connection_prob: float = 0.15
    inhibitory_fraction: float = 0.2
    init_weight_scale: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if min(self.n_x, self.n_y, self.n_z) < 2:
            raise ValueError("each cube side needs at least 2 neurons")
        if not 0.0 <= self.connection_prob <= 1.0:
            raise ValueError("connection_prob must be in [0, 1]")
        if not 0.0 <= self.inhibitory_fraction < 1.0:
            raise ValueError("inhibitory_fraction must be in [0, 1)")
        if self.init_weight_scale <= 0:
            raise ValueError("init_weight_scale must be > 0")

    @property
    def n_neurons(self) -> int:
        return self.n_x * self.n_y * self.n_z


@dataclass(frozen=True)
class LIFParams:
    firing_threshold: float = 0.12
    leak: float = 0.1
    refractory_ticks: int = 3

    def __post_init__(self):
        if self.firing_threshold <= 0:
            raise ValueError("firing_threshold must be > 0")
        if not 0.0 <= self.leak < 1.0:
            raise ValueError("leak must be in [0, 1)")
        if int(self.refractory_ticks) < 1:
            raise ValueError("refractory_ticks must be >= 1")
        object.__setattr__(self, "refractory_ticks", int(self.refractory_ticks))


class Cube:
    """Neuron lattice with a directed synapse list.

    ``pre[e] -> post[e]`` carries ``weights[e]`` (negative = inhibitory).
    ``input_ids`` are the input-neuron slots; once a mapping is assigned,
    variable ``j`` drives neuron ``input_ids[mapping[j]]``.
    """

    def __init__(self, positions, pre, post, weights, input_ids, lif: LIFParams | None = None, mapping=None):
        self.positions = np.asarray(positions, dtype=int).reshape(-1, 3)
        self.pre = np.asarray(pre, dtype=np.intp).reshape(-1)
        self.post = np.asarray(post, dtype=np.intp).reshape(-1)
        self.weights = np.asarray(weights, dtype=float).reshape(-1).copy()
        self.input_ids = np.asarray(input_ids, dtype=np.intp).reshape(-1)
        self.lif = lif or LIFParams()
        n = self.n_neurons
        if not (self.pre.shape == self.post.shape == self.weights.shape):
            raise ValueError("synapse arrays differ in length")
        if np.any(self.pre == self.post):
            raise ValueError("self-synapses are not allowed")
        if self.pre.size and (self.pre.max() >= n or self.post.max() >= n or min(self.pre.min(), self.post.min()) < 0):
            raise ValueError("synapse endpoint out of range")
        if len(set(self.input_ids.tolist())) != self.input_ids.size:
            raise ValueError("input neurons must be distinct")
        self.transmitted = np.zeros(self.pre.size, dtype=np.int64)
        self.potential = np.zeros(n)
        self.refractory = np.zeros(n, dtype=int)
        self.mapping = None
        if mapping is not None:
            self.assign_mapping(mapping)

    @property
    def n_neurons(self) -> int:
        return self.positions.shape[0]

    @property
    def n_synapses(self) -> int:
        return self.pre.size

    def assign_mapping(self, mapping) -> None:
        perm = np.asarray(getattr(mapping, "permutation", mapping), dtype=np.intp)
        if sorted(perm.tolist()) != list(range(self.input_ids.size)):
            raise ValueError("mapping must be a permutation of the input slots")
        self.mapping = perm

    @property
    def variable_neurons(self) -> np.ndarray:
        """Cube neuron driven by each variable."""
        if self.mapping is None:
            raise ValueError("no mapping assigned to the cube")
        return self.input_ids[self.mapping]

    def input_coordinates(self) -> np.ndarray:
        return self.positions[self.input_ids].astype(float)

    def reset_state(self) -> None:
        self.potential[:] = 0.0
        self.refractory[:] = 0

    def copy(self) -> "Cube":
        c = Cube(self.positions, self.pre, self.post, self.weights, self.input_ids, self.lif, self.mapping)
        c.transmitted = self.transmitted.copy()
        return c

    def with_lif(self, lif: LIFParams) -> "Cube":
        c = self.copy()
        c.lif = lif
        return c

    def to_dict(self) -> dict:
        return {
            "positions": self.positions.tolist(),
            "input_ids": self.input_ids.tolist(),
            "mapping": None if self.mapping is None else self.mapping.tolist(),
            "lif": asdict(self.lif),
            "synapses": [
                {"pre": int(a), "post": int(b), "weight": float(w)}
                for a, b, w in zip(self.pre, self.post, self.weights)
            ],
            "transmitted": self.transmitted.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Cube":
        syn = doc.get("synapses", [])
        cube = cls(
            np.array(doc["positions"], dtype=int).reshape(-1, 3),
            [s["pre"] for s in syn],
            [s["post"] for s in syn],
            [s["weight"] for s in syn],
            doc["input_ids"],
            LIFParams(**doc["lif"]),
            doc.get("mapping"),
        )
        if doc.get("transmitted") is not None:
            counts = np.asarray(doc["transmitted"], dtype=np.int64)
            if counts.shape != cube.pre.shape:
                raise ValueError("transmitted counters do not match the synapse list")
            cube.transmitted = counts
        return cube


def save_cube(cube: Cube, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(cube.to_dict(), fh)
    os.replace(tmp, path)


def load_cube(path) -> Cube:
    with open(path) as fh:
        return Cube.from_dict(json.load(fh))


def lattice_positions(n_x: int, n_y: int, n_z: int) -> np.ndarray:
    """Lattice points in ascending (x, y, z) order."""
    return np.array(list(itertools.product(range(n_x), range(n_y), range(n_z))), dtype=int)


def connection_probabilities(positions: np.ndarray, radius: float, prob: float):
    """Candidate ordered pairs within ``radius`` and their wiring probability."""
    P = positions.astype(float)
    d2 = ((P[:, None, :] - P[None, :, :]) ** 2).sum(-1)
    ok = (d2 <= radius * radius + 1e-9) & ~np.eye(len(P), dtype=bool)
    pre, post = np.nonzero(ok)
    return pre, post, prob * np.exp(-d2[pre, post])


def _choose_inputs(positions: np.ndarray, v: int, rng: np.random.Generator) -> np.ndarray:
    n = len(positions)
    chosen: list[int] = []
    available = np.ones(n, dtype=bool)
    P = positions.astype(float)
    for _ in range(v):
        free = np.flatnonzero(available)
        if chosen:
            d = np.sqrt(((P[free, None, :] - P[None, chosen, :]) ** 2).sum(-1)).min(axis=1)
            spaced = free[d >= 2.0]
            if spaced.size:
                free = spaced
        pick = int(rng.choice(free))
        chosen.append(pick)
        available[pick] = False
    return np.array(chosen, dtype=np.intp)


def build_cube(cfg: CubeConfig, lif: LIFParams, v: int) -> Cube:
    n = cfg.n_neurons
    if v > n:
        raise ValueError(f"{v} variables do not fit into {n} neurons")
    rng = np.random.default_rng(cfg.seed)
    positions = lattice_positions(cfg.n_x, cfg.n_y, cfg.n_z)
    pre, post, p = connection_probabilities(positions, cfg.connection_radius, cfg.connection_prob)
    keep = rng.random(p.size) < p
    pre, post = pre[keep], post[keep]
    weights = cfg.init_weight_scale * (1.0 - rng.random(pre.size))
    weights[rng.random(pre.size) < cfg.inhibitory_fraction] *= -1.0
    inputs = _choose_inputs(positions, v, rng)
    return Cube(positions, pre, post, weights, inputs, lif)


@dataclass(frozen=True)
class FiringRecord:
    """Boolean ``(t, N)`` firing matrix plus per-synapse emitted-spike counts."""

    fired: np.ndarray
    transmitted: np.ndarray
    pre: np.ndarray
    post: np.ndarray

    @property
    def t(self) -> int:
        return self.fired.shape[0]

    @property
    def n_neurons(self) -> int:
        return self.fired.shape[1]

    @property
    def sparsity(self) -> float:
        return float(self.fired.sum()) / self.fired.size

    def spike_list(self) -> tuple[np.ndarray, np.ndarray]:
        return np.nonzero(self.fired)


def simulate(cube: Cube, row, mode: str = FROZEN, stdp_rate: float = 0.01, window: int = STDP_WINDOW) -> FiringRecord:
    """Run one sample through the cube, tick by tick.

    Each tick: mapped input neurons receive ``+/-1.1 * threshold`` per input
    spike; every neuron adds the weighted spikes emitted on the previous
    tick to its leaked potential, and fires above threshold unless
    refractory (refractory neurons are held at 0). In plastic mode a
    post-synaptic spike potentiates each incoming synapse whose source fired
    ``dt`` ticks earlier (``dt <= window``) by ``rate * exp(-dt/window)``; a
    pre-synaptic spike depresses the outgoing synapse the same way when the
    target fired earlier. Weights stay in ``[-1, 1]``.
    """
    if mode not in (PLASTIC, FROZEN):
        raise ValueError(f"mode must be {PLASTIC!r} or {FROZEN!r}")
    drive_ids = cube.variable_neurons
    row = np.asarray(row)
    if row.ndim != 2 or row.shape[1] != drive_ids.size:
        raise ValueError(f"expected a (t, {drive_ids.size}) spike matrix, got {row.shape}")
    t_len = row.shape[0]
    n = cube.n_neurons
    lif = cube.lif
    thr = lif.firing_threshold
    decay = 1.0 - lif.leak
    pre, post = cube.pre, cube.post
    w = cube.weights
    plastic = mode == PLASTIC

    cube.reset_state()
    v_mem = cube.potential
    refr = cube.refractory
    fired = np.zeros((t_len, n), dtype=bool)
    transmitted = np.zeros(pre.size, dtype=np.int64)
    last = np.full(n, -(10**9), dtype=np.int64)
    prev = np.zeros(n, dtype=bool)
    inject = INPUT_GAIN * thr * row.astype(float)

    for tick in range(t_len):
        v_mem *= decay
        if pre.size and prev.any():
            v_mem += np.bincount(post, weights=w * prev[pre], minlength=n)
        v_mem[drive_ids] += inject[tick]  # input ids are distinct
        blocked = refr > 0
        v_mem[blocked] = 0.0
        refr[blocked] -= 1
        fire = (v_mem > thr) & ~blocked
        v_mem[fire] = 0.0
        refr[fire] = lif.refractory_ticks
        fired[tick] = fire
        if fire.any():
            out = fire[pre]
            transmitted += out
            if plastic and pre.size:
                inc = fire[post]
                dt = tick - last[pre[inc]]
                ok = (dt > 0) & (dt <= window)
                idx = np.flatnonzero(inc)[ok]
                w[idx] += stdp_rate * np.exp(-dt[ok] / window)
                dt = tick - last[post[out]]
                ok = (dt > 0) & (dt <= window)
                idx = np.flatnonzero(out)[ok]
                w[idx] -= stdp_rate * np.exp(-dt[ok] / window)
                np.clip(w, -1.0, 1.0, out=w)
            last[fire] = tick
        prev = fire

    cube.transmitted += transmitted
    return FiringRecord(fired, transmitted, pre.copy(), post.copy())


def _spike_rows(raster) -> np.ndarray:
    """``(s, t, v)`` spike array from a raster or an array-like."""
    return np.asarray(raster if isinstance(raster, np.ndarray) else getattr(raster, "data", raster))


def train_unsupervised(cube: Cube, raster, stdp_rate: float, epochs: int = 1):
    """Plastic passes over every sample in dataset order.

    Membrane state resets per sample, weights carry over. Returns the cube
    (trained in place) and the records of the final epoch.
    """
    data = _spike_rows(raster)
    records = []
    for _ in range(epochs):
        records = [simulate(cube, data[n], PLASTIC, stdp_rate) for n in range(len(data))]
    return cube, records


def recall(cube: Cube, raster) -> list[FiringRecord]:
    """Frozen-weight simulation of every sample."""
    data = _spike_rows(raster)
    return [simulate(cube, data[n], FROZEN) for n in range(len(data))]


def spike_flow(source) -> sparse.csr_array:
    """Symmetric ``N x N`` matrix of spikes exchanged between neuron pairs.

    ``source`` is a :class:`Cube` (its cumulative counters), one
    :class:`FiringRecord`, or a sequence of records.
    """
    if isinstance(source, Cube):
        items = [(source.pre, source.post, source.transmitted, source.n_neurons)]
    else:
        recs = [source] if isinstance(source, FiringRecord) else list(source)
        if not recs:
            raise ValueError("need at least one firing record")
        items = [(r.pre, r.post, r.transmitted, r.n_neurons) for r in recs]
    n = items[0][3]
    rows, cols, vals = [], [], []
    for pre, post, count, _ in items:
        rows += [pre, post]
        cols += [post, pre]
        vals += [count, count]
    A = sparse.coo_array(
        (np.concatenate(vals).astype(float), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    A.eliminate_zeros()
    return A
