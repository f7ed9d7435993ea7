"""deSNN output layer: rank-order weights with drift, weighted-kNN recall.

One output neuron is created per training sample. Its weight to cube
neuron ``n`` starts at ``mod ** rank(n)``, where ``rank`` orders neurons by
first spike (ties by index). Afterwards every tick moves the weight by
``drift * mod ** rank(n) / t``: up when ``n`` spikes, down (floored at 0)
when it stays silent.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

EPS = 1e-9


@dataclass(frozen=True)
class DesnnParams:
    mod: float = 0.95
    drift: float = 0.25
    k: int = 3

    def __post_init__(self):
        if not 0.0 < self.mod < 1.0:
            raise ValueError("mod must be in (0, 1)")
        if self.drift < 0:
            raise ValueError("drift must be >= 0")
        if int(self.k) < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class OutputNeuron:
    weights: np.ndarray
    label: int
    sample_id: str = ""


def rank_order(fired: np.ndarray) -> np.ndarray:
    """0-based first-spike rank per neuron, -1 for neurons that never fire."""
    fired = np.asarray(fired, dtype=bool)
    t, n = fired.shape
    has = fired.any(axis=0)
    first = np.where(has, fired.argmax(axis=0), t)
    order = np.lexsort((np.arange(n), first))
    rank = np.full(n, -1)
    spiking = order[: int(has.sum())]
    rank[spiking] = np.arange(spiking.size)
    return rank


def desnn_weights(fired, mod: float, drift: float) -> np.ndarray:
    fired = np.asarray(getattr(fired, "fired", fired), dtype=bool)
    t, n = fired.shape
    rank = rank_order(fired)
    w = np.zeros(n)
    active = rank >= 0
    if not active.any():
        return w
    base = np.zeros(n)
    base[active] = mod ** rank[active].astype(float)
    w[:] = base
    if drift == 0:
        return w
    quantum = drift * base / t
    first = np.where(active, fired.argmax(axis=0), t)
    live = active & (np.arange(t)[:, None] > first)
    steps = np.where(fired, quantum, -quantum) * live
    # a walk floored at 0 equals the free walk minus its running deficit
    walk = base + np.cumsum(steps, axis=0)
    floor = np.minimum(np.minimum.accumulate(walk, axis=0), 0.0)
    return np.maximum(walk[-1] - floor[-1], 0.0)


def _vote(dist: np.ndarray, labels: np.ndarray, k: int, class_count: int):
    k = min(k, dist.size)
    nearest = np.argsort(dist, kind="stable")[:k]
    scores = np.zeros(class_count)
    np.add.at(scores, labels[nearest], 1.0 / (dist[nearest] + EPS))
    return int(np.argmax(scores)), scores


def _clamp_k(k: int, n: int) -> int:
    if k > n:
        log.warning("k=%d exceeds %d training samples; using k=%d", k, n, n)
        return n
    return k


class DesnnClassifier:
    def __init__(self, neurons: list[OutputNeuron], params: DesnnParams, class_count: int | None = None):
        if not neurons:
            raise ValueError("classifier needs at least one output neuron")
        self.neurons = list(neurons)
        self.params = params
        self.labels = np.array([o.label for o in self.neurons], dtype=int)
        self.matrix = np.stack([o.weights for o in self.neurons])
        self.class_count = int(class_count if class_count is not None else self.labels.max() + 1)

    @property
    def n_inputs(self) -> int:
        return self.matrix.shape[1]

    def recall_weights(self, record) -> np.ndarray:
        return desnn_weights(record, self.params.mod, self.params.drift)

    def to_dict(self) -> dict:
        out = []
        for o in self.neurons:
            nz = np.flatnonzero(o.weights)
            out.append({
                "label": o.label,
                "sample_id": o.sample_id,
                "indices": nz.tolist(),
                "weights": o.weights[nz].tolist(),
            })
        return {
            "params": asdict(self.params),
            "class_count": self.class_count,
            "n_inputs": self.n_inputs,
            "output_neurons": out,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DesnnClassifier":
        n = doc["n_inputs"]
        neurons = []
        for o in doc["output_neurons"]:
            w = np.zeros(n)
            w[np.asarray(o["indices"], dtype=int)] = o["weights"]
            neurons.append(OutputNeuron(w, int(o["label"]), o.get("sample_id", "")))
        return cls(neurons, DesnnParams(**doc["params"]), doc["class_count"])


def train_desnn(records, labels, params: DesnnParams, sample_ids=None, class_count=None) -> DesnnClassifier:
    labels = np.asarray(labels, dtype=int)
    if len(records) == 0 or len(records) != labels.size:
        raise ValueError("records must be non-empty and aligned with labels")
    ids = sample_ids or [str(i) for i in range(len(records))]
    neurons = []
    for rec, lab, sid in zip(records, labels, ids):
        w = desnn_weights(rec, params.mod, params.drift)
        if not w.any():
            log.warning("sample %s produced no spikes; its output neuron has all-zero weights", sid)
        neurons.append(OutputNeuron(w, int(lab), sid))
    return DesnnClassifier(neurons, params, class_count)


def classify(classifier: DesnnClassifier, record, params: DesnnParams | None = None):
    """Label and per-class scores of one recall record."""
    params = params or classifier.params
    w = desnn_weights(record, params.mod, params.drift)
    if w.size != classifier.n_inputs:
        raise ValueError(f"record has {w.size} neurons, classifier expects {classifier.n_inputs}")
    dist = np.sqrt(((classifier.matrix - w) ** 2).sum(axis=1))
    k = _clamp_k(params.k, dist.size)
    return _vote(dist, classifier.labels, k, classifier.class_count)


def baseline_wknn(train_X, train_y, test_X, k: int, class_count: int | None = None) -> np.ndarray:
    """Weighted kNN on static vectors with the same voting rule as :func:`classify`."""
    train_X = np.asarray(train_X, dtype=float)
    test_X = np.atleast_2d(np.asarray(test_X, dtype=float))
    train_y = np.asarray(train_y, dtype=int)
    if train_X.shape[1] != test_X.shape[1]:
        raise ValueError("train and test vectors differ in length")
    C = int(class_count if class_count is not None else train_y.max() + 1)
    k = _clamp_k(k, len(train_X))
    D = cdist(test_X, train_X)
    return np.array([_vote(d, train_y, k, C)[0] for d in D], dtype=int)


def save_classifier(clf: DesnnClassifier, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(clf.to_dict(), fh)
    os.replace(tmp, path)


def load_classifier(path) -> DesnnClassifier:
    with open(path) as fh:
        return DesnnClassifier.from_dict(json.load(fh))
