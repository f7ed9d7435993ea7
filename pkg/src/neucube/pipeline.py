"""End-to-end model: encode, map, train the cube, train the readout, recall."""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace

import numpy as np

from .dataset import SampleSet, truncate
from .encoding import EncodingConfig, SpikeRaster, encode_set
from .mapping import (
    Mapping,
    MappingConfig,
    build_nsg,
    build_ssg,
    qap_objective,
    random_mapping,
    rescaled_nsg,
    solve_mapping,
)
from .readout import DesnnClassifier, DesnnParams, classify, load_classifier, save_classifier, train_desnn
from .reservoir import Cube, CubeConfig, LIFParams, build_cube, load_cube, recall, save_cube, train_unsupervised
from .similarity import COINCIDENCE, KernelConfig, SimilarityMatrix, similarity_matrix

MAPPING_MODES = ("graph", "random")


def default_cube() -> CubeConfig:
    # the sparse module-level wiring leaves a 6x6x6 cube silent beyond its
    # input neurons; dense local wiring lets activity spread a few hops
    return CubeConfig(connection_prob=1.0)


@dataclass(frozen=True)
class PipelineConfig:
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    similarity: str = COINCIDENCE
    bandwidth: float | None = None
    tau_max: int | None = None
    mapping: MappingConfig = field(default_factory=MappingConfig)
    mapping_mode: str = "graph"
    cube: CubeConfig = field(default_factory=default_cube)
    lif: LIFParams = field(default_factory=LIFParams)
    stdp_rate: float = 0.01
    epochs: int = 1
    desnn: DesnnParams = field(default_factory=DesnnParams)

    def __post_init__(self):
        if self.mapping_mode not in MAPPING_MODES:
            raise ValueError(f"mapping_mode must be one of {MAPPING_MODES}")
        if self.stdp_rate < 0:
            raise ValueError("stdp_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        return _from_dict(cls, doc)


_NESTED = {
    "encoding": EncodingConfig,
    "mapping": MappingConfig,
    "cube": CubeConfig,
    "lif": LIFParams,
    "desnn": DesnnParams,
}


def _from_dict(cls, doc: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        sub = _NESTED.get(key) if cls is PipelineConfig else None
        if sub is not None and isinstance(value, dict):
            value = _from_dict(sub, value)
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def with_overrides(config, **changes):
    """``dataclasses.replace`` that understands ``section__field`` keys."""
    top, nested = {}, {}
    for key, value in changes.items():
        if "__" in key:
            section, name = key.split("__", 1)
            nested.setdefault(section, {})[name] = value
        else:
            top[key] = value
    for section, values in nested.items():
        current = getattr(config, section)
        if not is_dataclass(current):
            raise ValueError(f"{section!r} is not a config section")
        top[section] = replace(current, **values)
    return replace(config, **top)


class NeuCube:
    """Two-stage model: unsupervised STDP in the cube, then a deSNN readout."""

    def __init__(self, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self.cube: Cube | None = None
        self.mapping: Mapping | None = None
        self.similarity: SimilarityMatrix | None = None
        self.classifier: DesnnClassifier | None = None
        self.train_records = None
        self.timings: dict[str, float] = {}

    def encode(self, sample_set: SampleSet) -> SpikeRaster:
        return encode_set(sample_set, self.config.encoding)

    def compute_mapping(self, raster: SpikeRaster, cube: Cube, variable_names=()) -> Mapping:
        """Graph-matched (or, in random mode, random) placement; both report
        the matching objective of the chosen permutation."""
        cfg = self.config
        v = raster.v
        if v < 2:
            return Mapping(np.arange(v), 0.0)
        self.similarity = similarity_matrix(
            raster, cfg.similarity, KernelConfig(cfg.bandwidth), cfg.tau_max, variable_names
        )
        nsg = build_nsg(cube.input_coordinates(), min(cfg.mapping.k_nsg, v - 1))
        ssg = build_ssg(self.similarity, min(cfg.mapping.k_ssg, v - 1))
        if cfg.mapping_mode == "random":
            perm = random_mapping(v, cfg.mapping.seed).permutation
        elif not ssg.adjacency.any():
            perm = np.arange(v)
        else:
            return solve_mapping(nsg, ssg, cfg.mapping)
        return Mapping(perm, qap_objective(rescaled_nsg(nsg), ssg.adjacency, perm))

    def fit(self, sample_set: SampleSet) -> "NeuCube":
        cfg = self.config
        t0 = time.perf_counter()
        raster = self.encode(sample_set)
        cube = build_cube(cfg.cube, cfg.lif, sample_set.v)
        t1 = time.perf_counter()
        self.mapping = self.compute_mapping(raster, cube, sample_set.variable_names)
        cube.assign_mapping(self.mapping)
        t2 = time.perf_counter()
        train_unsupervised(cube, raster, cfg.stdp_rate, cfg.epochs)
        t3 = time.perf_counter()
        self.train_records = recall(cube, raster)
        self.classifier = train_desnn(
            self.train_records, sample_set.labels, cfg.desnn, sample_set.ids, sample_set.class_count
        )
        self.cube = cube
        self.timings = {"encode": t1 - t0, "map": t2 - t1, "stdp": t3 - t2, "readout": time.perf_counter() - t3}
        return self

    def records(self, sample_set: SampleSet):
        if self.cube is None:
            raise RuntimeError("model is not fitted")
        return recall(self.cube, self.encode(sample_set))

    def predict(self, sample_set: SampleSet, records=None) -> np.ndarray:
        records = records if records is not None else self.records(sample_set)
        return np.array([classify(self.classifier, r)[0] for r in records], dtype=int)

    def score(self, sample_set: SampleSet) -> float:
        return float(np.mean(self.predict(sample_set) == sample_set.labels))

    def early_scores(self, sample_set: SampleSet, fractions=(1.0, 0.75, 0.5)) -> dict[float, float]:
        """Accuracy on prefixes of ``sample_set`` for each fraction of its length."""
        return {float(f): self.score(truncate(sample_set, f)) for f in fractions}

    def save(self, directory) -> None:
        """Write ``pipeline.json``, ``cube.json`` and ``model.json`` into ``directory``."""
        if self.cube is None:
            raise RuntimeError("model is not fitted")
        os.makedirs(directory, exist_ok=True)
        _write_json(self.config.to_dict(), os.path.join(directory, "pipeline.json"))
        save_cube(self.cube, os.path.join(directory, "cube.json"))
        save_classifier(self.classifier, os.path.join(directory, "model.json"))

    @classmethod
    def load(cls, directory) -> "NeuCube":
        with open(os.path.join(directory, "pipeline.json")) as fh:
            model = cls(PipelineConfig.from_dict(json.load(fh)))
        model.cube = load_cube(os.path.join(directory, "cube.json"))
        model.classifier = load_classifier(os.path.join(directory, "model.json"))
        model.mapping = Mapping(model.cube.mapping)
        return model


def _write_json(doc, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2)
    os.replace(tmp, path)


def stratified_folds(labels, folds: int, seed) -> list[np.ndarray]:
    """Deterministic stratified split into ``folds`` index arrays."""
    labels = np.asarray(labels, dtype=int)
    if np.unique(labels).size < 2:
        raise ValueError("stratified folds need at least 2 classes")
    rng = np.random.default_rng(seed)
    out = [[] for _ in range(folds)]
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < folds:
            raise ValueError(f"class {c} has {idx.size} samples, fewer than {folds} folds")
        idx = rng.permutation(idx)
        for i, n in enumerate(idx):
            out[(i + offset) % folds].append(int(n))
        offset += idx.size
    return [np.array(sorted(f), dtype=int) for f in out]


def confusion_counts(truth, predicted, class_count: int) -> np.ndarray:
    m = np.zeros((class_count, class_count), dtype=int)
    np.add.at(m, (np.asarray(truth, dtype=int), np.asarray(predicted, dtype=int)), 1)
    return m
