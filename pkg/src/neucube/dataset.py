"""Multivariate temporal sample sets: CSV ingestion, synthetic generation,
prefix truncation and the static-vector view used by the baseline.

Values are stored time-major, one ``(t, v)`` matrix per sample.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FILL_POLICIES = ("hold-last", "linear-interpolate", "reject")


class DataError(ValueError):
    """Raised when input data violates the sample-set contract."""


@dataclass(frozen=True)
class TemporalSample:
    values: np.ndarray
    label: int
    id: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"sample {self.id!r}: values must be a (t, v) matrix")
        if values.shape[0] < 2 or values.shape[1] < 1:
            raise DataError(f"sample {self.id!r}: need t >= 2 and v >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError(f"sample {self.id!r}: missing or non-finite values")
        if int(self.label) < 0:
            raise DataError(f"sample {self.id!r}: negative label")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "id", str(self.id))

    @property
    def t(self) -> int:
        return self.values.shape[0]

    @property
    def v(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SampleSet:
    """An ordered, immutable collection of equally shaped samples.

    ``class_names`` keeps the textual labels seen in a source file so that
    :func:`write_samples` reproduces them; it defaults to ``"0", "1", ...``.
    """

    samples: tuple[TemporalSample, ...]
    variable_names: tuple[str, ...]
    class_count: int
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        samples = tuple(self.samples)
        names = tuple(str(n) for n in self.variable_names)
        if not samples:
            raise DataError("empty sample set")
        t, v = samples[0].values.shape
        for s in samples:
            if s.values.shape[0] != t:
                raise DataError(f"ragged sample {s.id!r}: {s.values.shape[0]} ticks, expected {t}")
            if s.values.shape[1] != v:
                raise DataError(f"sample {s.id!r}: {s.values.shape[1]} variables, expected {v}")
        if len(names) != v:
            raise DataError(f"{len(names)} variable names for {v} variables")
        if self.class_count < 2:
            raise DataError("class_count must be >= 2")
        bad = [s.id for s in samples if s.label >= self.class_count]
        if bad:
            raise DataError(f"label >= class_count in samples {bad}")
        class_names = tuple(self.class_names) or tuple(str(c) for c in range(self.class_count))
        if len(class_names) != self.class_count:
            raise DataError("class_names must have class_count entries")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "variable_names", names)
        object.__setattr__(self, "class_names", class_names)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def t(self) -> int:
        return self.samples[0].t

    @property
    def v(self) -> int:
        return self.samples[0].v

    @property
    def s(self) -> int:
        return len(self.samples)

    @property
    def values(self) -> np.ndarray:
        """Stacked ``(s, t, v)`` array (a fresh copy)."""
        return np.stack([s.values for s in self.samples])

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def subset(self, indices: Sequence[int]) -> "SampleSet":
        """Samples at ``indices``, keeping the parent's class vocabulary."""
        return SampleSet(
            tuple(self.samples[i] for i in indices),
            self.variable_names,
            self.class_count,
            self.class_names,
        )

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.variable_names == other.variable_names
            and self.class_count == other.class_count
            and self.class_names == other.class_names
            and self.ids == other.ids
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def from_arrays(values, labels, ids=None, variable_names=None, class_count=None) -> SampleSet:
    """Build a :class:`SampleSet` from an ``(s, t, v)`` array and labels."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 3:
        raise DataError("values must have shape (s, t, v)")
    labels = np.asarray(labels, dtype=int)
    if ids is None:
        ids = [f"s{i}" for i in range(len(values))]
    if variable_names is None:
        variable_names = [f"x{j}" for j in range(values.shape[2])]
    if class_count is None:
        class_count = max(int(labels.max()) + 1, 2)
    samples = tuple(TemporalSample(values[i], int(labels[i]), ids[i]) for i in range(len(values)))
    return SampleSet(samples, tuple(variable_names), int(class_count))


# ---------------------------------------------------------------- CSV I/O


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a long-format sample file."""

    id_column: str = "sample_id"
    tick_column: str = "tick"
    label_column: str = "label"
    variables: tuple[str, ...] | None = None
    fill: str = "hold-last"


def _fill_missing(column: np.ndarray, policy: str, sample_id: str, name: str) -> np.ndarray:
    missing = np.isnan(column)
    if not missing.any():
        return column
    if policy == "reject":
        tick = int(np.flatnonzero(missing)[0])
        raise DataError(f"sample {sample_id!r}, variable {name!r}: missing value at tick {tick}")
    if missing.all():
        raise DataError(f"sample {sample_id!r}, variable {name!r}: no observed values")
    known = np.flatnonzero(~missing)
    if policy == "linear-interpolate":
        return np.interp(np.arange(len(column)), known, column[known])
    # hold-last; a leading gap takes the first observed value
    out = column.copy()
    last = column[known[0]]
    for i in range(len(out)):
        if missing[i]:
            out[i] = last
        else:
            last = out[i]
    return out


def load_samples(path, schema: CsvSchema | None = None) -> SampleSet:
    """Read a long-format CSV (``sample_id,tick,<vars...>,label``).

    Sample order follows first appearance in the file. Empty cells are
    resolved by ``schema.fill``. Labels that are already the dense integers
    ``0..C-1`` are kept; anything else is dictionary-encoded in order of
    first appearance.
    """
    schema = schema or CsvSchema()
    if schema.fill not in FILL_POLICIES:
        raise DataError(f"unknown fill policy {schema.fill!r}; choose from {FILL_POLICIES}")
    if not os.path.exists(path):
        raise DataError(f"{path}: no such file")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)

    for col in (schema.id_column, schema.tick_column):
        if col not in header:
            raise DataError(f"{path}: missing column {col!r}")
    if schema.label_column not in header:
        raise DataError(f"{path}: unknown label column {schema.label_column!r}")
    reserved = {schema.id_column, schema.tick_column, schema.label_column}
    if schema.variables is None:
        variables = [h for h in header if h not in reserved]
    else:
        variables = list(schema.variables)
        absent = [name for name in variables if name not in header]
        if absent:
            raise DataError(f"{path}: declared variables not in header: {absent}")
    if not variables:
        raise DataError(f"{path}: no variable columns")
    id_col = header.index(schema.id_column)
    tick_col = header.index(schema.tick_column)
    label_col = header.index(schema.label_column)
    var_cols = [header.index(name) for name in variables]

    order: list[str] = []
    ticks: dict[str, list[int]] = {}
    cells: dict[str, list[list[float]]] = {}
    raw_labels: dict[str, str] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
        sid = row[id_col].strip()
        try:
            tick = int(row[tick_col])
        except ValueError:
            raise DataError(f"{path}: row {lineno}, column {schema.tick_column!r}: non-integer tick {row[tick_col]!r}") from None
        label = row[label_col].strip()
        if sid not in ticks:
            order.append(sid)
            ticks[sid], cells[sid] = [], []
            raw_labels[sid] = label
        elif raw_labels[sid] != label:
            raise DataError(f"{path}: row {lineno}: label changes within sample {sid!r}")
        vals = []
        for name, c in zip(variables, var_cols):
            text = row[c].strip()
            if text == "":
                vals.append(math.nan)
                continue
            try:
                x = float(text)
            except ValueError:
                raise DataError(f"{path}: row {lineno}, column {name!r}: non-numeric cell {text!r}") from None
            if not math.isfinite(x):
                raise DataError(f"{path}: row {lineno}, column {name!r}: non-finite cell {text!r}")
            vals.append(x)
        ticks[sid].append(tick)
        cells[sid].append(vals)
    if not order:
        raise DataError(f"{path}: no samples")

    matrices = {}
    for sid in order:
        tk = np.array(ticks[sid])
        idx = np.argsort(tk, kind="stable")
        if not np.array_equal(tk[idx], np.arange(len(tk))):
            raise DataError(f"{path}: sample {sid!r}: ticks must be exactly 0..t-1")
        m = np.array(cells[sid], dtype=float)[idx]
        for j, name in enumerate(variables):
            m[:, j] = _fill_missing(m[:, j], schema.fill, sid, name)
        matrices[sid] = m
    t0 = matrices[order[0]].shape[0]
    for sid in order:
        if matrices[sid].shape[0] != t0:
            raise DataError(f"{path}: ragged sample {sid!r}: {matrices[sid].shape[0]} ticks, expected {t0}")

    distinct = list(dict.fromkeys(raw_labels[sid] for sid in order))
    try:
        as_int = sorted(int(x) for x in distinct)
        dense = as_int == list(range(len(distinct))) and all(str(int(x)) == x for x in distinct)
    except ValueError:
        dense = False
    if dense:
        class_names = tuple(str(c) for c in range(len(distinct)))
        encode = {x: int(x) for x in distinct}
    else:
        class_names = tuple(distinct)
        encode = {x: i for i, x in enumerate(distinct)}
    if len(distinct) < 2:
        raise DataError(f"{path}: need at least 2 classes, found {len(distinct)}")

    samples = tuple(TemporalSample(matrices[sid], encode[raw_labels[sid]], sid) for sid in order)
    return SampleSet(samples, tuple(variables), len(distinct), class_names)


def write_samples(sample_set: SampleSet, path) -> None:
    """Write ``sample_set`` in the layout read by :func:`load_samples`.

    Floats use ``repr`` so values survive a round trip exactly.
    """
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "tick", *sample_set.variable_names, "label"])
        for s in sample_set.samples:
            label = sample_set.class_names[s.label]
            for i, row in enumerate(s.values):
                w.writerow([s.id, i, *(repr(float(x)) for x in row), label])
    os.replace(tmp, path)


# ---------------------------------------------------------- transformations


def truncate(sample_set: SampleSet, fraction: float) -> SampleSet:
    """Keep the first ``floor(fraction * t)`` ticks of every sample."""
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"fraction must be in (0, 1], got {fraction}")
    keep = math.floor(fraction * sample_set.t + 1e-9)
    if keep < 2:
        raise DataError(f"fraction {fraction} leaves {keep} ticks; need at least 2")
    if keep == sample_set.t:
        return sample_set
    samples = tuple(TemporalSample(s.values[:keep], s.label, s.id) for s in sample_set.samples)
    return SampleSet(samples, sample_set.variable_names, sample_set.class_count, sample_set.class_names)


def concat_features(sample_set: SampleSet) -> tuple[np.ndarray, np.ndarray]:
    """Static ``(s, t*v)`` vectors: variable 0's whole series, then variable 1's, ...

    Element (variable j, tick i) lands at position ``j*t + i``.
    """
    X = sample_set.values.transpose(0, 2, 1).reshape(sample_set.s, -1)
    return X, sample_set.labels


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator for correlated-group temporal data.

    Each group of variables follows one latent driver: a sum of
    ``components`` sinusoids. Frequencies are drawn once per group from
    ``freq_band`` (cycles per sample) and phases once per (class, group),
    so classes share spectra and amplitude but differ in timing. Every
    sample perturbs the phases by ``phase_jitter`` (radians, normal).
    Member ``r`` of a group is the driver delayed by
    ``r * class_lags[label]`` ticks.
    """

    v: int = 8
    t: int = 60
    samples_per_class: int = 20
    class_count: int = 2
    groups: tuple[tuple[int, ...], ...] | None = None
    freq_band: tuple[float, float] = (1.5, 4.0)
    components: int = 2
    amplitude: float = 1.0
    class_lags: tuple[float, ...] = (0.0, 3.0)
    noise_std: float = 0.2
    phase_jitter: float = 0.8
    seed: int = 0

    def resolved_groups(self) -> tuple[tuple[int, ...], ...]:
        if self.groups is not None:
            return tuple(tuple(int(j) for j in g) for g in self.groups)
        size = 2 if self.v >= 2 else 1
        return tuple(tuple(range(i, min(i + size, self.v))) for i in range(0, self.v, size))

    def validate(self) -> None:
        if self.noise_std < 0 or self.phase_jitter < 0:
            raise DataError("noise_std and phase_jitter must be >= 0")
        if self.v < 1 or self.t < 2:
            raise DataError("need v >= 1 and t >= 2")
        if self.samples_per_class < 2:
            raise DataError("samples_per_class must be >= 2")
        if self.class_count < 2:
            raise DataError("class_count must be >= 2")
        if len(self.class_lags) != self.class_count:
            raise DataError("class_lags needs one entry per class")
        groups = self.resolved_groups()
        if any(len(g) == 0 for g in groups):
            raise DataError("empty correlation group")
        flat = sorted(j for g in groups for j in g)
        if flat != list(range(self.v)):
            raise DataError("groups must partition the variables 0..v-1")
        lo, hi = self.freq_band
        if not 0 < lo <= hi:
            raise DataError("freq_band must satisfy 0 < low <= high")
        if self.components < 1 or self.amplitude <= 0:
            raise DataError("need components >= 1 and amplitude > 0")


def generate_synthetic(config: SyntheticConfig) -> SampleSet:
    config.validate()
    rng = np.random.default_rng(config.seed)
    groups = config.resolved_groups()
    ticks = np.arange(config.t, dtype=float)
    labels = np.repeat(np.arange(config.class_count), config.samples_per_class)
    values = np.empty((len(labels), config.t, config.v))
    lo, hi = config.freq_band
    k = config.components
    freqs = rng.uniform(lo, hi, (len(groups), k)) / config.t
    phases = rng.uniform(0.0, 2 * np.pi, (config.class_count, len(groups), k))
    amp = config.amplitude / np.sqrt(k)
    for n, label in enumerate(labels):
        for gi, g in enumerate(groups):
            ph = phases[label, gi] + rng.normal(0.0, config.phase_jitter, k)
            for r, j in enumerate(g):
                shifted = ticks - r * config.class_lags[label]
                angle = 2 * np.pi * freqs[gi, :, None] * shifted + ph[:, None]
                values[n, :, j] = amp * np.sin(angle).sum(0)
        if config.noise_std > 0:
            values[n] += rng.normal(0.0, config.noise_std, (config.t, config.v))
    ids = [f"s{n:03d}" for n in range(len(labels))]
    names = [f"x{j}" for j in range(config.v)]
    return from_arrays(values, labels, ids, names, config.class_count)
