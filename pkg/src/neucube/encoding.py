"""Adaptive-threshold (ATB) bipolar spike encoding."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .dataset import SampleSet


@dataclass(frozen=True)
class SpikeTrain:
    """Signed events on a tick grid ``0..length-1``."""

    times: np.ndarray
    polarities: np.ndarray
    length: int

    def __post_init__(self):
        times = np.asarray(self.times, dtype=int).reshape(-1)
        pol = np.asarray(self.polarities, dtype=np.int8).reshape(-1)
        if times.shape != pol.shape:
            raise ValueError("times and polarities differ in length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("spike times must be strictly increasing")
        if times.size and (times[0] < 0 or times[-1] >= self.length):
            raise ValueError("spike time outside [0, length)")
        if not np.all(np.isin(pol, (-1, 1))):
            raise ValueError("polarity must be +1 or -1")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "polarities", pol)

    @classmethod
    def from_dense(cls, signed) -> "SpikeTrain":
        signed = np.asarray(signed)
        idx = np.flatnonzero(signed)
        return cls(idx, np.sign(signed[idx]).astype(np.int8), len(signed))

    @property
    def count(self) -> int:
        return int(self.times.size)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.length, dtype=np.int8)
        out[self.times] = self.polarities
        return out

    def flipped(self) -> "SpikeTrain":
        return SpikeTrain(self.times, -self.polarities, self.length)

    def shifted(self, tau: int) -> "SpikeTrain":
        """Translate by ``tau`` ticks; events pushed off the grid are dropped."""
        t = self.times + tau
        keep = (t >= 0) & (t < self.length)
        return SpikeTrain(t[keep], self.polarities[keep], self.length)

    def __eq__(self, other):
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return (
            self.length == other.length
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.polarities, other.polarities)
        )

    __hash__ = None


@dataclass(frozen=True)
class SpikeRaster:
    """Signed spikes of a whole sample set, stored as an ``(s, t, v)`` int8 array."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.int8)
        if data.ndim != 3:
            raise ValueError("raster data must be (s, t, v)")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def s(self) -> int:
        return self.data.shape[0]

    @property
    def t(self) -> int:
        return self.data.shape[1]

    @property
    def v(self) -> int:
        return self.data.shape[2]

    def train(self, sample: int, variable: int) -> SpikeTrain:
        return SpikeTrain.from_dense(self.data[sample, :, variable])

    def row(self, sample: int) -> np.ndarray:
        """The ``(t, v)`` signed spike matrix of one sample."""
        return self.data[sample]

    def total_spikes(self) -> int:
        return int(np.count_nonzero(self.data))

    def subset(self, indices) -> "SpikeRaster":
        return SpikeRaster(self.data[np.asarray(indices, dtype=int)])


@dataclass(frozen=True)
class EncodingConfig:
    alpha: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


def _gradient(signal) -> np.ndarray:
    f = np.asarray(signal, dtype=float).reshape(-1)
    if f.size < 2:
        raise ValueError("ATB encoding needs at least 2 ticks")
    return np.diff(f)


def atb_threshold(signal, alpha: float) -> float:
    """``mean(|g|) + alpha * std(|g|)`` over forward differences ``g``.

    The standard deviation is the population one (``ddof=0``).
    """
    g = np.abs(_gradient(signal))
    return float(g.mean() + alpha * g.std())


def atb_encode(signal, alpha: float) -> SpikeTrain:
    g = _gradient(signal)
    thr = atb_threshold(signal, alpha)
    signed = np.zeros(g.size + 1, dtype=np.int8)
    signed[1:][g > thr] = 1
    signed[1:][g < -thr] = -1
    return SpikeTrain.from_dense(signed)


def encode_values(values, alpha: float) -> np.ndarray:
    """Vectorised ATB over the time axis of an ``(..., t, v)`` array."""
    values = np.asarray(values, dtype=float)
    if values.shape[-2] < 2:
        raise ValueError("ATB encoding needs at least 2 ticks")
    g = np.diff(values, axis=-2)
    a = np.abs(g)
    thr = a.mean(axis=-2, keepdims=True) + alpha * a.std(axis=-2, keepdims=True)
    out = np.zeros(values.shape, dtype=np.int8)
    out[..., 1:, :][g > thr] = 1
    out[..., 1:, :][g < -thr] = -1
    return out


def encode_set(sample_set: SampleSet, config: EncodingConfig) -> SpikeRaster:
    return SpikeRaster(encode_values(sample_set.values, config.alpha))


def write_raster(raster: SpikeRaster, path, sample_ids=None) -> None:
    """Debug dump, one row per spike: ``sample_id,variable,tick,polarity``."""
    ids = sample_ids or [str(i) for i in range(raster.s)]
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "variable", "tick", "polarity"])
        for n in range(raster.s):
            ticks, variables = np.nonzero(raster.data[n])
            order = np.lexsort((ticks, variables))
            for i in order:
                w.writerow([ids[n], int(variables[i]), int(ticks[i]), int(raster.data[n, ticks[i], variables[i]])])
    os.replace(tmp, path)
