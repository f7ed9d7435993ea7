"""Spike-train similarity: kernel density correlation and maximum coincidence."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .encoding import SpikeRaster, SpikeTrain

DENSITY = "density_correlation"
COINCIDENCE = "max_coincidence"
METHODS = (DENSITY, COINCIDENCE)


def gaussian_kernel(u):
    return np.exp(-0.5 * np.square(u)) / np.sqrt(2 * np.pi)


@dataclass(frozen=True)
class KernelConfig:
    """Kernel and bandwidth (in ticks). ``bandwidth=None`` means ``t / 20``."""

    bandwidth: float | None = None
    kernel: Callable = gaussian_kernel

    def resolve(self, t: int) -> float:
        h = t / 20.0 if self.bandwidth is None else float(self.bandwidth)
        if not h > 0:
            raise ValueError(f"bandwidth must be > 0, got {h}")
        return h


@dataclass(frozen=True)
class DensityFunction:
    values: np.ndarray
    spike_count: int


@dataclass(frozen=True)
class SimilarityMatrix:
    values: np.ndarray
    method: str
    variable_names: tuple[str, ...] = ()

    @property
    def v(self) -> int:
        return self.values.shape[0]


def spike_density(train: SpikeTrain, cfg: KernelConfig | None = None) -> DensityFunction:
    """Kernel estimate ``p(t) = 1/(N h) sum_k K((t - t_k)/h)`` sampled on ticks.

    Polarity is ignored: every event counts once.
    """
    cfg = cfg or KernelConfig()
    h = cfg.resolve(train.length)
    if train.count == 0:
        raise ValueError("no spikes: density undefined for an empty train")
    grid = np.arange(train.length, dtype=float)
    u = (grid[:, None] - train.times[None, :]) / h
    p = cfg.kernel(u).sum(axis=1) / (train.count * h)
    return DensityFunction(p, train.count)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.dot(xc, xc))
    sy = np.sqrt(np.dot(yc, yc))
    if sx == 0 or sy == 0:
        return 0.0
    r = float(np.dot(xc, yc) / (sx * sy))
    return min(1.0, max(-1.0, r))


def density_correlation(a: SpikeTrain, b: SpikeTrain, cfg: KernelConfig | None = None) -> float:
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")
    return _pearson(spike_density(a, cfg).values, spike_density(b, cfg).values)


def _check_tau(tau_max: int, t: int) -> None:
    if tau_max < 0 or tau_max >= t:
        raise ValueError(f"tau_max must be in [0, {t}), got {tau_max}")


def _coincidence_dense(a: np.ndarray, b: np.ndarray, tau_max: int) -> int:
    # a shifted by tau lands on b: a[i] == b[i + tau], both nonzero
    t = a.size
    best = 0
    for tau in range(-tau_max, tau_max + 1):
        if tau >= 0:
            x, y = a[: t - tau], b[tau:]
        else:
            x, y = a[-tau:], b[: t + tau]
        c = int(np.count_nonzero((x != 0) & (x == y)))
        if c > best:
            best = c
    return best


def max_coincidence(a: SpikeTrain, b: SpikeTrain, tau_max: int) -> int:
    """Largest number of equal-polarity events that coincide over shifts in ``[-tau_max, tau_max]``."""
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")
    _check_tau(tau_max, a.length)
    return _coincidence_dense(a.dense(), b.dense(), tau_max)


def default_tau_max(t: int) -> int:
    return t // 4


def _coincidence_block(trains: np.ndarray, tau_max: int) -> np.ndarray:
    """All-pairs max coincidence for a ``(t, v)`` signed matrix."""
    t, v = trains.shape
    pos = (trains > 0).astype(np.int32)
    neg = (trains < 0).astype(np.int32)
    best = np.zeros((v, v), dtype=np.int64)
    for tau in range(-tau_max, tau_max + 1):
        # count[i, j] = #{k : trains[k, i] == trains[k + tau, j] != 0}
        if tau >= 0:
            sl_a, sl_b = slice(0, t - tau), slice(tau, t)
        else:
            sl_a, sl_b = slice(-tau, t), slice(0, t + tau)
        c = pos[sl_a].T @ pos[sl_b] + neg[sl_a].T @ neg[sl_b]
        np.maximum(best, c, out=best)
    return best


def coincidence_matrix(trains: np.ndarray, tau_max: int) -> np.ndarray:
    """Pairwise coincidence of one sample normalised by ``min(N_i, N_j)``."""
    counts = np.count_nonzero(trains, axis=0)
    raw = _coincidence_block(trains, tau_max).astype(float)
    denom = np.minimum(counts[:, None], counts[None, :]).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, raw / np.where(denom > 0, denom, 1.0), 0.0)
    return out


def _density_block(trains: np.ndarray, cfg: KernelConfig):
    t, v = trains.shape
    h = cfg.resolve(t)
    grid = np.arange(t, dtype=float)
    spikes = (trains != 0).astype(float)
    counts = spikes.sum(axis=0)
    K = cfg.kernel((grid[:, None] - grid[None, :]) / h)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = (K @ spikes) / (np.where(counts > 0, counts, 1.0) * h)
    return dens, counts > 0


def similarity_matrix(
    raster: SpikeRaster,
    method: str = COINCIDENCE,
    cfg: KernelConfig | None = None,
    tau_max: int | None = None,
    variable_names=(),
) -> SimilarityMatrix:
    """Mean over samples of the per-sample pairwise similarity of variables.

    Coincidence pairs with an empty train contribute 0. Density-correlation
    pairs with an empty train are left out of that pair's mean.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    s, t, v = raster.data.shape
    names = tuple(variable_names) or tuple(f"x{j}" for j in range(v))
    if method == COINCIDENCE:
        tau = default_tau_max(t) if tau_max is None else int(tau_max)
        _check_tau(tau, t)
        total = np.zeros((v, v))
        for n in range(s):
            total += coincidence_matrix(raster.data[n], tau)
        return SimilarityMatrix(total / s, method, names)

    cfg = cfg or KernelConfig()
    total = np.zeros((v, v))
    used = np.zeros((v, v))
    any_spikes = np.zeros(v, dtype=bool)
    for n in range(s):
        dens, ok = _density_block(raster.data[n], cfg)
        any_spikes |= ok
        xc = dens - dens.mean(axis=0)
        norm = np.sqrt((xc * xc).sum(axis=0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = (xc.T @ xc) / np.outer(norm, norm)
        r = np.where(np.outer(norm > 0, norm > 0), r, 0.0)
        r = np.clip(r, -1.0, 1.0)
        pair_ok = np.outer(ok, ok)
        total += np.where(pair_ok, r, 0.0)
        used += pair_ok
    empty = [names[j] for j in range(v) if not any_spikes[j]]
    if empty:
        raise ValueError(f"variable(s) {empty} have no spikes in any sample; density correlation undefined")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(used > 0, total / np.where(used > 0, used, 1.0), 0.0)
    out = 0.5 * (out + out.T)
    return SimilarityMatrix(out, method, names)


def write_similarity(sim: SimilarityMatrix, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sim.variable_names)
        for row in sim.values:
            w.writerow([repr(float(x)) for x in row])
    os.replace(tmp, path)


def read_similarity(path, method: str = COINCIDENCE) -> SimilarityMatrix:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = tuple(rows[0])
    values = np.array([[float(x) for x in r] for r in rows[1:]])
    return SimilarityMatrix(values, method, names)
