import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from neucube.encoding import SpikeRaster, SpikeTrain
from neucube.similarity import (
    COINCIDENCE,
    DENSITY,
    KernelConfig,
    density_correlation,
    max_coincidence,
    read_similarity,
    similarity_matrix,
    spike_density,
    write_similarity,
)


@st.composite
def trains(draw, length=None, min_spikes=0):
    t = length if length is not None else draw(st.integers(4, 60))
    ticks = draw(st.lists(st.integers(0, t - 1), min_size=min_spikes, max_size=t, unique=True))
    pols = draw(st.lists(st.sampled_from([-1, 1]), min_size=len(ticks), max_size=len(ticks)))
    order = np.argsort(ticks)
    return SpikeTrain(np.array(ticks, dtype=int)[order], np.array(pols, dtype=int)[order], t)


@st.composite
def train_pairs(draw, min_spikes=0):
    t = draw(st.integers(4, 60))
    return draw(trains(t, min_spikes)), draw(trains(t, min_spikes))


def brute_coincidence(a: SpikeTrain, b: SpikeTrain, tau_max: int) -> int:
    events_b = {(int(t), int(p)) for t, p in zip(b.times, b.polarities)}
    best = 0
    for tau in range(-tau_max, tau_max + 1):
        hits = 0
        for t, p in zip(a.times, a.polarities):
            moved = int(t) + tau
            if 0 <= moved < a.length and (moved, int(p)) in events_b:
                hits += 1
        best = max(best, hits)
    return best


# ------------------------------------------------------------ density


def test_single_spike_density_is_scaled_kernel():
    h = 2.0
    d = spike_density(SpikeTrain([7], [1], 20), KernelConfig(h))
    grid = np.arange(20)
    expected = np.exp(-0.5 * ((grid - 7) / h) ** 2) / math.sqrt(2 * math.pi) / h
    assert np.allclose(d.values, expected, atol=1e-15)
    assert int(np.argmax(d.values)) == 7


def test_density_two_term_oracle():
    d = spike_density(SpikeTrain([2, 6], [1, -1], 10), KernelConfig(1.0))
    k = lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)  # noqa: E731
    assert d.values[4] == pytest.approx((k(2.0) + k(-2.0)) / 2.0, abs=1e-15)


@given(st.integers(40, 120), st.data())
def test_density_integrates_to_one(t, data):
    h = data.draw(st.floats(1.0, t / 10))
    margin = int(math.ceil(4 * h))
    ticks = data.draw(st.lists(st.integers(margin, t - 1 - margin), min_size=1, max_size=10, unique=True))
    d = spike_density(SpikeTrain(sorted(ticks), [1] * len(ticks), t), KernelConfig(h))
    assert d.values.min() >= 0
    assert d.values.sum() == pytest.approx(1.0, rel=0.05)


def test_density_rejects_empty_train_and_bad_bandwidth():
    with pytest.raises(ValueError, match="no spikes"):
        spike_density(SpikeTrain([], [], 10))
    with pytest.raises(ValueError):
        spike_density(SpikeTrain([1], [1], 10), KernelConfig(0.0))


def test_density_correlation_oracle():
    cfg = KernelConfig(0.5)
    a = SpikeTrain([1, 2, 3], [1, 1, 1], 10)
    b = SpikeTrain([7, 8, 9], [1, -1, 1], 10)
    x = spike_density(a, cfg).values
    y = spike_density(b, cfg).values
    mx, my = sum(x) / 10, sum(y) / 10
    cov = sum((p - mx) * (q - my) for p, q in zip(x, y))
    r = cov / math.sqrt(sum((p - mx) ** 2 for p in x) * sum((q - my) ** 2 for q in y))
    got = density_correlation(a, b, cfg)
    assert got == pytest.approx(r, abs=1e-12)
    assert got < -0.3


@given(trains(min_spikes=1))
def test_density_self_correlation_is_one(a):
    d = spike_density(a).values
    assume(d.std() > 1e-12)
    assert density_correlation(a, a) == pytest.approx(1.0, abs=1e-12)


@given(train_pairs(min_spikes=1))
def test_density_correlation_bounded(pair):
    r = density_correlation(*pair)
    assert -1.0 <= r <= 1.0


def test_density_correlation_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        density_correlation(SpikeTrain([1], [1], 10), SpikeTrain([1], [1], 11))


# -------------------------------------------------------- coincidence


def test_coincidence_hand_example():
    a = SpikeTrain([1, 5], [1, -1], 10)
    b = SpikeTrain([2, 6], [1, 1], 10)
    assert max_coincidence(a, b, 2) == 1
    assert brute_coincidence(a, b, 2) == 1


@given(trains(), st.integers(0, 3))
def test_coincidence_identity(a, tau_max):
    assume(tau_max < a.length)
    assert max_coincidence(a, a, tau_max) == a.count


@given(train_pairs(), st.data())
def test_coincidence_matches_brute_force(pair, data):
    a, b = pair
    tau_max = data.draw(st.integers(0, a.length - 1))
    assert max_coincidence(a, b, tau_max) == brute_coincidence(a, b, tau_max)


@given(train_pairs(), st.data())
def test_coincidence_bounds_and_symmetry(pair, data):
    a, b = pair
    tau_max = data.draw(st.integers(0, a.length - 1))
    c = max_coincidence(a, b, tau_max)
    assert 0 <= c <= min(a.count, b.count)
    assert c == max_coincidence(b, a, tau_max)


@given(trains(), st.data())
def test_coincidence_shift_recovery(b, data):
    tau0 = data.draw(st.integers(-(b.length - 1), b.length - 1))
    # keep b inside the grid after translation so nothing is dropped
    kept = (b.times + tau0 >= 0) & (b.times + tau0 < b.length)
    b = SpikeTrain(b.times[kept], b.polarities[kept], b.length)
    a = b.shifted(tau0)
    tau_max = data.draw(st.integers(abs(tau0), b.length - 1))
    assert max_coincidence(a, b, tau_max) == b.count


def test_coincidence_rejects_large_tau():
    a = SpikeTrain([1], [1], 5)
    with pytest.raises(ValueError):
        max_coincidence(a, a, 5)


# ------------------------------------------------------------- matrix


def _toy_raster():
    rng = np.random.default_rng(3)
    data = rng.choice([-1, 0, 0, 1], size=(2, 16, 3)).astype(np.int8)
    data[1, :, 2] = 0  # one empty train
    return SpikeRaster(data)


def test_coincidence_matrix_equals_loop_oracle():
    raster = _toy_raster()
    tau = 4
    m = similarity_matrix(raster, COINCIDENCE, tau_max=tau).values
    for i in range(3):
        for j in range(3):
            vals = []
            for n in range(raster.s):
                a, b = raster.train(n, i), raster.train(n, j)
                denom = min(a.count, b.count)
                vals.append(brute_coincidence(a, b, tau) / denom if denom else 0.0)
            assert m[i, j] == pytest.approx(np.mean(vals), abs=1e-15)


def test_density_matrix_equals_loop_oracle_skipping_empty_pairs():
    raster = _toy_raster()
    cfg = KernelConfig(1.5)
    m = similarity_matrix(raster, DENSITY, cfg).values
    for i in range(3):
        for j in range(3):
            vals = [
                density_correlation(raster.train(n, i), raster.train(n, j), cfg)
                for n in range(raster.s)
                if raster.train(n, i).count and raster.train(n, j).count
            ]
            assert m[i, j] == pytest.approx(np.mean(vals), abs=1e-12)


@pytest.mark.parametrize("method", [COINCIDENCE, DENSITY])
def test_duplicate_variable_scores_one(method):
    rng = np.random.default_rng(8)
    data = rng.choice([-1, 0, 0, 1], size=(4, 30, 3)).astype(np.int8)
    data[:, :, 2] = data[:, :, 0]
    data[:, 0, 0] = 1  # never empty
    data[:, 0, 2] = 1
    m = similarity_matrix(SpikeRaster(data), method).values
    assert m[0, 2] == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 10_000), st.sampled_from([COINCIDENCE, DENSITY]))
def test_matrix_symmetry(seed, method):
    data = np.random.default_rng(seed).choice([-1, 0, 0, 0, 1], size=(3, 20, 4)).astype(np.int8)
    data[:, 1, :] = 1
    m = similarity_matrix(SpikeRaster(data), method).values
    if method == COINCIDENCE:
        assert np.array_equal(m, m.T)
    else:
        assert np.abs(m - m.T).max() <= 1e-12


def test_density_matrix_names_silent_variable():
    data = np.zeros((2, 10, 2), dtype=np.int8)
    data[:, 3, 0] = 1
    with pytest.raises(ValueError, match="x1"):
        similarity_matrix(SpikeRaster(data), DENSITY)


def test_similarity_csv_round_trip(tmp_path):
    sim = similarity_matrix(_toy_raster(), COINCIDENCE, variable_names=("a", "b", "c"))
    write_similarity(sim, tmp_path / "s.csv")
    back = read_similarity(tmp_path / "s.csv")
    assert back.variable_names == ("a", "b", "c")
    assert np.array_equal(back.values, sim.values)
