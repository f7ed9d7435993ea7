import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neucube.dataset import (
    CsvSchema,
    DataError,
    SyntheticConfig,
    concat_features,
    from_arrays,
    generate_synthetic,
    load_samples,
    truncate,
    write_samples,
)


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_round_trip_small_file(tmp_path, rng):
    data = from_arrays(rng.normal(size=(2, 4, 3)), [0, 1], ["a", "b"], ["u", "v", "w"])
    p = tmp_path / "d.csv"
    write_samples(data, p)
    back = load_samples(p)
    assert (back.s, back.t, back.v) == (2, 4, 3)
    assert back == data
    write_samples(back, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_bytes() == p.read_bytes()


def test_ragged_sample_names_offender(tmp_path):
    text = "sample_id,tick,x,label\n" + "".join(f"a,{i},1.0,0\n" for i in range(4))
    text += "".join(f"b,{i},1.0,1\n" for i in range(3))
    with pytest.raises(DataError, match="ragged.*'b'|'b'.*ragged"):
        load_samples(_write(tmp_path / "r.csv", text))


def test_hold_last_fills_from_previous_tick(tmp_path):
    text = "sample_id,tick,x,y,label\na,0,1,5,0\na,1,2,,0\na,2,3,7,0\nb,0,0,0,1\nb,1,0,0,1\nb,2,0,0,1\n"
    data = load_samples(_write(tmp_path / "h.csv", text))
    expected = np.array([[1, 5], [2, 5], [3, 7]], dtype=float)
    assert np.array_equal(data.samples[0].values, expected)


def test_other_fill_policies(tmp_path):
    text = "sample_id,tick,x,label\na,0,1,0\na,1,,0\na,2,3,0\nb,0,0,1\nb,1,0,1\nb,2,0,1\n"
    p = _write(tmp_path / "f.csv", text)
    lin = load_samples(p, CsvSchema(fill="linear-interpolate"))
    assert lin.samples[0].values[:, 0].tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(DataError, match="tick 1"):
        load_samples(p, CsvSchema(fill="reject"))


def test_leading_gap_takes_first_observation(tmp_path):
    text = "sample_id,tick,x,label\na,0,,0\na,1,4,0\nb,0,1,1\nb,1,1,1\n"
    data = load_samples(_write(tmp_path / "g.csv", text))
    assert data.samples[0].values[:, 0].tolist() == [4.0, 4.0]


def test_non_numeric_cell_reports_row_and_column(tmp_path):
    text = "sample_id,tick,x,label\na,0,1,0\na,1,oops,0\nb,0,1,1\nb,1,1,1\n"
    with pytest.raises(DataError) as err:
        load_samples(_write(tmp_path / "n.csv", text))
    msg = str(err.value)
    assert "'x'" in msg and "3" in msg


def test_unknown_label_column(tmp_path):
    text = "sample_id,tick,x,label\na,0,1,0\na,1,1,0\n"
    with pytest.raises(DataError, match="label column"):
        load_samples(_write(tmp_path / "u.csv", text), CsvSchema(label_column="klass"))


def test_ticks_must_run_from_zero(tmp_path):
    text = "sample_id,tick,x,label\na,1,1,0\na,2,1,0\nb,0,1,1\nb,1,1,1\n"
    with pytest.raises(DataError, match="tick"):
        load_samples(_write(tmp_path / "t.csv", text))


def test_string_labels_encoded_in_order_of_appearance(tmp_path):
    text = "sample_id,tick,x,label\na,0,1,high\na,1,1,high\nb,0,1,low\nb,1,1,low\nc,0,1,high\nc,1,1,high\n"
    data = load_samples(_write(tmp_path / "s.csv", text))
    assert data.labels.tolist() == [0, 1, 0]
    assert data.class_names == ("high", "low")


def test_missing_file_is_a_data_error(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_samples(tmp_path / "absent.csv")


@pytest.fixture
def sixty():
    return generate_synthetic(SyntheticConfig(v=3, t=60, samples_per_class=2, seed=5))


def test_truncate_identity(sixty):
    assert truncate(sixty, 1.0) == sixty


@pytest.mark.parametrize("fraction, ticks", [(0.75, 45), (0.5, 30)])
def test_truncate_lengths(sixty, fraction, ticks):
    short = truncate(sixty, fraction)
    assert short.t == ticks
    assert np.array_equal(short.labels, sixty.labels)
    assert np.array_equal(short.values, sixty.values[:, :ticks])


@pytest.mark.parametrize("fraction", [0.0, -0.1, 1.5, 0.02])
def test_truncate_rejects(sixty, fraction):
    with pytest.raises(DataError):
        truncate(sixty, fraction)


@given(st.floats(0.04, 1.0), st.floats(0.04, 1.0))
def test_truncate_monotone_in_fraction(a, b):
    data = generate_synthetic(SyntheticConfig(v=2, t=60, samples_per_class=2, seed=0))
    lo, hi = sorted((a, b))
    assert truncate(data, lo).t <= truncate(data, hi).t
    assert truncate(data, lo).t == math.floor(lo * 60 + 1e-9)


def test_concat_definition():
    data = from_arrays(np.array([[[1.0, 3.0], [2.0, 4.0]]]), [0])
    X, y = concat_features(data)
    assert X.tolist() == [[1.0, 2.0, 3.0, 4.0]]
    assert y.tolist() == [0]


def test_concat_single_variable(rng):
    vals = rng.normal(size=(3, 5, 1))
    X, _ = concat_features(from_arrays(vals, [0, 1, 0]))
    assert np.array_equal(X, vals[:, :, 0])


@given(st.integers(1, 6), st.integers(2, 6), st.integers(0, 10_000))
def test_concat_index_arithmetic(v, t, seed):
    vals = np.random.default_rng(seed).normal(size=(2, t, v))
    X, _ = concat_features(from_arrays(vals, [0, 1]))
    assert X.shape == (2, t * v)
    for n in range(2):
        for j in range(v):
            for i in range(t):
                assert X[n, j * t + i] == vals[n, i, j]


def test_synthetic_is_reproducible():
    cfg = SyntheticConfig(seed=11)
    assert generate_synthetic(cfg) == generate_synthetic(cfg)
    assert generate_synthetic(cfg) != generate_synthetic(SyntheticConfig(seed=12))


def test_synthetic_noise_free_pair_is_identical():
    data = generate_synthetic(SyntheticConfig(v=2, groups=((0, 1),), class_lags=(0.0, 0.0), noise_std=0.0))
    for s in data.samples:
        assert np.corrcoef(s.values.T)[0, 1] == pytest.approx(1.0, abs=1e-12)


def _mean_corr(data, pairs):
    out = []
    for s in data.samples:
        c = np.corrcoef(s.values.T)
        out.extend(c[i, j] for i, j in pairs)
    return float(np.mean(out))


def test_within_group_correlation_exceeds_cross_group():
    data = generate_synthetic(SyntheticConfig(v=4, groups=((0, 1), (2, 3)), noise_std=0.2, seed=3))
    within = _mean_corr(data, [(0, 1), (2, 3)])
    across = _mean_corr(data, [(0, 2), (0, 3), (1, 2), (1, 3)])
    assert within >= 0.6
    assert within > across


def test_classes_share_marginal_amplitude():
    data = generate_synthetic(SyntheticConfig(samples_per_class=200, noise_std=0.0, seed=2))
    spread = [data.values[data.labels == c].std() for c in range(2)]
    assert spread[0] == pytest.approx(spread[1], rel=0.1)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"noise_std": -1.0},
        {"groups": ((0, 1), ())},
        {"groups": ((0, 1),), "v": 3},
        {"samples_per_class": 1},
        {"class_lags": (0.0,)},
    ],
)
def test_synthetic_rejects_degenerate_configs(kwargs):
    with pytest.raises(DataError):
        generate_synthetic(SyntheticConfig(**kwargs))
