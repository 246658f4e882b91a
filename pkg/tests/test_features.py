import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from harmon.errors import ConfigError, InsufficientDataError
from harmon.features import (apply_normalizer, bin_frequency, extract, fft_magnitudes,
                             fft_radix2, fit_normalizer, make_windows, read_features_csv,
                             select_features, write_features_csv)

windows128 = arrays(float, 128, elements=st.floats(-10, 10))


def naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


@pytest.mark.parametrize("n", [1, 2, 4, 8, 64, 128, 512])
def test_fft_matches_dft(n, rng):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    np.testing.assert_allclose(fft_radix2(x), naive_dft(x), atol=1e-9 * max(n, 1))


@pytest.mark.parametrize("n", [0, 3, 100])
def test_fft_rejects_non_power_of_two(n):
    with pytest.raises(ConfigError):
        fft_radix2(np.ones(n))


def test_constant_window():
    mags = fft_magnitudes(np.ones(128))
    assert mags.shape == (65,)
    assert mags[0] == 128.0
    assert np.max(mags[1:]) < 1e-12


def test_on_bin_sinusoid():
    t = np.arange(128)
    mags = fft_magnitudes(np.cos(2 * np.pi * 5 * t / 128))
    assert mags[5] == pytest.approx(64.0, abs=1e-9)
    assert np.max(np.delete(mags, 5)) < 1e-9
    assert bin_frequency(5) == 1.953125


def test_window_length_enforced():
    with pytest.raises(ConfigError):
        fft_magnitudes(np.ones(64))


@given(windows128)
@settings(max_examples=40)
def test_parseval(x):
    x_f = fft_radix2(x)
    assert np.sum(np.abs(x_f) ** 2) == pytest.approx(128 * np.sum(x * x), rel=1e-9, abs=1e-9)


@given(windows128)
@settings(max_examples=40)
def test_real_input_symmetry(x):
    x_f = fft_radix2(x)
    np.testing.assert_allclose(x_f[1:][::-1], np.conj(x_f[1:]), atol=1e-9)


def test_select_keeps_dc_and_first_bins():
    mags = np.arange(65.0)
    assert select_features(mags).tolist() == list(range(22))


class TestWindows:
    def test_counts(self):
        assert len(make_windows(np.zeros(127))) == 0
        assert len(make_windows(np.zeros(128))) == 1
        assert len(make_windows(np.zeros(2560))) == 20
        assert [w.start for w in make_windows(np.zeros(300), hop=64)] == [0, 64, 128]

    def test_extract_shapes(self):
        feats, starts = extract(np.zeros(2560))
        assert feats.shape == (20, 22)
        assert starts[:3] == [0, 128, 256]
        feats, starts = extract(np.zeros(100))
        assert feats.shape == (0, 22) and starts == []


class TestNormalizer:
    def test_uses_sample_std(self):
        stats = fit_normalizer([[1.0, 5.0], [3.0, 5.0]])
        assert stats.mean.tolist() == [2.0, 5.0]
        assert stats.std.tolist() == [np.sqrt(2.0), 1.0]
        assert apply_normalizer(stats, [3.0, 5.0]).tolist() == [1 / np.sqrt(2.0), 0.0]

    def test_standardizes(self, rng):
        m = rng.normal(3, 7, size=(50, 22))
        z = apply_normalizer(fit_normalizer(m), m)
        np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=0, ddof=1), 1, atol=1e-12)

    def test_needs_two_rows(self):
        with pytest.raises(InsufficientDataError):
            fit_normalizer([[1.0, 2.0]])

    def test_width_mismatch(self):
        with pytest.raises(ConfigError):
            apply_normalizer(fit_normalizer(np.eye(3)), [1.0, 2.0])


def test_feature_csv_round_trip(tmp_path, rng):
    m = rng.normal(size=(4, 22))
    labels = ["rest", "walk", "run", None]
    write_features_csv(tmp_path / "f.csv", m, labels, {"t_ms": [0.0, 2560.0, 5120.0, 7680.0]})
    back, lab, extra = read_features_csv(tmp_path / "f.csv")
    assert np.array_equal(back, m)
    assert lab[:3] == labels[:3] and not lab[3]
    assert [float(v) for v in extra["t_ms"]] == [0.0, 2560.0, 5120.0, 7680.0]
