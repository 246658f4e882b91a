"""Windowed FFT magnitude features and z-score normalization."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InsufficientDataError, ParseError

WINDOW_SIZE = 128
N_FEATURES = 22

LABELS = ("rest", "walk", "run")
LABEL_CODES = {name: code for code, name in enumerate(LABELS)}


@dataclass
class Window:
    values: np.ndarray
    label: str | None = None
    start: int = 0


@dataclass
class FeatureVector:
    features: np.ndarray
    label: str | None = None


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, d) -> "NormStats":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def make_windows(values, hop: int = WINDOW_SIZE, size: int = WINDOW_SIZE,
                 label: str | None = None) -> list[Window]:
    """Non-padded windows starting at 0, hop, 2*hop, ...; the tail is dropped.

    A trace shorter than ``size`` yields an empty list.
    """
    if hop < 1:
        raise ConfigError("hop must be a positive integer")
    v = np.asarray(getattr(values, "values", values), dtype=float)
    if len(v) < size:
        return []
    n = (len(v) - size) // hop + 1
    return [Window(v[i * hop:i * hop + size].copy(), label, i * hop) for i in range(n)]


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=int)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def fft_radix2(x) -> np.ndarray:
    """Iterative decimation-in-time FFT; the length must be a power of two."""
    a = np.asarray(x, dtype=complex).ravel()
    n = len(a)
    if n < 1 or n & (n - 1):
        raise ConfigError(f"FFT length must be a power of two, got {n}")
    a = a[_bit_reverse_indices(n)]
    half = 1
    while half < n:
        tw = np.exp(-2j * np.pi * np.arange(half) / (2 * half))
        blocks = a.reshape(-1, 2 * half)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * tw
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        a = blocks.reshape(-1)
        half *= 2
    return a


def fft_magnitudes(window, size: int = WINDOW_SIZE) -> np.ndarray:
    """|X[k]| for k = 0..size/2 of a real window, no taper, no scaling."""
    v = np.asarray(getattr(window, "values", window), dtype=float)
    if len(v) != size:
        raise ConfigError(f"window has {len(v)} samples, expected {size}")
    return np.abs(fft_radix2(v)[: len(v) // 2 + 1])


def select_features(mags, n_features: int = N_FEATURES) -> np.ndarray:
    """Keep the first ``n_features`` bins, DC included."""
    return np.asarray(mags, dtype=float)[:n_features].copy()


def bin_frequency(k, sample_rate_hz: float = 50.0, n_fft: int = WINDOW_SIZE):
    return np.asarray(k) * sample_rate_hz / n_fft


def fit_normalizer(matrix) -> NormStats:
    """Column means and sample (n-1) standard deviations.

    Zero-variance columns get std 1 so they normalize to exactly 0.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.shape[0] < 2:
        raise InsufficientDataError("need at least two rows to fit a normalizer")
    mean = m.mean(axis=0)
    std = m.std(axis=0, ddof=1)
    std = np.where(std > 0, std, 1.0)
    return NormStats(mean, std)


def apply_normalizer(stats: NormStats, v):
    if isinstance(v, FeatureVector):
        return FeatureVector(apply_normalizer(stats, v.features), v.label)
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1] != len(stats.mean):
        raise ConfigError(f"feature width {arr.shape[-1]} != normalizer width {len(stats.mean)}")
    return (arr - stats.mean) / stats.std


def extract(magnitude_values, hop: int = WINDOW_SIZE, n_features: int = N_FEATURES,
            size: int = WINDOW_SIZE):
    """Feature matrix and window start indices for a whole magnitude trace."""
    windows = make_windows(magnitude_values, hop, size)
    feats = np.array([select_features(fft_magnitudes(w, size), n_features) for w in windows])
    return feats.reshape(len(windows), n_features), [w.start for w in windows]


# -- feature files -------------------------------------------------------------

def write_features_csv(path, features, labels, extra: dict | None = None):
    """Write ``label,f0..f{n-1}`` rows; ``extra`` adds trailing metadata columns."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    n_feat = features.shape[1] if features.size else N_FEATURES
    extra = extra or {}
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *[f"f{i}" for i in range(n_feat)], *extra])
        for i, row in enumerate(features if features.size else []):
            w.writerow([labels[i] if labels[i] is not None else "",
                        *[repr(float(v)) for v in row],
                        *[repr(col[i]) if isinstance(col[i], float) else col[i]
                          for col in extra.values()]])


def read_features_csv(path):
    """Return (matrix, labels, extra_columns) from a feature CSV."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty feature file", path, 1) from None
        if not header or header[0] != "label":
            raise ParseError("first column must be 'label'", path, 1)
        fcols = [i for i, h in enumerate(header) if h.startswith("f") and h[1:].isdigit()]
        if not fcols:
            raise ParseError("no feature columns", path, 1)
        other = [i for i in range(1, len(header)) if i not in fcols]
        rows, labels, extra = [], [], {header[i]: [] for i in other}
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, reader.line_num)
            label = row[0].strip() or None
            if label is not None and label not in LABEL_CODES:
                raise ParseError(f"unknown label {label!r}", path, reader.line_num)
            try:
                rows.append([float(row[i]) for i in fcols])
            except ValueError as exc:
                raise ParseError(str(exc), path, reader.line_num) from None
            labels.append(label)
            for i in other:
                extra[header[i]].append(row[i])
    matrix = np.array(rows, dtype=float).reshape(len(rows), len(fcols))
    return matrix, labels, extra
