"""End-to-end processing: config, trace -> features, model files, prediction, streaming."""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ellip import IirFilter, design_highpass_elliptic
from .errors import ConfigError, ModelFormatError, ParseError
from .evaluation import decode_class
from .features import (LABELS, N_FEATURES, WINDOW_SIZE, NormStats, apply_normalizer,
                       extract, fft_magnitudes, select_features)
from .lm import TrainConfig
from .nn import MlpParams, forward, params_from_dict, params_to_dict
from .sigproc import (CalibrationParams, RawTrace, calibrate, centered_mean,
                      filter_apply, magnitude, moving_average, new_filter_state, sos_step)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class FilterSpec:
    order: int = 4
    passband_edge_hz: float = 0.8
    passband_ripple_db: float = 0.5
    stopband_atten_db: float = 40.0


@dataclass
class PipelineConfig:
    sample_rate_hz: float = 50.0
    smoothing_window: int = 3
    filter: FilterSpec = field(default_factory=FilterSpec)
    window_size: int = WINDOW_SIZE
    hop: int = WINDOW_SIZE
    n_features: int = N_FEATURES
    hidden_sizes: tuple[int, ...] = (7, 7)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    calibration: CalibrationParams = field(default_factory=CalibrationParams.nominal)

    def __post_init__(self):
        self.hidden_sizes = tuple(int(h) for h in self.hidden_sizes)
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ConfigError("smoothing_window must be odd and positive")
        w = self.window_size
        if w < 2 or w & (w - 1):
            raise ConfigError("window_size must be a power of two")
        if not 1 <= self.n_features <= w // 2 + 1:
            raise ConfigError("n_features must be between 1 and window_size/2 + 1")
        if self.hop < 1:
            raise ConfigError("hop must be positive")

    def design_filter(self) -> IirFilter:
        f = self.filter
        return design_highpass_elliptic(f.order, f.passband_edge_hz, f.passband_ripple_db,
                                        f.stopband_atten_db, self.sample_rate_hz)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "sample_rate_hz": self.sample_rate_hz,
            "smoothing_window": self.smoothing_window,
            "filter": asdict(self.filter),
            "window_size": self.window_size,
            "hop": self.hop,
            "n_features": self.n_features,
            "hidden_sizes": list(self.hidden_sizes),
            "train": self.train.to_dict(),
            "seed": self.seed,
            "calibration": self.calibration.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        version = d.pop("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ConfigError(f"unsupported config format_version {version}")
        try:
            if "filter" in d:
                d["filter"] = FilterSpec(**d["filter"])
            if "train" in d:
                d["train"] = TrainConfig.from_dict(d["train"])
            if "calibration" in d:
                d["calibration"] = CalibrationParams.from_dict(d["calibration"])
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad pipeline config: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, None, exc.lineno) from None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            return cls.from_json(Path(path).read_text())
        except ParseError as exc:
            raise ParseError(str(exc), path, exc.line) from None


def body_acceleration(raw: RawTrace, config: PipelineConfig, filt: IirFilter | None = None):
    """Calibrated, smoothed, high-passed (n, 3) array in g."""
    filt = filt or config.design_filter()
    g = calibrate(raw, config.calibration).samples
    if len(g) < config.smoothing_window:
        return np.zeros((0, 3))
    cols = []
    for axis in range(3):
        smooth = moving_average(g[:, axis], config.smoothing_window)
        cols.append(filter_apply(filt, smooth))
    return np.stack(cols, axis=1)


def extract_features(raw: RawTrace, config: PipelineConfig, filt: IirFilter | None = None):
    """Un-normalized features and window start indices for one trace."""
    body = body_acceleration(raw, config, filt)
    mags = magnitude(body) if len(body) else np.zeros(0)
    return extract(mags, config.hop, config.n_features, config.window_size)


# -- model files -----------------------------------------------------------------

@dataclass
class Model:
    params: MlpParams
    normstats: NormStats
    config: PipelineConfig
    training: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            **params_to_dict(self.params),
            "norm_stats": self.normstats.to_dict(),
            "pipeline": self.config.to_dict(),
            "training": self.training,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Model":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, UnicodeDecodeError) as exc:
            raise ModelFormatError(f"cannot read model {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: corrupt model file ({exc.msg}, line {exc.lineno})") from None
        if not isinstance(d, dict) or d.get("format_version") != FORMAT_VERSION:
            found = d.get("format_version") if isinstance(d, dict) else None
            raise ModelFormatError(f"{path}: unsupported model format_version {found!r}")
        try:
            params = params_from_dict(d)
            stats = NormStats.from_dict(d["norm_stats"])
            config = PipelineConfig.from_dict(d["pipeline"])
        except (KeyError, TypeError, ValueError, ConfigError) as exc:
            raise ModelFormatError(f"{path}: malformed model ({exc})") from None
        if len(stats.mean) != params.topology.n_inputs or len(stats.std) != params.topology.n_inputs:
            raise ModelFormatError(f"{path}: normalizer width does not match network inputs")
        return cls(params, stats, config, d.get("training", {}))

    def classify_row(self, features) -> int:
        """Class code for one un-normalized feature row."""
        row = np.asarray(features, dtype=float)
        if row.shape != (self.params.topology.n_inputs,):
            raise ModelFormatError(
                f"model v{FORMAT_VERSION} expects {self.params.topology.n_inputs} features, got {row.shape[-1]}")
        out, _ = forward(self.params, apply_normalizer(self.normstats, row))
        return decode_class(out)

    def classify(self, matrix) -> list[int]:
        # one row at a time: the streaming path scores single rows, and batch
        # matrix products are not guaranteed to round identically
        return [self.classify_row(r) for r in np.atleast_2d(matrix)] if len(matrix) else []


@dataclass
class Prediction:
    t_ms: float
    code: int

    @property
    def label(self) -> str:
        return LABELS[self.code]


def predict_trace(model: Model, raw: RawTrace) -> list[Prediction]:
    feats, starts = extract_features(raw, model.config)
    t = raw.times_ms()
    return [Prediction(float(t[s]), c) for s, c in zip(starts, model.classify(feats))]


def predict_features(model: Model, matrix, t_ms=None) -> list[Prediction]:
    codes = model.classify(matrix)
    if t_ms is None:
        step = model.config.hop * 1000.0 / model.config.sample_rate_hz
        t_ms = [i * step for i in range(len(codes))]
    return [Prediction(float(t), c) for t, c in zip(t_ms, codes)]


# -- streaming -------------------------------------------------------------------

class StreamClassifier:
    """Sample-at-a-time classifier reproducing the offline pipeline exactly.

    The centered moving average needs ``smoothing_window // 2`` samples of
    lookahead, so smoothed values lag the input by that much; :meth:`finish`
    flushes the tail with the same shrunken windows the offline path uses.
    """

    def __init__(self, model: Model):
        self.model = model
        cfg = model.config
        self.config = cfg
        filt = cfg.design_filter()
        self._sections = filt.sections
        self._filter_state = [new_filter_state(filt) for _ in range(3)]
        self._half = cfg.smoothing_window // 2
        self._off = cfg.calibration.offset_mV
        self._sens = cfg.calibration.sensitivity_mV_per_g
        self._raw = deque(maxlen=2 * self._half + 1)  # calibrated samples
        self._n_in = 0  # samples accepted so far
        self._n_smoothed = 0
        self._mags = deque(maxlen=cfg.window_size)
        self._times: deque[float] = deque(maxlen=cfg.window_size)
        self._pending_t: deque[float] = deque()
        self._since_emit = 0
        self.skipped = 0
        self.emitted = 0

    def push(self, x_mV: float, y_mV: float, z_mV: float, t_ms: float | None = None):
        """Feed one raw sample; returns a list of emitted predictions (0 or 1)."""
        vals = (x_mV, y_mV, z_mV)
        if not all(math.isfinite(v) for v in vals):
            self.skipped += 1
            log.warning("skipping non-finite sample (%d so far)", self.skipped)
            return []
        if t_ms is None:
            t_ms = self._n_in * 1000.0 / self.config.sample_rate_hz
        g = tuple((float(v) - o) / s for v, o, s in zip(vals, self._off, self._sens))
        self._raw.append(g)
        self._pending_t.append(float(t_ms))
        self._n_in += 1
        i = self._n_in - 1 - self._half  # index whose window is now complete
        if i < 0:
            return []
        return self._smooth_and_push(i, self._n_in)

    def finish(self):
        """Flush lookahead at end of input; returns any final predictions."""
        out = []
        while self._n_smoothed < self._n_in:
            out += self._smooth_and_push(self._n_smoothed, self._n_in)
        return out

    def _smooth_and_push(self, i: int, n_available: int):
        lo = max(0, i - self._half)
        hi = min(n_available, i + self._half + 1)
        first = self._n_in - len(self._raw)  # absolute index of _raw[0]
        window = [self._raw[j - first] for j in range(lo, hi)]
        smooth = [centered_mean([w[a] for w in window]) for a in range(3)]
        body = [sos_step(self._sections, self._filter_state[a], smooth[a]) for a in range(3)]
        x, y, z = body
        self._mags.append(float(np.sqrt(x * x + y * y + z * z)))
        self._times.append(self._pending_t.popleft())
        self._n_smoothed += 1
        if len(self._mags) < self.config.window_size:
            return []
        if self._n_smoothed > self.config.window_size:
            self._since_emit += 1
            if self._since_emit < self.config.hop:
                return []
        self._since_emit = 0
        feats = select_features(fft_magnitudes(np.array(self._mags), self.config.window_size),
                                self.config.n_features)
        self.emitted += 1
        return [Prediction(self._times[0], self.model.classify_row(feats))]


def stream_classify(model: Model, samples):
    """Generator over predictions for an iterable of ``(t_ms, x, y, z)`` tuples."""
    clf = StreamClassifier(model)
    for t, x, y, z in samples:
        yield from clf.push(x, y, z, t)
    yield from clf.finish()
