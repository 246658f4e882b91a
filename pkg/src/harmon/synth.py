"""Synthetic rest/walk/run accelerometer recordings.

Body acceleration is a two-harmonic periodic signal split across the axes
(default 20/20/60 % on x/y/z), with gravity fixed at +1 g on z and white
noise added per axis.  Each axis sways at the stride rate, which is half
the step rate ``fundamental_hz``; the harmonic sits at the step rate.  The
Euclidean norm of a zero-mean oscillation is rectified, so its dominant
line is at twice the per-axis frequency, and this arrangement puts the
magnitude spectrum's peak at ``fundamental_hz``, inside the activity band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .features import LABELS
from .sigproc import CalibrationParams, RawTrace, uncalibrate

BANDS_HZ = {"walk": (1.5, 2.5), "run": (2.5, 5.0)}
DEFAULT_FUNDAMENTAL_HZ = {"walk": 2.0, "run": 3.5}
DEFAULT_AMP_G = {"rest": 0.0, "walk": 0.4, "run": 1.2}


@dataclass(frozen=True)
class SynthSpec:
    activity: str = "walk"
    duration_s: float = 10.0
    fundamental_hz: float | None = None
    body_amp_g: float | None = None
    harmonic_ratio: float = 0.3
    noise_std_g: float = 0.05
    axis_split: tuple[float, float, float] = (0.2, 0.2, 0.6)
    seed: int = 0

    def __post_init__(self):
        if self.activity not in LABELS:
            raise ConfigError(f"unknown activity {self.activity!r}")
        if self.fundamental_hz is None and self.activity in DEFAULT_FUNDAMENTAL_HZ:
            object.__setattr__(self, "fundamental_hz", DEFAULT_FUNDAMENTAL_HZ[self.activity])
        if self.body_amp_g is None:
            object.__setattr__(self, "body_amp_g", DEFAULT_AMP_G[self.activity])
        if self.activity == "rest":
            if self.body_amp_g != 0:
                raise ConfigError("rest has no body acceleration")
        else:
            lo, hi = BANDS_HZ[self.activity]
            f = self.fundamental_hz
            in_band = lo <= f < hi if self.activity == "walk" else lo <= f <= hi
            if not in_band:
                raise ConfigError(f"{self.activity} fundamental {f} Hz outside [{lo}, {hi}]")
        if self.duration_s <= 0 or self.noise_std_g < 0:
            raise ConfigError("duration must be positive and noise non-negative")


def synth_trace(spec: SynthSpec, cal: CalibrationParams | None = None,
                sample_rate_hz: float = 50.0) -> tuple[RawTrace, str]:
    cal = cal or CalibrationParams.nominal()
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    phases = rng.uniform(0.0, 2.0 * math.pi, 2)
    g = np.zeros((n, 3))
    if spec.body_amp_g:
        f = spec.fundamental_hz
        body = spec.body_amp_g * (
            np.sin(2.0 * math.pi * (f / 2.0) * t + phases[0])
            + spec.harmonic_ratio * np.sin(2.0 * math.pi * f * t + phases[1]))
        g += body[:, None] * np.asarray(spec.axis_split)[None, :]
    g[:, 2] += 1.0
    if spec.noise_std_g > 0:
        g += rng.normal(0.0, spec.noise_std_g, g.shape)
    return RawTrace(sample_rate_hz, uncalibrate(g, cal)), spec.activity


def dataset_specs(n_per_class: int = 30, seed: int = 0, window_s: float = 2.56,
                  warmup_s: float = 5.12, amp_jitter: float = 0.25,
                  band_margin_hz: float = 0.1, noise_std_g: float = 0.05) -> list[SynthSpec]:
    """One short recording per window, with rate and amplitude drawn per recording.

    Each recording carries ``warmup_s`` of lead-in so the high-pass filter's
    gravity transient has settled before the scored window.
    """
    rng = np.random.default_rng(seed)
    specs = []
    for activity in LABELS:
        for _ in range(n_per_class):
            sub_seed = int(rng.integers(0, 2**31 - 1))
            if activity == "rest":
                specs.append(SynthSpec("rest", warmup_s + window_s, noise_std_g=noise_std_g,
                                       seed=sub_seed))
                continue
            lo, hi = BANDS_HZ[activity]
            f = float(rng.uniform(lo + band_margin_hz, hi - band_margin_hz))
            amp = DEFAULT_AMP_G[activity] * float(rng.uniform(1 - amp_jitter, 1 + amp_jitter))
            specs.append(SynthSpec(activity, warmup_s + window_s, f, amp,
                                   noise_std_g=noise_std_g, seed=sub_seed))
    return specs


def synthetic_dataset(n_per_class: int = 30, seed: int = 0, config=None, **spec_kw):
    """Feature matrix and labels from :func:`dataset_specs`, last window of each trace."""
    from .evaluation import LabeledDataset
    from .pipeline import PipelineConfig, extract_features

    config = config or PipelineConfig()
    filt = config.design_filter()
    window_s = config.window_size / config.sample_rate_hz
    rows, labels = [], []
    for spec in dataset_specs(n_per_class, seed, window_s=window_s, **spec_kw):
        raw, label = synth_trace(spec, config.calibration, config.sample_rate_hz)
        last = replace(config, hop=len(raw) - config.window_size) if len(raw) > config.window_size else config
        feats, starts = extract_features(raw, last, filt)
        rows.append(feats[-1])
        labels.append(label)
    return LabeledDataset.from_named(np.array(rows), labels)
