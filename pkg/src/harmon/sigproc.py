"""Raw accelerometer traces to a body-acceleration magnitude trace.

Stages: calibrate (mV -> g), centered moving average, per-axis causal
high-pass filtering to strip gravity, and the Euclidean norm of the three
filtered axes.

The scalar kernels here (``centered_mean``, ``sos_step``) are also used by
the streaming classifier, so offline and online paths share bit-identical
arithmetic.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ellip import Biquad, IirFilter, design_highpass_elliptic
from .errors import CalibrationError, ConfigError, DataError, ParseError

log = logging.getLogger(__name__)

__all__ = [
    "RawTrace", "CalibrationParams", "CalibratedTrace", "MagnitudeTrace",
    "IirFilter", "derive_calibration", "calibrate", "moving_average",
    "design_highpass_elliptic", "filter_apply", "magnitude",
    "read_trace_csv", "write_trace_csv", "read_calibration", "write_calibration",
]

SENSOR_RANGE_G = 6.0


@dataclass
class RawTrace:
    sample_rate_hz: float
    samples: np.ndarray  # (n, 3) millivolts
    t_ms: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, 3)
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        if len(self.samples) < 1:
            raise DataError("trace has no samples")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("trace contains non-finite samples")
        if self.t_ms is not None:
            self.t_ms = np.asarray(self.t_ms, dtype=float)
            if len(self.t_ms) != len(self.samples):
                raise DataError("timestamp column length differs from samples")

    def __len__(self):
        return len(self.samples)

    def times_ms(self) -> np.ndarray:
        """Timestamps, synthesized at the nominal rate when the file had none."""
        if self.t_ms is not None:
            return self.t_ms
        return np.arange(len(self.samples)) * (1000.0 / self.sample_rate_hz)


@dataclass(frozen=True)
class CalibrationParams:
    offset_mV: tuple[float, float, float]
    sensitivity_mV_per_g: tuple[float, float, float]

    def __post_init__(self):
        if len(self.offset_mV) != 3 or len(self.sensitivity_mV_per_g) != 3:
            raise ConfigError("calibration needs three offsets and three sensitivities")
        for s in self.sensitivity_mV_per_g:
            if s == 0 or not math.isfinite(s):
                raise ConfigError(f"invalid sensitivity {s}")

    @classmethod
    def nominal(cls, zero_g_mV: float = 1650.0, sensitivity: float = 200.0):
        """Datasheet values for a 3.3 V supply: zero-g at Vdd/2, 200 mV/g."""
        return cls((zero_g_mV,) * 3, (sensitivity,) * 3)

    def to_dict(self) -> dict:
        return {"offset_mV": list(self.offset_mV),
                "sensitivity_mV_per_g": list(self.sensitivity_mV_per_g)}

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationParams":
        try:
            return cls(tuple(float(v) for v in d["offset_mV"]),
                       tuple(float(v) for v in d["sensitivity_mV_per_g"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad calibration record: {exc}") from exc


@dataclass
class CalibratedTrace:
    sample_rate_hz: float
    samples: np.ndarray  # (n, 3) g


@dataclass
class MagnitudeTrace:
    sample_rate_hz: float
    values: np.ndarray

    def __len__(self):
        return len(self.values)


def derive_calibration(upright_mean_mV, inverted_mean_mV,
                       nominal_sensitivity_mV_per_g: float = 200.0) -> CalibrationParams:
    """Two-point calibration from upright (+1 g on z) and inverted (-1 g) postures.

    Both postures put 0 g on x and y, so only their offsets are identifiable;
    their sensitivities fall back to the nominal value.
    """
    up = [float(v) for v in upright_mean_mV]
    down = [float(v) for v in inverted_mean_mV]
    if up[2] == down[2]:
        raise CalibrationError("z-axis means are equal in both postures")
    offset = (up[0], up[1], (up[2] + down[2]) / 2.0)
    sens = (nominal_sensitivity_mV_per_g, nominal_sensitivity_mV_per_g,
            (up[2] - down[2]) / 2.0)
    return CalibrationParams(offset, sens)


def calibrate(raw: RawTrace, cal: CalibrationParams) -> CalibratedTrace:
    off = np.asarray(cal.offset_mV, dtype=float)
    sens = np.asarray(cal.sensitivity_mV_per_g, dtype=float)
    g = (raw.samples - off) / sens
    if np.any(np.abs(g) > SENSOR_RANGE_G):
        log.warning("calibrated samples exceed the +/-%g g sensor range", SENSOR_RANGE_G)
    return CalibratedTrace(raw.sample_rate_hz, g)


def uncalibrate(g, cal: CalibrationParams) -> np.ndarray:
    """Inverse of :func:`calibrate` on a bare (n, 3) array."""
    return (np.asarray(g, dtype=float) * np.asarray(cal.sensitivity_mV_per_g)
            + np.asarray(cal.offset_mV))


def centered_mean(values: Sequence[float]) -> float:
    # exactly rounded sum: result does not depend on how the window was gathered
    return math.fsum(values) / len(values)


def _check_window(window_len: int):
    if not isinstance(window_len, (int, np.integer)) or window_len < 1 or window_len % 2 == 0:
        raise ConfigError(f"moving-average window must be an odd positive integer, got {window_len}")


def moving_average(series, window_len: int = 3) -> np.ndarray:
    """Centered moving average; windows shrink to the available samples at the ends.

    >>> moving_average([0.0, 3.0, 0.0], 3).tolist()
    [1.5, 1.0, 1.5]
    """
    _check_window(window_len)
    x = [float(v) for v in np.asarray(series, dtype=float).ravel()]
    n = len(x)
    if window_len > n:
        raise ConfigError(f"window {window_len} longer than series ({n})")
    half = window_len // 2
    if half == 0:
        return np.array(x)
    return np.array([centered_mean(x[max(0, i - half):i + half + 1]) for i in range(n)])


def sos_step(sections: Sequence[Biquad], state: list[list[float]], x: float) -> float:
    """Push one sample through a biquad cascade (transposed direct form II)."""
    for sec, st in zip(sections, state):
        b0, b1, b2 = sec.b
        a1, a2 = sec.a
        y = b0 * x + st[0]
        st[0] = b1 * x - a1 * y + st[1]
        st[1] = b2 * x - a2 * y
        x = y
    return x


def new_filter_state(filt: IirFilter) -> list[list[float]]:
    return [[0.0, 0.0] for _ in filt.sections]


def filter_apply(filt: IirFilter, series) -> np.ndarray:
    """Causal single pass through the cascade from a zero initial state."""
    state = new_filter_state(filt)
    sections = filt.sections
    return np.array([sos_step(sections, state, float(v))
                     for v in np.asarray(series, dtype=float).ravel()])


def magnitude(body) -> MagnitudeTrace | np.ndarray:
    """Per-sample Euclidean norm of a three-axis trace."""
    if isinstance(body, CalibratedTrace):
        return MagnitudeTrace(body.sample_rate_hz, magnitude(body.samples))
    a = np.asarray(body, dtype=float).reshape(-1, 3)
    x, y, z = a[:, 0], a[:, 1], a[:, 2]
    return np.sqrt(x * x + y * y + z * z)


# -- files -------------------------------------------------------------------

TRACE_COLUMNS = ("x_mV", "y_mV", "z_mV")


def read_trace_csv(path, sample_rate_hz: float = 50.0) -> RawTrace:
    """Read ``[t_ms,]x_mV,y_mV,z_mV`` rows; the timestamp column is optional."""
    path = Path(path)
    with path.open(newline="") as fh:
        return parse_trace_rows(fh, sample_rate_hz, source=str(path))


def parse_trace_rows(lines, sample_rate_hz: float = 50.0, source=None) -> RawTrace:
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty trace file", source, 1) from None
    if header[-3:] != list(TRACE_COLUMNS) or header[:-3] not in ([], ["t_ms"]):
        raise ParseError(f"unexpected header {header!r}", source, 1)
    width = len(header)
    rows = []
    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", source, reader.line_num)
        try:
            rows.append([float(c) for c in row])
        except ValueError as exc:
            raise ParseError(str(exc), source, reader.line_num) from None
    if not rows:
        raise ParseError("trace file has no samples", source)
    arr = np.array(rows)
    t = arr[:, 0] if width == 4 else None
    if not np.all(np.isfinite(arr)):
        raise ParseError("non-finite value in trace", source)
    return RawTrace(sample_rate_hz, arr[:, -3:], t)


def write_trace_csv(path, trace: RawTrace):
    t = trace.times_ms()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_ms", *TRACE_COLUMNS])
        for ti, (x, y, z) in zip(t, trace.samples):
            w.writerow([repr(float(ti)), repr(float(x)), repr(float(y)), repr(float(z))])


def read_calibration(path) -> CalibrationParams:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from None
    return CalibrationParams.from_dict(d)


def write_calibration(path, cal: CalibrationParams):
    Path(path).write_text(json.dumps(cal.to_dict(), indent=2) + "\n")
