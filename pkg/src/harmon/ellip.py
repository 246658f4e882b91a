"""High-pass elliptic (Cauer) IIR design as a cascade of biquads.

The design runs in four steps:

1. analog elliptic low-pass prototype with unit passband edge
   (zeros from ``sn``, poles from the inverse ``sc`` of the ripple level),
2. low-pass to high-pass substitution ``s -> wc / s``,
3. bilinear transform, with ``wc`` prewarped so the digital passband edge
   lands exactly on the requested frequency,
4. pairing of conjugate poles and zeros into second-order sections.

Only even orders are supported, so every section is a complex-conjugate
pair of poles and zeros and no first-order stage is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConfigError, FilterDesignError


@dataclass(frozen=True)
class Biquad:
    """One second-order section; the leading denominator coefficient is 1."""

    b: tuple[float, float, float]
    a: tuple[float, float]  # (a1, a2)

    def poles(self) -> np.ndarray:
        return np.roots([1.0, self.a[0], self.a[1]])

    def zeros(self) -> np.ndarray:
        return np.roots(list(self.b))


@dataclass(frozen=True)
class IirFilter:
    sections: tuple[Biquad, ...]
    design_meta: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return 2 * len(self.sections)

    def poles(self) -> np.ndarray:
        if not self.sections:
            return np.zeros(0, dtype=complex)
        return np.concatenate([s.poles() for s in self.sections])

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def response(self, freqs_hz, sample_rate_hz: float | None = None) -> np.ndarray:
        """Complex frequency response at the given frequencies."""
        fs = sample_rate_hz or self.design_meta.get("sample_rate_hz")
        if fs is None:
            raise ConfigError("sample rate unknown for frequency response")
        w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=float) / fs
        zinv = np.exp(-1j * w)
        h = np.ones_like(zinv)
        for s in self.sections:
            num = s.b[0] + s.b[1] * zinv + s.b[2] * zinv**2
            den = 1.0 + s.a[0] * zinv + s.a[1] * zinv**2
            h = h * num / den
        return h

    def to_sos(self) -> np.ndarray:
        """Sections as rows ``[b0, b1, b2, 1, a1, a2]``."""
        return np.array([[*s.b, 1.0, *s.a] for s in self.sections], dtype=float)

    @classmethod
    def from_sos(cls, sos, design_meta: dict | None = None) -> "IirFilter":
        sections = []
        for row in np.atleast_2d(np.asarray(sos, dtype=float)):
            a0 = row[3]
            if a0 == 0:
                raise ConfigError("section with a0 == 0")
            b = tuple(float(v / a0) for v in row[:3])
            a = (float(row[4] / a0), float(row[5] / a0))
            sections.append(Biquad(b, a))
        return cls(tuple(sections), dict(design_meta or {}))


def _selectivity_from_discrimination(order: int, m1: float) -> float:
    """Solve the degree equation for the selectivity parameter m = k**2.

    ``m1`` is the squared discrimination factor.  The nome of the
    prototype is the ``order``-th root of the nome of ``m1``; the modulus is
    recovered from the theta-series expression.
    """
    q1 = math.exp(-math.pi * special.ellipkm1(m1) / special.ellipk(m1))
    if q1 <= 0.0:
        raise FilterDesignError("discrimination factor underflows; lower the attenuation")
    q = q1 ** (1.0 / order)
    num = sum(q ** (n * (n + 1)) for n in range(0, 8))
    den = 1.0 + 2.0 * sum(q ** (n * n) for n in range(1, 8))
    k = 4.0 * math.sqrt(q) * (num / den) ** 2
    m = k * k
    if not 0.0 < m < 1.0:
        raise FilterDesignError("transition band collapses for this order")
    return m


def elliptic_prototype(order: int, ripple_db: float, atten_db: float):
    """Zeros, poles and gain of the analog low-pass prototype (edge 1 rad/s)."""
    if order < 2 or order % 2:
        raise ConfigError(f"order must be an even integer >= 2, got {order}")
    eps = math.sqrt(10.0 ** (0.1 * ripple_db) - 1.0)
    k1 = eps / math.sqrt(10.0 ** (0.1 * atten_db) - 1.0)
    m1 = k1 * k1
    m = _selectivity_from_discrimination(order, m1)
    capk = special.ellipk(m)

    j = np.arange(1, order, 2)
    sn, cn, dn, _ = special.ellipj(j * capk / order, m)
    z = 1j / (math.sqrt(m) * sn)

    # inverse sc of 1/eps at the complementary parameter: offset of the pole row
    r = special.ellipkinc(math.atan(1.0 / eps), 1.0 - m1)
    v0 = capk * r / (order * special.ellipk(m1))
    sv, cv, dv, _ = special.ellipj(v0, 1.0 - m)
    p = -(cn * dn * sv * cv + 1j * sn * dv) / (1.0 - (dn * sv) ** 2)

    zeros = np.concatenate([z, z.conj()])
    poles = np.concatenate([p, p.conj()])
    gain = float(np.real(np.prod(-poles) / np.prod(-zeros)))
    gain /= math.sqrt(1.0 + eps * eps)
    return zeros, poles, gain, m


def _pair_sections(zeros, poles, gain) -> tuple[Biquad, ...]:
    upper_p = sorted((p for p in poles if p.imag > 0), key=abs)
    upper_z = [z for z in zeros if z.imag > 0]
    if len(upper_p) != len(poles) // 2 or len(upper_z) != len(zeros) // 2:
        raise FilterDesignError("poles/zeros are not in conjugate pairs")
    # poles nearest the unit circle get the closest zeros first
    pairs = []
    for p in reversed(upper_p):
        idx = min(range(len(upper_z)), key=lambda i: abs(upper_z[i] - p))
        pairs.append((upper_z.pop(idx), p))
    pairs.reverse()

    sections = []
    for i, (z, p) in enumerate(pairs):
        g = gain if i == 0 else 1.0
        b = (g, -2.0 * g * z.real, g * abs(z) ** 2)
        a = (-2.0 * p.real, abs(p) ** 2)
        sections.append(Biquad(tuple(float(v) for v in b), tuple(float(v) for v in a)))
    return tuple(sections)


def design_highpass_elliptic(
    order: int = 4,
    passband_edge_hz: float = 0.8,
    passband_ripple_db: float = 0.5,
    stopband_atten_db: float = 40.0,
    sample_rate_hz: float = 50.0,
) -> IirFilter:
    """Design a digital high-pass elliptic filter as a biquad cascade.

    Passband gain stays in ``[10**(-ripple/20), 1]`` above the edge and the
    stopband (including DC, since the order is even) sits at or below
    ``10**(-atten/20)``.
    """
    fs = float(sample_rate_hz)
    if not fs > 0:
        raise ConfigError("sample rate must be positive")
    if not 0.0 < passband_edge_hz < fs / 2.0:
        raise ConfigError("passband edge must lie strictly between 0 and Nyquist")
    if not passband_ripple_db > 0:
        raise ConfigError("passband ripple must be positive")
    if not stopband_atten_db > passband_ripple_db:
        raise ConfigError("stopband attenuation must exceed passband ripple")

    z, p, k, m = elliptic_prototype(order, passband_ripple_db, stopband_atten_db)

    fs2 = 2.0 * fs
    wc = fs2 * math.tan(math.pi * passband_edge_hz / fs)

    # low-pass -> high-pass; equal numbers of zeros and poles, no extra roots
    k = k * float(np.real(np.prod(-z) / np.prod(-p)))
    z = wc / z
    p = wc / p

    k = k * float(np.real(np.prod(fs2 - z) / np.prod(fs2 - p)))
    zd = (fs2 + z) / (fs2 - z)
    pd = (fs2 + p) / (fs2 - p)

    sections = _pair_sections(zd, pd, k)
    stop_edge = fs / math.pi * math.atan(wc * math.sqrt(m) / fs2)
    meta = {
        "order": order,
        "passband_edge_hz": float(passband_edge_hz),
        "passband_ripple_db": float(passband_ripple_db),
        "stopband_atten_db": float(stopband_atten_db),
        "sample_rate_hz": fs,
        "stopband_edge_hz": stop_edge,
    }
    filt = IirFilter(sections, meta)
    coeffs = filt.to_sos()
    if not np.all(np.isfinite(coeffs)) or not filt.is_stable():
        raise FilterDesignError("design produced an unstable or non-finite cascade")
    return filt
