"""Radar phase/displacement relation and synthetic chest-displacement generation.

A CW radar observing a chest at nominal distance d0 sees the cardiac
displacement x(t) as a baseband phase variation 4*pi*x(t)/lambda.  The
cardiac component of the (respiration-filtered) displacement is modelled
as two Gaussian-enveloped tone bursts per cardiac cycle: a strong early
vibration v1 and a weaker late vibration v2, plus additive noise.

Everything here is a pure function of its inputs; multi-channel synthesis
derives one RNG stream per channel from (seed, channel_index) so results
are reproducible regardless of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

LIGHT_SPEED = 299_792_458.0  # m/s

PPI_MIN_S = 0.3  # physiological clamp on cycle length
PPI_MAX_S = 2.0


@dataclass(frozen=True)
class RadarConfig:
    """CW radar geometry: carrier, wavelength and nominal target distance."""

    carrier_frequency: float  # Hz
    wavelength: float         # m, must equal c / carrier
    nominal_distance: float   # m
    light_speed: float = LIGHT_SPEED

    def __post_init__(self):
        if self.carrier_frequency <= 0 or self.wavelength <= 0:
            raise ValidationError("carrier frequency and wavelength must be positive")
        if self.nominal_distance <= 0:
            raise ValidationError("nominal distance must be positive")
        expected = self.light_speed / self.carrier_frequency
        if abs(self.wavelength - expected) > 1e-12 * expected:
            raise ValidationError(
                f"wavelength {self.wavelength!r} inconsistent with carrier "
                f"(expected {expected!r})"
            )

    @classmethod
    def from_carrier(cls, carrier_frequency: float, nominal_distance: float = 0.45) -> "RadarConfig":
        return cls(carrier_frequency, LIGHT_SPEED / carrier_frequency, nominal_distance)

    @classmethod
    def from_wavelength(cls, wavelength: float, nominal_distance: float = 0.45) -> "RadarConfig":
        return cls(LIGHT_SPEED / wavelength, wavelength, nominal_distance)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise description for the synthetic displacement.

    white_std is the standard deviation (metres) of white Gaussian noise.
    Each burst is (start_s, stop_s, amplitude_ratio): within the window,
    extra white noise with std amplitude_ratio * max|clean| emulates a
    body-movement episode.  respiration, if set, injects a residual
    low-frequency sinusoid (amplitude_m, frequency_hz).
    """

    white_std: float = 0.0
    bursts: tuple = ()
    respiration: Optional[tuple] = None

    def __post_init__(self):
        if self.white_std < 0:
            raise ValidationError("white_std must be >= 0")
        for b in self.bursts:
            if len(b) != 3 or b[1] <= b[0] or b[2] < 0:
                raise ValidationError(f"invalid burst spec {b!r}")


@dataclass(frozen=True)
class VibrationModel:
    """Two Gaussian-pulse vibrations within one cardiac cycle.

    Pulse k is a_k * cos(2*pi*f_k*t) * exp(-(t - T_k)^2 / b_k^2).
    Amplitudes are in metres, widths b_k in seconds, centre frequencies
    f_k in Hz and pulse centres T_k in seconds from cycle start.
    """

    a1: float = 1.0
    a2: float = 0.5
    b1: float = 0.04
    b2: float = 0.03
    f1: float = 18.0
    f2: float = 22.0
    T1: float = 0.15
    T2: float = 0.45
    noise: Optional[NoiseSpec] = None

    def __post_init__(self):
        if self.b1 <= 0 or self.b2 <= 0:
            raise ValidationError("pulse widths b1, b2 must be positive")
        if self.f1 < 0 or self.f2 < 0:
            raise ValidationError("central frequencies must be >= 0")
        if not self.T1 < self.T2:
            raise ValidationError("first vibration must precede the second (T1 < T2)")


@dataclass(frozen=True)
class MultiChannelSignal:
    """C synchronized time series sharing one sample rate."""

    data: np.ndarray          # (channels, samples)
    sample_rate: float        # Hz
    start_time: float = 0.0   # s

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValidationError("data must be a (channels, samples) matrix")
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples) / self.sample_rate


@dataclass(frozen=True)
class CycleTruth:
    start: float  # s, cycle start
    t1: float     # s, absolute centre of v1
    t2: float     # s, absolute centre of v2


@dataclass(frozen=True)
class SynthTruth:
    """Ground truth emitted alongside a synthetic long-term recording."""

    ppi: tuple               # cycle lengths, seconds
    cycles: tuple            # CycleTruth per cycle
    seed: int

    def as_dict(self) -> dict:
        return {
            "ppi": list(self.ppi),
            "cycles": [{"start": c.start, "T1": c.t1, "T2": c.t2} for c in self.cycles],
            "seed": self.seed,
        }


def _check_finite(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise ValidationError(f"{name} contains non-finite value at index {int(bad[0])}")
    return x


def phase_from_displacement(x: np.ndarray, cfg: RadarConfig) -> np.ndarray:
    """Baseband phase variation (rad) for a displacement series (m)."""
    x = _check_finite(x, "displacement")
    return 4.0 * np.pi * x / cfg.wavelength


def displacement_from_phase(phi: np.ndarray, cfg: RadarConfig) -> np.ndarray:
    """Inverse of :func:`phase_from_displacement`."""
    phi = _check_finite(phi, "phase")
    return phi * cfg.wavelength / (4.0 * np.pi)


def pulse_envelope(t: np.ndarray, amplitude: float, width: float, center: float) -> np.ndarray:
    """Gaussian envelope a * exp(-(t - T)^2 / b^2) of one vibration pulse."""
    return amplitude * np.exp(-((t - center) ** 2) / width**2)


def vibration_pulse(t: np.ndarray, amplitude: float, width: float,
                    freq: float, center: float) -> np.ndarray:
    """One Gaussian-enveloped tone burst; phase is referenced to t=0."""
    return np.cos(2.0 * np.pi * freq * t) * pulse_envelope(t, amplitude, width, center)


def _render_noise(n: int, sample_rate: float, spec: Optional[NoiseSpec],
                  clean_peak: float, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(n)
    if spec is None:
        return out
    if spec.white_std > 0:
        out += spec.white_std * rng.standard_normal(n)
    t = np.arange(n) / sample_rate
    for start, stop, ratio in spec.bursts:
        mask = (t >= start) & (t < stop)
        out[mask] += ratio * clean_peak * rng.standard_normal(int(mask.sum()))
    if spec.respiration is not None:
        amp, freq = spec.respiration
        out += amp * np.sin(2.0 * np.pi * freq * t)
    return out


def synth_single_cycle(vm: VibrationModel, duration: float, sample_rate: float,
                       rng_seed: int = 0) -> np.ndarray:
    """Synthesize one cardiac cycle of chest displacement.

    Deterministic for a fixed seed; with vm.noise unset the output is
    exactly v1 + v2.
    """
    if duration <= 0:
        raise ValidationError("duration must be positive")
    if sample_rate < 4.0 * max(vm.f1, vm.f2):
        raise ValidationError(
            f"sample rate {sample_rate} Hz inadequate for central frequency "
            f"{max(vm.f1, vm.f2)} Hz (need >= 4x)"
        )
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    clean = (vibration_pulse(t, vm.a1, vm.b1, vm.f1, vm.T1)
             + vibration_pulse(t, vm.a2, vm.b2, vm.f2, vm.T2))
    peak = float(np.max(np.abs(clean))) if n else 0.0
    rng = np.random.default_rng(rng_seed)
    return clean + _render_noise(n, sample_rate, vm.noise, peak, rng)


def _channel_rng(rng_seed: int, channel: int) -> np.random.Generator:
    # per-channel stream keyed on (seed, channel): parallel-safe determinism
    return np.random.default_rng([int(rng_seed), int(channel)])


def synth_long_term(vm: VibrationModel, ppi_schedule: Sequence[float],
                    channels: int = 50, channel_jitter: float = 0.0,
                    rng_seed: int = 0, sample_rate: float = 200.0,
                    nominal_cycle: float = 1.0):
    """Tile per-cycle vibrations along a PPI schedule into a multi-channel recording.

    Pulse centres scale with each cycle length: T_k_i = vm.T_k * (L_i / nominal_cycle).
    channel_jitter perturbs per-channel, per-cycle amplitudes (relative) and
    pulse centres (fraction of the cycle).  Returns the signal and the
    noise-free nominal ground truth (cycle starts, pulse centres, PPIs).
    """
    ppis = [float(p) for p in ppi_schedule]
    if not ppis:
        raise ValidationError("ppi_schedule must not be empty")
    for p in ppis:
        if not (PPI_MIN_S <= p <= PPI_MAX_S):
            raise ValidationError(f"PPI {p} s outside physiological bounds "
                                  f"[{PPI_MIN_S}, {PPI_MAX_S}]")
    if channels < 1:
        raise ValidationError("need at least one channel")
    if channel_jitter < 0:
        raise ValidationError("channel_jitter must be >= 0")
    if sample_rate < 4.0 * max(vm.f1, vm.f2):
        raise ValidationError("sample rate inadequate for vibration frequencies")

    starts = np.concatenate([[0.0], np.cumsum(ppis)])
    total = starts[-1]
    n = int(round(total * sample_rate))
    frac1 = vm.T1 / nominal_cycle
    frac2 = vm.T2 / nominal_cycle

    cycles = tuple(
        CycleTruth(start=float(s), t1=float(s + frac1 * L), t2=float(s + frac2 * L))
        for s, L in zip(starts[:-1], ppis)
    )

    data = np.zeros((channels, n))
    for c in range(channels):
        rng = _channel_rng(rng_seed, c)
        x = np.zeros(n)
        for s, L in zip(starts[:-1], ppis):
            i0 = int(round(s * sample_rate))
            i1 = min(int(round((s + L) * sample_rate)), n)
            if i1 <= i0:
                continue
            tloc = np.arange(i0, i1) / sample_rate - s
            if channel_jitter > 0:
                e = rng.standard_normal(4)
                a1 = vm.a1 * (1.0 + channel_jitter * e[0])
                a2 = vm.a2 * (1.0 + channel_jitter * e[1])
                t1 = frac1 * L + channel_jitter * L * e[2]
                t2 = frac2 * L + channel_jitter * L * e[3]
            else:
                a1, a2, t1, t2 = vm.a1, vm.a2, frac1 * L, frac2 * L
            x[i0:i1] += vibration_pulse(tloc, a1, vm.b1, vm.f1, t1)
            x[i0:i1] += vibration_pulse(tloc, a2, vm.b2, vm.f2, t2)
        peak = float(np.max(np.abs(x))) if n else 0.0
        x += _render_noise(n, sample_rate, vm.noise, peak, rng)
        data[c] = x

    signal = MultiChannelSignal(data=data, sample_rate=sample_rate)
    truth = SynthTruth(ppi=tuple(ppis), cycles=cycles, seed=int(rng_seed))
    return signal, truth
