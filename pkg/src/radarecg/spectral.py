"""Time-frequency transforms: STFT, Morlet CWT, synchrosqueezing and entropy.

The CWT is evaluated by quadrature on the signal's sample grid via the
FFT correlation theorem, using the analytic Morlet wavelet

    psi(t) = pi^(-1/4) * exp(i*mu*t) * exp(-t^2/2),
    psihat(w) = pi^(-1/4) * sqrt(2*pi) * exp(-(w - mu)^2 / 2),

with the scale-to-frequency map f = mu / (2*pi*a).  Synchrosqueezing
estimates a candidate instantaneous frequency per coefficient from the
phase derivative of W along the translation axis (central differences of
the phase angle, one-sided at the boundaries) and reassigns each included
coefficient's power to the nearest frequency bin.  Reassignment moves
power, never creates it: the total squeezed power equals the total power
of the included coefficients exactly.

Coefficients with |W| below SST_EXCLUSION_FLOOR * max|W| are excluded
from reassignment; candidate frequencies falling outside the bin range
are clipped to the edge bins so no included power is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

MORLET_CENTER_FREQUENCY = 6.0
SST_EXCLUSION_FLOOR = 1e-8
_MIN_SAMPLES_PER_OSCILLATION = 8.0


@dataclass(frozen=True)
class Spectrogram:
    """Nonnegative F x T power matrix with explicit axis coordinates."""

    power: np.ndarray   # (F, T), >= 0
    freqs: np.ndarray   # (F,), Hz, strictly ascending
    times: np.ndarray   # (T,), s, strictly ascending
    method: str         # "STFT" | "CWT" | "SST"

    def __post_init__(self):
        power = np.asarray(self.power, dtype=float)
        freqs = np.asarray(self.freqs, dtype=float)
        times = np.asarray(self.times, dtype=float)
        if power.ndim != 2 or power.shape != (freqs.size, times.size):
            raise ValidationError("power must be (len(freqs), len(times))")
        if np.any(power < 0):
            raise ValidationError("power must be nonnegative")
        if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
            raise ValidationError("freqs must be strictly ascending")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValidationError("times must be strictly ascending")
        if self.method not in ("STFT", "CWT", "SST"):
            raise ValidationError(f"unknown method {self.method!r}")
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "times", times)

    @property
    def total_power(self) -> float:
        return float(self.power.sum())


@dataclass(frozen=True)
class WaveletConfig:
    """Morlet mother wavelet and its scale grid.

    Scales are stored strictly decreasing so that the mapped frequencies
    mu / (2*pi*a) ascend, matching Spectrogram row order.
    """

    scales: np.ndarray
    center_frequency: float = MORLET_CENTER_FREQUENCY

    def __post_init__(self):
        scales = np.asarray(self.scales, dtype=float)
        if scales.ndim != 1 or scales.size == 0:
            raise ValidationError("scales must be a non-empty 1-D array")
        if np.any(scales <= 0):
            raise ValidationError("scales must be strictly positive")
        if scales.size > 1 and np.any(np.diff(scales) >= 0):
            raise ValidationError("scales must be strictly decreasing "
                                  "(ascending frequencies)")
        if self.center_frequency <= 0:
            raise ValidationError("center_frequency must be positive")
        object.__setattr__(self, "scales", scales)

    @classmethod
    def log_band(cls, freq_min: float = 1.0, freq_max: float = 25.0,
                 n_scales: int = 64,
                 center_frequency: float = MORLET_CENTER_FREQUENCY) -> "WaveletConfig":
        """Logarithmically spaced scales covering [freq_min, freq_max] Hz."""
        if not (0 < freq_min < freq_max):
            raise ValidationError("need 0 < freq_min < freq_max")
        freqs = np.geomspace(freq_min, freq_max, n_scales)
        return cls(scales=center_frequency / (2.0 * np.pi * freqs),
                   center_frequency=center_frequency)

    @property
    def frequencies(self) -> np.ndarray:
        """Hz per scale, ascending."""
        return self.center_frequency / (2.0 * np.pi * self.scales)


_WINDOWS = {
    "hann": np.hanning,
    "hamming": np.hamming,
    "rect": np.ones,
}


def stft(x: np.ndarray, sample_rate: float, window_length: int, hop: int,
         window: str = "hann", start_time: float = 0.0) -> Spectrogram:
    """Squared-magnitude windowed DFT; freqs are k*fs/window_length."""
    x = np.asarray(x, dtype=float)
    if window_length > x.size:
        raise ValidationError(f"window length {window_length} exceeds signal "
                              f"length {x.size}")
    if hop < 1:
        raise ValidationError("hop must be >= 1")
    if window not in _WINDOWS:
        raise ValidationError(f"unknown window {window!r}")
    taper = _WINDOWS[window](window_length)
    starts = np.arange(0, x.size - window_length + 1, hop)
    power = np.empty((window_length // 2 + 1, starts.size))
    for j, s in enumerate(starts):
        power[:, j] = np.abs(np.fft.rfft(x[s:s + window_length] * taper)) ** 2
    freqs = np.arange(window_length // 2 + 1) * sample_rate / window_length
    times = start_time + (starts + (window_length - 1) / 2.0) / sample_rate
    return Spectrogram(power=power, freqs=freqs, times=times, method="STFT")


def _morlet_fft(omega: np.ndarray, mu: float) -> np.ndarray:
    return np.pi ** -0.25 * np.sqrt(2.0 * np.pi) * np.exp(-0.5 * (omega - mu) ** 2)


def _check_scale_sampling(cfg: WaveletConfig, sample_rate: float) -> None:
    fmax = float(cfg.frequencies.max())
    if fmax > sample_rate / _MIN_SAMPLES_PER_OSCILLATION:
        raise ValidationError(
            f"scale too small: {fmax:.3g} Hz leaves fewer than "
            f"{_MIN_SAMPLES_PER_OSCILLATION:.0f} samples per oscillation at "
            f"{sample_rate:.3g} Hz")


def _cwt_complex(x: np.ndarray, sample_rate: float, cfg: WaveletConfig) -> np.ndarray:
    """Complex CWT coefficients, one row per scale (ascending frequency)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValidationError("empty signal")
    _check_scale_sampling(cfg, sample_rate)
    n = x.size
    support = int(np.ceil(5.0 * cfg.scales.max() * sample_rate))
    nfft = 1 << int(np.ceil(np.log2(n + 2 * support)))
    xhat = np.fft.fft(x, nfft)
    omega = 2.0 * np.pi * np.fft.fftfreq(nfft, d=1.0 / sample_rate)
    W = np.empty((cfg.scales.size, n), dtype=complex)
    for i, a in enumerate(cfg.scales):
        psihat = _morlet_fft(a * omega, cfg.center_frequency)
        W[i] = (np.fft.ifft(xhat * np.conj(psihat)) * np.sqrt(a))[:n]
    return W


def cwt(x: np.ndarray, sample_rate: float, cfg: WaveletConfig,
        hop: int = 1, start_time: float = 0.0) -> Spectrogram:
    """Morlet scalogram |W(a,b)|^2 on the signal's sample grid."""
    if hop < 1:
        raise ValidationError("hop must be >= 1")
    W = _cwt_complex(x, sample_rate, cfg)
    power = np.abs(W[:, ::hop]) ** 2
    times = start_time + np.arange(0, W.shape[1], hop) / sample_rate
    return Spectrogram(power=power, freqs=cfg.frequencies, times=times,
                       method="CWT")


def _instantaneous_frequency(W: np.ndarray, sample_rate: float) -> np.ndarray:
    """Phase derivative of W along translation, in Hz.

    Central differences of the phase angle in the interior, one-sided at
    the boundary columns.  Angle differences are taken on coefficient
    ratios so no explicit unwrapping is needed.
    """
    F, N = W.shape
    f = np.empty((F, N))
    if N >= 3:
        f[:, 1:-1] = np.angle(W[:, 2:] * np.conj(W[:, :-2])) * (sample_rate / (4.0 * np.pi))
    if N >= 2:
        f[:, 0] = np.angle(W[:, 1] * np.conj(W[:, 0])) * (sample_rate / (2.0 * np.pi))
        f[:, -1] = np.angle(W[:, -1] * np.conj(W[:, -2])) * (sample_rate / (2.0 * np.pi))
    if N == 1:
        f[:, 0] = 0.0
    return f


def sst(x: np.ndarray, sample_rate: float, cfg: WaveletConfig,
        freq_bins: int = 64, hop: int = 1, start_time: float = 0.0,
        floor_rel: float = SST_EXCLUSION_FLOOR) -> Spectrogram:
    """Synchrosqueezed scalogram: CWT power reassigned onto frequency bins.

    Bins are log-spaced across the scale-frequency range (freq_bins
    centres); each included coefficient's power is accumulated into the
    bin nearest its candidate instantaneous frequency.
    """
    if freq_bins < 8:
        raise ValidationError("freq_bins must be >= 8")
    if hop < 1:
        raise ValidationError("hop must be >= 1")
    W = _cwt_complex(x, sample_rate, cfg)
    absW = np.abs(W)
    wmax = absW.max()
    power = np.zeros((freq_bins, W.shape[1]))
    cfreqs = cfg.frequencies
    bins = np.geomspace(cfreqs[0], cfreqs[-1], freq_bins)
    if wmax > 0:
        include = absW >= floor_rel * wmax
        finst = _instantaneous_frequency(W, sample_rate)
        rows, cols = np.nonzero(include)
        fvals = np.clip(finst[rows, cols], bins[0], bins[-1])
        # nearest bin: boundaries at arithmetic midpoints of bin centres
        k = np.searchsorted(0.5 * (bins[1:] + bins[:-1]), fvals)
        np.add.at(power, (k, cols), absW[rows, cols] ** 2)
    power = power[:, ::hop]
    times = start_time + np.arange(0, W.shape[1], hop) / sample_rate
    return Spectrogram(power=power, freqs=bins, times=times, method="SST")


def pse(s: Spectrogram) -> float:
    """Power spectrogram entropy: normalized Shannon entropy over all cells.

    0 for a point mass, 1 for uniform power; undefined (rejected) for an
    all-zero spectrogram.
    """
    total = s.power.sum()
    if not total > 0:
        raise ValidationError("PSE undefined for an all-zero spectrogram")
    if s.power.size == 1:
        return 0.0
    p = s.power / total
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum() / np.log(p.size))
