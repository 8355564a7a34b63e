"""Evaluation of reconstructed ECG against ground truth.

Covers plain morphological agreement (RMSE, Pearson correlation), the
three-rule missed-detection rate for R peaks, and per-type absolute peak
timing errors.  A ground-truth beat counts as missed when any of:

  1. no reconstructed R peak lies within 0.15 s of it,
  2. the matched reconstructed R has another reconstructed R closer
     than 0.3 s,
  3. the matched R's amplitude is more than 30% below the ground-truth
     R amplitude (both measured against the local isoelectric baseline,
     the median of a +-0.3 s beat window).

Matching is nearest-neighbour in time, each reconstructed peak usable
once, earlier truth beats served first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from .errors import ValidationError

RULE1_TOLERANCE_S = 0.15
RULE2_NEIGHBOR_S = 0.3
RULE3_AMPLITUDE_FRACTION = 0.7
BASELINE_WINDOW_S = 0.3
PEAK_TYPES = ("P", "Q", "R", "S", "T")


@dataclass(frozen=True)
class EcgTrace:
    """Single-channel ECG series with optional per-type peak annotations."""

    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0
    peaks: Optional[dict] = None   # peak type -> sorted sample indices

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValidationError("samples must be 1-D")
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        if self.peaks is not None:
            clean = {}
            for kind, idx in self.peaks.items():
                if kind not in PEAK_TYPES:
                    raise ValidationError(f"unknown peak type {kind!r}")
                idx = np.asarray(idx, dtype=int)
                if idx.size and (idx.min() < 0 or idx.max() >= samples.size):
                    raise ValidationError(f"{kind} peak index out of bounds")
                if idx.size > 1 and np.any(np.diff(idx) <= 0):
                    raise ValidationError(f"{kind} peak indices must be strictly increasing")
                clean[kind] = idx
            object.__setattr__(self, "peaks", clean)
        object.__setattr__(self, "samples", samples)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    def peak_times(self, kind: str) -> np.ndarray:
        if self.peaks is None or kind not in self.peaks:
            return np.array([])
        return self.start_time + self.peaks[kind] / self.sample_rate


@dataclass(frozen=True)
class MdrReport:
    total_beats: int
    missed: int
    rule1: int
    rule2: int
    rule3: int

    @property
    def mdr(self) -> float:
        return self.missed / self.total_beats

    def as_dict(self) -> dict:
        return {"total_beats": self.total_beats, "missed": self.missed,
                "mdr": self.mdr,
                "by_rule": {"timing": self.rule1, "neighbor": self.rule2,
                            "amplitude": self.rule3}}


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 1:
        raise ValidationError("series must share a nonzero length")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def pcc(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValidationError("series must share length >= 2")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValidationError("Pearson correlation undefined for constant input")
    am = a - a.mean()
    bm = b - b.mean()
    return float((am @ bm) / np.sqrt((am @ am) * (bm @ bm)))


def detect_r_peaks(trace: EcgTrace) -> np.ndarray:
    """Indices of local maxima above half the trace maximum, >= 0.3 s apart."""
    v = trace.samples
    if v.size == 0:
        raise ValidationError("empty trace")
    vmax = float(v.max())
    if np.ptp(v) == 0 or vmax <= 0:
        return np.array([], dtype=int)
    distance = max(1, int(round(RULE2_NEIGHBOR_S * trace.sample_rate)))
    idx, _ = find_peaks(v, height=0.5 * vmax, distance=distance)
    return idx


def _baseline_relative_amplitude(trace: EcgTrace, time: float) -> float:
    i = int(round((time - trace.start_time) * trace.sample_rate))
    i = min(max(i, 0), trace.samples.size - 1)
    half = max(1, int(round(BASELINE_WINDOW_S * trace.sample_rate)))
    lo = max(0, i - half)
    hi = min(trace.samples.size, i + half + 1)
    baseline = float(np.median(trace.samples[lo:hi]))
    return float(trace.samples[i] - baseline)


def _match_beats(truth_times: np.ndarray, recon_times: np.ndarray):
    """Nearest-neighbour matching, recon peaks single-use, truth order first."""
    used = np.zeros(recon_times.size, dtype=bool)
    matches = []
    for t in truth_times:
        free = np.flatnonzero(~used)
        if free.size == 0:
            matches.append(None)
            continue
        j = free[np.argmin(np.abs(recon_times[free] - t))]
        used[j] = True
        matches.append(int(j))
    return matches


def mdr(recon: EcgTrace, truth: EcgTrace) -> MdrReport:
    """Missed-detection report for truth R beats against reconstructed peaks."""
    truth_times = truth.peak_times("R")
    if truth_times.size == 0:
        raise ValidationError("truth trace carries no R annotations")
    if recon.peaks is not None and "R" in recon.peaks:
        recon_idx = recon.peaks["R"]
    else:
        recon_idx = detect_r_peaks(recon)
    recon_times = recon.start_time + np.asarray(recon_idx, dtype=float) / recon.sample_rate

    matches = _match_beats(truth_times, recon_times)
    rule1 = rule2 = rule3 = missed = 0
    for t, j in zip(truth_times, matches):
        beat_missed = False
        if j is None or abs(recon_times[j] - t) > RULE1_TOLERANCE_S:
            rule1 += 1
            beat_missed = True
        if j is not None:
            others = np.delete(recon_times, j)
            if others.size and np.min(np.abs(others - recon_times[j])) < RULE2_NEIGHBOR_S:
                rule2 += 1
                beat_missed = True
            amp_recon = _baseline_relative_amplitude(recon, recon_times[j])
            amp_truth = _baseline_relative_amplitude(truth, t)
            if amp_recon < RULE3_AMPLITUDE_FRACTION * amp_truth:
                rule3 += 1
                beat_missed = True
        if beat_missed:
            missed += 1
    return MdrReport(total_beats=int(truth_times.size), missed=missed,
                     rule1=rule1, rule2=rule2, rule3=rule3)


def _beat_passes_rules(truth: EcgTrace, recon: EcgTrace, t: float,
                       rt: float) -> bool:
    if abs(rt - t) > RULE1_TOLERANCE_S:
        return False
    amp_recon = _baseline_relative_amplitude(recon, rt)
    amp_truth = _baseline_relative_amplitude(truth, t)
    return amp_recon >= RULE3_AMPLITUDE_FRACTION * amp_truth


def peak_timing_error(recon: EcgTrace, truth: EcgTrace,
                      types: Sequence[str] = ("Q", "R", "S", "T")) -> Dict[str, np.ndarray]:
    """Absolute per-type timing errors over beats that survive the MDR rules.

    Both traces must carry annotations for the requested types; each
    annotated peak is associated with the beat whose R peak is nearest.
    """
    truth_r = truth.peak_times("R")
    if truth_r.size == 0:
        raise ValidationError("truth trace carries no R annotations")
    recon_r = recon.peak_times("R")
    if recon_r.size == 0:
        raise ValidationError("recon trace carries no R annotations")
    matches = _match_beats(truth_r, recon_r)
    recon_other = np.delete(recon_r, [j for j in matches if j is not None])

    errors: Dict[str, list] = {k: [] for k in types}
    matched = 0
    for t, j in zip(truth_r, matches):
        if j is None:
            continue
        rt = recon_r[j]
        # corrupt-beat filter: rule-1 timing and rule-3 amplitude
        if not _beat_passes_rules(truth, recon, t, rt):
            continue
        if recon_other.size and np.min(np.abs(recon_other - rt)) < RULE2_NEIGHBOR_S:
            continue
        matched += 1
        for kind in types:
            tt = truth.peak_times(kind)
            rr = recon.peak_times(kind)
            if tt.size == 0 or rr.size == 0:
                continue
            t_kind = tt[np.argmin(np.abs(tt - t))]
            r_kind = rr[np.argmin(np.abs(rr - rt))]
            errors[kind].append(abs(r_kind - t_kind))
    if matched == 0:
        raise ValidationError("no beats survived matching and corruption filtering")
    return {k: np.asarray(v) for k, v in errors.items()}


def timing_summary(errors: Dict[str, np.ndarray]) -> dict:
    out = {}
    for kind, arr in errors.items():
        if arr.size:
            out[kind] = {"median": float(np.median(arr)),
                         "p90": float(np.percentile(arr, 90))}
        else:
            out[kind] = {"median": None, "p90": None}
    return out


def align_traces(a: EcgTrace, b: EcgTrace) -> Tuple[np.ndarray, np.ndarray]:
    """Resample the lower-rate trace to the higher rate over the common span."""
    rate = max(a.sample_rate, b.sample_rate)
    t0 = max(a.start_time, b.start_time)
    t1 = min(a.times[-1], b.times[-1])
    if t1 <= t0:
        raise ValidationError("traces do not overlap in time")
    grid = np.arange(t0, t1, 1.0 / rate)
    return (np.interp(grid, a.times, a.samples),
            np.interp(grid, b.times, b.samples))
