"""Batch orchestration: signal -> spectrograms -> PPI -> per-cycle ECG -> metrics.

Stages
------
1. input: load a signal CSV or synthesize a recording (with ground truth).
2. spectral: per-channel synchrosqueezed spectrograms reduced to energy
   plots, plus one spectrogram of the channel-mean displacement.
3. ppi: windowed multi-channel KDE-mode interval estimation.
4. anchors: beat events detected on the aggregate energy plot; cycle
   boundaries are midpoints between consecutive anchors.
5. segments: 4-second band-limited spectrogram slices per cycle.
6. fit: one ECG piece per cycle, R peak placed one electromechanical lag
   ahead of the detected vibration.
7. concat: pieces resampled to their cycle lengths and concatenated.
8. metrics: against the synthetic ground-truth ECG, when available.

Per-channel and per-cycle work items are independent; with threads > 1
they run on a thread pool and are merged by index, so results do not
depend on the worker count.  Artifacts carry no timestamps: a fixed
config and seed reproduce byte-identical output bundles.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import io as rio
from .errors import NumericalError, ValidationError
from .ecg_ode import PIECE_LENGTH, generate_piece, piece_peak_indices
from .metrics import (EcgTrace, align_traces, mdr, pcc, peak_timing_error,
                      rmse, timing_summary)
from .ode_fit import FitConfig, TraceFit, fit_trace, _template
from .ppi import EnergyPlot, PpiConfig, PpiSeries, detect_peaks, energy_plot, estimate_ppi
from .signal_model import (MultiChannelSignal, NoiseSpec, SynthTruth,
                           VibrationModel, synth_long_term, PPI_MIN_S, PPI_MAX_S)
from .spectral import Spectrogram, WaveletConfig, sst


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic input description for the pipeline."""

    duration: float = 60.0          # s, used with a constant schedule
    ppi: float = 0.8                # s, constant cycle length
    ppi_list: tuple = ()            # explicit schedule; overrides duration/ppi
    channels: int = 16
    jitter: float = 0.01
    noise_std: float = 0.02         # m, white noise in every channel
    corrupt_channels: int = 0       # leading channels replaced by pure noise
    corrupt_scale: float = 3.0      # noise std relative to clean peak
    burst: Optional[tuple] = None   # (start_s, stop_s, amplitude_ratio)

    def schedule(self) -> list:
        if self.ppi_list:
            return list(self.ppi_list)
        n = max(1, int(round(self.duration / self.ppi)))
        return [self.ppi] * n


@dataclass(frozen=True)
class PipelineConfig:
    input_csv: Optional[str] = None
    synth: SynthSpec = field(default_factory=SynthSpec)
    freq_min: float = 1.0
    freq_max: float = 25.0
    n_scales: int = 48
    sst_bins: int = 71
    ppi: PpiConfig = field(default_factory=PpiConfig)
    fit: FitConfig = field(default_factory=lambda: FitConfig(
        max_iterations=400, restarts=2, polish=1))
    window_s: float = 4.0           # slice window
    slice_rate: float = 30.0        # Hz, slice time resolution
    slice_cols: int = 118
    output_rate: float = 200.0      # Hz of the reconstructed trace
    seed: int = 0
    threads: int = 1
    out_dir: Optional[str] = None
    spectrogram_format: str = "bin"


@dataclass(frozen=True)
class CycleSegment:
    power: np.ndarray   # (F_band, slice_cols)
    freqs: np.ndarray
    times: np.ndarray
    center: float
    flag: str           # "ok" | "padded"


@dataclass
class PipelineResult:
    signal: MultiChannelSignal
    truth: Optional[SynthTruth]
    ppi_series: PpiSeries
    segments: list
    fits: list
    recon: EcgTrace
    truth_trace: Optional[EcgTrace]
    metrics: Optional[dict]
    summary: dict


def _stage(name):
    """Re-raise stage failures with the stage name attached."""
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, (ValidationError, NumericalError)):
                raise type(exc)(f"stage {name}: {exc}") from exc
            return False
    return _Ctx()


def slice_cycles(s: Spectrogram, ppi: PpiSeries, window_s: float = 4.0,
                 band: Tuple[float, float] = (1.0, 25.0),
                 output_rate: float = 30.0, columns: int = 118) -> List[CycleSegment]:
    """Band-limited, fixed-size spectrogram slice per cardiac cycle.

    Each slice covers window_s seconds centred on the cycle, rows cropped
    to the band, columns resampled to output_rate and centre-cropped from
    window_s * output_rate down to `columns`.  Cycles come from the
    series' beat anchors when present, otherwise from accumulating the
    segment estimates from the start of the spectrogram.  Slices reaching
    outside the covered span are zero-padded and flagged.
    """
    if not ppi.estimates:
        raise ValidationError("empty PPI series")
    raw_cols = int(round(window_s * output_rate))
    if columns > raw_cols:
        raise ValidationError("columns exceeds window_s * output_rate")
    t0, t1 = float(s.times[0]), float(s.times[-1])
    if ppi.anchors:
        centers = list(ppi.anchors)
    else:
        starts = ppi.segment_starts
        values = ppi.values
        centers = []
        pos = t0
        while True:
            j = int(np.searchsorted(starts, pos, side="right")) - 1
            length = float(values[max(j, 0)])
            if pos + length > t1 + 1e-9:
                break
            centers.append(pos + 0.5 * length)
            pos += length
        if not centers:
            raise ValidationError("PPI series spans no full cycle")

    row_mask = (s.freqs >= band[0]) & (s.freqs <= band[1])
    freqs = s.freqs[row_mask]
    power_band = s.power[row_mask]
    drop_left = (raw_cols - columns) // 2
    segments = []
    for c in centers:
        tk = c - window_s / 2.0 + np.arange(raw_cols) / output_rate
        tk = tk[drop_left:drop_left + columns]
        seg = np.empty((freqs.size, columns))
        for i in range(freqs.size):
            seg[i] = np.interp(tk, s.times, power_band[i], left=0.0, right=0.0)
        flag = "ok" if (tk[0] >= t0 - 1e-9 and tk[-1] <= t1 + 1e-9) else "padded"
        segments.append(CycleSegment(power=seg, freqs=freqs, times=tk,
                                     center=float(c), flag=flag))
    return segments


def concat_pieces(pieces: Sequence[np.ndarray], ppi, output_rate: float) -> EcgTrace:
    """Resample each fixed-length piece to its cycle length and concatenate.

    `ppi` is a sequence of per-cycle lengths in seconds (or a PpiSeries,
    whose estimates are used in order, one per piece).
    """
    if isinstance(ppi, PpiSeries):
        lengths = [p for _, p in ppi.estimates]
    else:
        lengths = [float(v) for v in ppi]
    if len(pieces) != len(lengths):
        raise ValidationError(f"{len(pieces)} pieces vs {len(lengths)} PPI entries")
    if output_rate <= 0:
        raise ValidationError("output_rate must be positive")
    chunks = []
    for piece, length in zip(pieces, lengths):
        piece = np.asarray(piece, dtype=float)
        n_out = int(round(length * output_rate))
        if n_out < 1:
            raise ValidationError(f"cycle of {length} s too short for rate {output_rate}")
        # sample j sits at phase (j / output_rate) / length of the cycle
        idx = np.arange(n_out) / output_rate / length * piece.size
        chunks.append(np.interp(idx, np.arange(piece.size), piece))
    return EcgTrace(samples=np.concatenate(chunks), sample_rate=output_rate)


def _map_parallel(fn, items, threads):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _synthesize(cfg: PipelineConfig):
    spec = cfg.synth
    noise = NoiseSpec(white_std=spec.noise_std,
                      bursts=(spec.burst,) if spec.burst else ())
    vm = VibrationModel(noise=noise)
    signal, truth = synth_long_term(vm, spec.schedule(), channels=spec.channels,
                                    channel_jitter=spec.jitter, rng_seed=cfg.seed)
    if spec.corrupt_channels:
        data = signal.data.copy()
        peak = float(np.max(np.abs(data)))
        for c in range(min(spec.corrupt_channels, spec.channels)):
            rng = np.random.default_rng([cfg.seed, 9999, c])
            data[c] = spec.corrupt_scale * peak * 0.1 * rng.standard_normal(data.shape[1])
        signal = MultiChannelSignal(data=data, sample_rate=signal.sample_rate,
                                    start_time=signal.start_time)
    return signal, truth


def _annotate(pieces_peaks, lengths, output_rate, start_time):
    """Map per-piece peak indices onto the concatenated sample grid."""
    peaks = {k: [] for k in ("P", "Q", "R", "S", "T")}
    offset = 0
    for pk, length in zip(pieces_peaks, lengths):
        n_out = int(round(length * output_rate))
        for kind, idx in pk.items():
            j = min(int(round(idx * n_out / PIECE_LENGTH)), n_out - 1)
            peaks[kind].append(offset + j)
        offset += n_out
    return {k: np.array(sorted(v), dtype=int) for k, v in peaks.items() if v}


def _truth_tau(r_phase: float, template_r: int, period: float) -> float:
    """Left shift placing the template R peak at the given cycle phase."""
    r_target = int(round(PIECE_LENGTH * r_phase)) % PIECE_LENGTH
    return ((template_r - r_target) % PIECE_LENGTH) * period / PIECE_LENGTH


def build_truth_trace(truth: SynthTruth, lag: float, output_rate: float,
                      steps_per_cycle: int = 2000) -> EcgTrace:
    """Reference ECG with R peaks one lag ahead of each true v1 event."""
    template_r = int(np.argmax(generate_piece(np.zeros(15),
                                              steps_per_cycle=steps_per_cycle)))
    pieces, peak_maps = [], []
    for cyc, length in zip(truth.cycles, truth.ppi):
        omega = 2.0 * np.pi / length
        r_phase = ((cyc.t1 - lag - cyc.start) % length) / length
        tau = _truth_tau(r_phase, template_r, length)
        pieces.append(generate_piece(np.zeros(15), omega=omega, tau=tau,
                                     steps_per_cycle=steps_per_cycle))
        peak_maps.append(piece_peak_indices(np.zeros(15), omega=omega, tau=tau,
                                            steps_per_cycle=steps_per_cycle))
    trace = concat_pieces(pieces, list(truth.ppi), output_rate)
    peaks = _annotate(peak_maps, list(truth.ppi), output_rate,
                      truth.cycles[0].start)
    return EcgTrace(samples=trace.samples, sample_rate=output_rate,
                    start_time=truth.cycles[0].start, peaks=peaks)


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    # 1. input
    with _stage("input"):
        if cfg.input_csv:
            signal = rio.read_signal_csv(cfg.input_csv)
            truth = None
            truth_path = Path(cfg.input_csv).with_suffix(".truth.json")
            if truth_path.exists():
                truth = rio.read_truth_json(truth_path)
        else:
            signal, truth = _synthesize(cfg)

    fs = signal.sample_rate
    wavelet = WaveletConfig.log_band(cfg.freq_min, cfg.freq_max, cfg.n_scales)

    # 2. spectral: per-channel energy plots + aggregate spectrogram
    with _stage("spectral"):
        def channel_energy(c):
            spec = sst(signal.data[c], fs, wavelet, freq_bins=cfg.sst_bins,
                       start_time=signal.start_time)
            return energy_plot(spec, channel_id=c)

        plots = _map_parallel(channel_energy, range(signal.channels), cfg.threads)
        mean_disp = signal.data.mean(axis=0)
        agg_sst = sst(mean_disp, fs, wavelet, freq_bins=cfg.sst_bins,
                      start_time=signal.start_time)
        agg_energy = energy_plot(agg_sst, channel_id=-1)

    # 3. interval estimation
    with _stage("ppi"):
        series = estimate_ppi(plots, cfg.ppi)
        median_ppi = float(np.median(series.values))

    # 4. beat anchors on the aggregate energy plot
    with _stage("anchors"):
        anchor_cfg = dataclasses.replace(cfg.ppi,
                                         peak_min_distance=0.6 * median_ppi)
        anchors = detect_peaks(agg_energy, anchor_cfg)
        if anchors.size < 2:
            raise ValidationError("fewer than two beat events detected")
        series = dataclasses.replace(series, anchors=tuple(float(a) for a in anchors))

    # 5. cycle grid: midpoint boundaries around each anchor
    with _stage("cycles"):
        mids = 0.5 * (anchors[1:] + anchors[:-1])
        t_first = max(float(signal.times[0]), anchors[0] - 0.5 * median_ppi)
        t_last = min(float(signal.times[-1]), anchors[-1] + 0.5 * median_ppi)
        bounds = np.concatenate([[t_first], mids, [t_last]])
        lengths = np.clip(np.diff(bounds), PPI_MIN_S, PPI_MAX_S)

    # 6. per-cycle spectrogram slices
    with _stage("segments"):
        segments = slice_cycles(agg_sst, series, window_s=cfg.window_s,
                                band=(cfg.freq_min, cfg.freq_max),
                                output_rate=cfg.slice_rate, columns=cfg.slice_cols)

    # 7. per-cycle piece fitting on the mean displacement
    with _stage("fit"):
        def fit_cycle(i):
            b0 = bounds[i]
            i0 = int(round((b0 - signal.start_time) * fs))
            i1 = int(round((bounds[i + 1] - signal.start_time) * fs))
            cycle_x = mean_disp[max(i0, 0):max(i1, i0 + 1)]
            try:
                return fit_trace(cycle_x, float(lengths[i]), cfg.fit,
                                 sample_rate=fs, rng_seed=cfg.seed + i)
            except ValidationError as e:
                raise ValidationError(f"cycle {i}: {e}") from e

        fits: List[TraceFit] = _map_parallel(fit_cycle, range(len(lengths)),
                                             cfg.threads)

    # 8. concatenation + annotations
    with _stage("concat"):
        recon_core = concat_pieces([f.piece for f in fits], list(lengths),
                                   cfg.output_rate)
        peaks = _annotate([f.peak_indices for f in fits], list(lengths),
                          cfg.output_rate, float(bounds[0]))
        recon = EcgTrace(samples=recon_core.samples, sample_rate=cfg.output_rate,
                         start_time=float(bounds[0]), peaks=peaks)

    # 9. metrics against ground truth
    truth_trace = None
    metrics_report = None
    if truth is not None:
        with _stage("metrics"):
            truth_trace = build_truth_trace(truth, cfg.fit.electromechanical_lag,
                                            cfg.output_rate)
            a, b = align_traces(recon, truth_trace)
            report = mdr(recon, truth_trace)
            timing = timing_summary(peak_timing_error(recon, truth_trace))
            metrics_report = {"rmse": rmse(a, b), "pcc": pcc(a, b),
                              "mdr": report.mdr, "mdr_detail": report.as_dict(),
                              "timing": timing}

    summary = {
        "seed": cfg.seed,
        "channels": signal.channels,
        "duration_s": signal.samples / fs,
        "n_cycles": len(lengths),
        "ppi": series.as_dict(),
        "median_ppi_s": median_ppi,
        "fit_residuals": [f.fit.residual for f in fits],
        "metrics": metrics_report,
    }

    result = PipelineResult(signal=signal, truth=truth, ppi_series=series,
                            segments=segments, fits=fits, recon=recon,
                            truth_trace=truth_trace, metrics=metrics_report,
                            summary=summary)
    if cfg.out_dir:
        with _stage("artifacts"):
            _persist(cfg, result, agg_sst)
    return result


def _persist(cfg: PipelineConfig, result: PipelineResult, agg_sst: Spectrogram):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rio.write_spectrogram(out / "spectrogram_mean", agg_sst,
                          fmt=cfg.spectrogram_format)
    rio.write_json(out / "ppi_report.json",
                   {**result.ppi_series.as_dict(),
                    "config": dataclasses.asdict(cfg.ppi)})
    pieces = np.array([f.piece for f in result.fits])
    rio.write_json(out / "pieces_manifest.json", {
        "cycles": [{"index": i,
                    "p": [float(v) for v in f.fit.p],
                    "tau": f.fit.tau,
                    "residual": f.fit.residual,
                    "r_index": f.r_index}
                   for i, f in enumerate(result.fits)],
    })
    lines = [",".join(_piece_fmt(v) for v in row) for row in pieces]
    (out / "pieces.csv").write_text("\n".join(lines) + "\n",
                                    encoding="utf-8", newline="\n")
    rio.write_trace_csv(out / "recon.csv", result.recon)
    if result.truth_trace is not None:
        rio.write_trace_csv(out / "truth.csv", result.truth_trace)
    rio.write_json(out / "summary.json", result.summary)


def _piece_fmt(v: float) -> str:
    return "%.17g" % v
