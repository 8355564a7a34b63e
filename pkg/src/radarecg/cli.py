"""Command-line interface.

Subcommands: synth, spec, ppi, ecg-gen, fit, eval, linkbudget, pipeline.
Exit codes: 0 success, 2 validation/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as rio
from .errors import NumericalError, ValidationError
from .ecg_ode import generate_piece
from .link_budget import (LinkBudgetConfig, TABLE_DEFAULTS, budget_report,
                          max_range, min_detectable_power, received_power)
from .metrics import (align_traces, detect_r_peaks, mdr, pcc,
                      peak_timing_error, rmse, timing_summary, EcgTrace)
from .ode_fit import FitConfig, fit_piece
from .pipeline import PipelineConfig, SynthSpec, run_pipeline
from .ppi import PpiConfig, energy_plot, estimate_ppi
from .signal_model import NoiseSpec, VibrationModel, synth_long_term
from .spectral import WaveletConfig, cwt, pse, sst, stft


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_synth(args) -> int:
    out = _out_dir(args)
    schedule = (_parse_floats(args.ppi_list) if args.ppi_list
                else [args.ppi] * max(1, int(round(args.duration / args.ppi))))
    noise = NoiseSpec(white_std=args.noise_std)
    vm = VibrationModel(noise=noise)
    signal, truth = synth_long_term(vm, schedule, channels=args.channels,
                                    channel_jitter=args.jitter,
                                    rng_seed=args.seed,
                                    sample_rate=args.sample_rate)
    rio.write_signal_csv(out / "signal.csv", signal)
    rio.write_truth_json(out / "signal.truth.json", truth)
    print(f"wrote {out/'signal.csv'} ({signal.channels} channels, "
          f"{signal.samples} samples at {signal.sample_rate:g} Hz)")
    return 0


def cmd_spec(args) -> int:
    out = _out_dir(args)
    signal = rio.read_signal_csv(args.input)
    if not (0 <= args.channel < signal.channels):
        raise ValidationError(f"channel {args.channel} out of range")
    x = signal.data[args.channel]
    fs = signal.sample_rate
    if args.method == "stft":
        s = stft(x, fs, args.window_length, args.hop,
                 start_time=signal.start_time)
    else:
        cfg = WaveletConfig.log_band(args.fmin, args.fmax, args.scales)
        if args.method == "cwt":
            s = cwt(x, fs, cfg, start_time=signal.start_time)
        else:
            s = sst(x, fs, cfg, freq_bins=args.bins,
                    start_time=signal.start_time)
    fmt = "csv" if args.format == "csv" else "bin"
    rio.write_spectrogram(out / f"spectrogram_{args.method}", s, fmt=fmt)
    if args.pse:
        print(f"pse({args.method}) = {pse(s):.6f}")
    print(f"wrote {out}/spectrogram_{args.method}.json ({s.power.shape[0]}x"
          f"{s.power.shape[1]})")
    return 0


def cmd_ppi(args) -> int:
    out = _out_dir(args)
    signal = rio.read_signal_csv(args.input)
    fs = signal.sample_rate
    wavelet = WaveletConfig.log_band(args.fmin, args.fmax, args.scales)
    cfg = PpiConfig(segment_length=args.segment, step_length=args.step,
                    bandwidth=args.bandwidth, pooling=args.pooling)
    plots = []
    for c in range(signal.channels):
        s = sst(signal.data[c], fs, wavelet, freq_bins=args.bins,
                start_time=signal.start_time)
        plots.append(energy_plot(s, channel_id=c))
    series = estimate_ppi(plots, cfg)
    rio.write_json(out / "ppi_report.json",
                   {**series.as_dict(), "config": dataclasses.asdict(cfg)})
    vals = series.values
    print(f"{vals.size} segments, median PPI {np.median(vals):.3f} s")
    return 0


def cmd_ecg_gen(args) -> int:
    out = _out_dir(args)
    p = np.array(_parse_floats(args.p)) if args.p else np.zeros(15)
    piece = generate_piece(p, omega=args.omega, tau=args.tau,
                           steps_per_cycle=args.steps)
    rio.write_piece_csv(out / "piece.csv", piece)
    rio.write_json(out / "piece_manifest.json",
                   {"p": [float(v) for v in p], "omega": args.omega,
                    "tau": args.tau, "steps_per_cycle": args.steps})
    print(f"wrote {out/'piece.csv'} (length {piece.size})")
    return 0


def cmd_fit(args) -> int:
    out = _out_dir(args)
    target = rio.read_piece_csv(args.target)
    cfg = FitConfig(max_iterations=args.max_evals, restarts=args.restarts)
    t0 = time.perf_counter()
    result = fit_piece(target, cfg, rng_seed=args.seed)
    wall = time.perf_counter() - t0
    rio.write_json(out / "fit_report.json", {
        "p": [float(v) for v in result.p],
        "tau": result.tau,
        "residual": result.residual,
        "evaluations": result.evaluations,
        "wall_time_s": wall,
    })
    rio.write_piece_csv(out / "fitted_piece.csv", result.piece(cfg))
    print(f"residual {result.residual:.5f} after {result.evaluations} "
          f"evaluations ({wall:.1f} s)")
    return 0


def cmd_eval(args) -> int:
    out = _out_dir(args)
    recon = rio.read_trace_csv(args.recon)
    truth = rio.read_trace_csv(args.truth)
    if truth.peaks is None or "R" not in truth.peaks:
        raise ValidationError("truth trace needs R annotations "
                              "(<truth>.peaks.json sidecar)")
    if recon.peaks is None or "R" not in recon.peaks:
        recon = EcgTrace(samples=recon.samples, sample_rate=recon.sample_rate,
                         start_time=recon.start_time,
                         peaks={"R": detect_r_peaks(recon)})
    a, b = align_traces(recon, truth)
    report = mdr(recon, truth)
    types = [k for k in ("Q", "R", "S", "T")
             if recon.peaks and k in recon.peaks and k in (truth.peaks or {})]
    timing = timing_summary(peak_timing_error(recon, truth, types=types))
    payload = {"rmse": rmse(a, b), "pcc": pcc(a, b), "mdr": report.mdr,
               "mdr_detail": report.as_dict(), "timing": timing}
    rio.write_json(out / "metrics.json", payload)
    print(f"rmse {payload['rmse']:.4f}  pcc {payload['pcc']:.4f}  "
          f"mdr {payload['mdr']:.4%}")
    return 0


def cmd_linkbudget(args) -> int:
    cfg = LinkBudgetConfig(
        tx_gain_dbi=args.tx_gain, rx_gain_dbi=args.rx_gain,
        tx_power_dbm=args.tx_power, wavelength_m=args.wavelength,
        rcs_dbsm=args.rcs, bandwidth_hz=args.bandwidth,
        noise_figure_db=args.noise_figure, desired_snr_db=args.snr,
        range_m=args.range)
    report = budget_report(cfg)
    print(f"{'received power':<28}{report['received_power_dbm']:>12.2f} dBm "
          f"(at {cfg.range_m:g} m)")
    print(f"{'min detectable power':<28}{report['min_detectable_power_dbm']:>12.2f} dBm")
    print(f"{'max detectable range':<28}{report['max_range_m']:>12.3f} m")
    if args.out:
        rio.write_json(_out_dir(args) / "linkbudget.json", report)
    return 0


def _pipeline_config(args) -> PipelineConfig:
    if args.config:
        raw = rio.read_json(args.config)
        synth = SynthSpec(**raw.get("synth", {})) if "synth" in raw else SynthSpec()
        ppi_cfg = PpiConfig(**raw.get("ppi", {}))
        fit_cfg = FitConfig(**raw.get("fit", {}))
        top = {k: v for k, v in raw.items() if k not in ("synth", "ppi", "fit")}
        cfg = PipelineConfig(synth=synth, ppi=ppi_cfg, fit=fit_cfg, **top)
    else:
        synth = SynthSpec(duration=args.duration, ppi=args.ppi,
                          channels=args.channels)
        cfg = PipelineConfig(input_csv=args.input, synth=synth)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out:
        overrides["out_dir"] = args.out
    if args.format and args.format != "json":
        overrides["spectrogram_format"] = args.format
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def cmd_pipeline(args) -> int:
    cfg = _pipeline_config(args)
    result = run_pipeline(cfg)
    m = result.metrics
    if m:
        print(f"cycles {result.summary['n_cycles']}  rmse {m['rmse']:.4f}  "
              f"pcc {m['pcc']:.4f}  mdr {m['mdr']:.4%}")
    else:
        print(f"cycles {result.summary['n_cycles']}  "
              f"median PPI {result.summary['median_ppi_s']:.3f} s")
    if cfg.out_dir:
        print(f"bundle written to {cfg.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radarecg",
                                 description="radar vital-sign processing toolkit")
    ap.add_argument("--seed", type=int, default=None, help="global RNG seed")
    ap.add_argument("--config", default=None, help="JSON config file")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--format", choices=("csv", "json", "bin"), default="json")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a multi-channel recording")
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--ppi", type=float, default=0.8)
    p.add_argument("--ppi-list", default=None, help="comma-separated cycle lengths")
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--jitter", type=float, default=0.01)
    p.add_argument("--noise-std", type=float, default=0.02)
    p.add_argument("--sample-rate", type=float, default=200.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spec", help="compute a spectrogram")
    p.add_argument("--input", required=True)
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--method", choices=("stft", "cwt", "sst"), default="sst")
    p.add_argument("--window-length", type=int, default=256)
    p.add_argument("--hop", type=int, default=64)
    p.add_argument("--scales", type=int, default=64)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--fmin", type=float, default=1.0)
    p.add_argument("--fmax", type=float, default=25.0)
    p.add_argument("--pse", action="store_true", help="print the entropy")
    p.set_defaults(func=cmd_spec)

    p = sub.add_parser("ppi", help="estimate beat-to-beat intervals")
    p.add_argument("--input", required=True)
    p.add_argument("--segment", type=float, default=8.0)
    p.add_argument("--step", type=float, default=2.0)
    p.add_argument("--scales", type=int, default=48)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--fmin", type=float, default=1.0)
    p.add_argument("--fmax", type=float, default=25.0)
    p.add_argument("--bandwidth", choices=("verbatim", "scaled"), default="verbatim")
    p.add_argument("--pooling", choices=("kde", "mean"), default="kde")
    p.set_defaults(func=cmd_ppi)

    p = sub.add_parser("ecg-gen", help="generate a single-cycle ECG piece")
    p.add_argument("--p", default=None, help="15 comma-separated scalings in [-1,1]")
    p.add_argument("--omega", type=float, default=2.0 * np.pi)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=2000)
    p.set_defaults(func=cmd_ecg_gen)

    p = sub.add_parser("fit", help="fit generator parameters to a piece")
    p.add_argument("--target", required=True, help="piece CSV")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-evals", type=int, default=2000)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score a reconstruction against truth")
    p.add_argument("--recon", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("linkbudget", help="radar link budget table")
    p.add_argument("--tx-gain", type=float, default=TABLE_DEFAULTS.tx_gain_dbi)
    p.add_argument("--rx-gain", type=float, default=TABLE_DEFAULTS.rx_gain_dbi)
    p.add_argument("--tx-power", type=float, default=TABLE_DEFAULTS.tx_power_dbm)
    p.add_argument("--wavelength", type=float, default=TABLE_DEFAULTS.wavelength_m)
    p.add_argument("--rcs", type=float, default=TABLE_DEFAULTS.rcs_dbsm)
    p.add_argument("--bandwidth", type=float, default=TABLE_DEFAULTS.bandwidth_hz)
    p.add_argument("--noise-figure", type=float, default=TABLE_DEFAULTS.noise_figure_db)
    p.add_argument("--snr", type=float, default=TABLE_DEFAULTS.desired_snr_db)
    p.add_argument("--range", type=float, default=TABLE_DEFAULTS.range_m)
    p.set_defaults(func=cmd_linkbudget)

    p = sub.add_parser("pipeline", help="run the full batch pipeline")
    p.add_argument("--input", default=None, help="signal CSV (else synthesize)")
    p.add_argument("--duration", type=float, default=60.0)
    p.add_argument("--ppi", type=float, default=0.8)
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_pipeline)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
