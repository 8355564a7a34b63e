"""File formats: signal CSV, spectrogram header+payload, pieces, traces, JSON.

All text artifacts are UTF-8 with LF line endings and floats printed with
17 significant digits, so a written file is bit-reproducible for the same
inputs.  JSON is written with sorted keys and a trailing newline for the
same reason.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import ValidationError
from .metrics import EcgTrace
from .signal_model import MultiChannelSignal, SynthTruth, CycleTruth
from .spectral import Spectrogram

_FMT = "%.17g"


def _fmt(value: float) -> str:
    return _FMT % value


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_signal_csv(path, signal: MultiChannelSignal) -> Path:
    path = Path(path)
    header = "t," + ",".join(f"ch{c}" for c in range(signal.channels))
    times = signal.times
    lines = [header]
    for j in range(signal.samples):
        row = [_fmt(times[j])] + [_fmt(signal.data[c, j]) for c in range(signal.channels)]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_signal_csv(path) -> MultiChannelSignal:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if not header or header[0] != "t":
            raise ValidationError(f"{path}: expected header starting with 't'")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise ValidationError(f"{path}: column count mismatch")
    t = data[:, 0]
    if t.size < 2:
        raise ValidationError(f"{path}: need at least two samples")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise ValidationError(f"{path}: times must be strictly ascending")
    sample_rate = 1.0 / float(np.median(dt))
    return MultiChannelSignal(data=data[:, 1:].T, sample_rate=sample_rate,
                              start_time=float(t[0]))


def write_truth_json(path, truth: SynthTruth) -> Path:
    return write_json(path, truth.as_dict())


def read_truth_json(path) -> SynthTruth:
    d = read_json(path)
    cycles = tuple(CycleTruth(start=c["start"], t1=c["T1"], t2=c["T2"])
                   for c in d["cycles"])
    return SynthTruth(ppi=tuple(d["ppi"]), cycles=cycles, seed=int(d["seed"]))


def write_spectrogram(base_path, s: Spectrogram, fmt: str = "bin") -> Path:
    """Write <base>.json header plus <base>.<fmt> row-major payload."""
    if fmt not in ("csv", "bin"):
        raise ValidationError(f"unknown spectrogram format {fmt!r}")
    base = Path(base_path)
    payload = base.with_suffix("." + fmt)
    if fmt == "bin":
        payload.write_bytes(np.ascontiguousarray(s.power, dtype="<f8").tobytes())
    else:
        lines = [",".join(_fmt(v) for v in row) for row in s.power]
        payload.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    header = {
        "method": s.method,
        "freqs": [float(f) for f in s.freqs],
        "times": [float(t) for t in s.times],
        "format": fmt,
        "payload": payload.name,
        "shape": list(s.power.shape),
    }
    return write_json(base.with_suffix(".json"), header)


def read_spectrogram(header_path) -> Spectrogram:
    header_path = Path(header_path)
    h = read_json(header_path)
    payload = header_path.parent / h["payload"]
    shape = tuple(h["shape"])
    if h["format"] == "bin":
        power = np.frombuffer(payload.read_bytes(), dtype="<f8").reshape(shape)
    else:
        power = np.loadtxt(payload, delimiter=",", ndmin=2)
    return Spectrogram(power=power, freqs=np.array(h["freqs"]),
                       times=np.array(h["times"]), method=h["method"])


def write_piece_csv(path, piece: np.ndarray) -> Path:
    path = Path(path)
    lines = ["index,z"] + [f"{i},{_fmt(v)}" for i, v in enumerate(piece)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_piece_csv(path) -> np.ndarray:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1]


def write_trace_csv(path, trace: EcgTrace) -> Path:
    """Trace as t,value rows; peak annotations go to <stem>.peaks.json."""
    path = Path(path)
    times = trace.times
    lines = ["t,value"] + [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(times, trace.samples)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    if trace.peaks:
        write_json(path.with_suffix(".peaks.json"),
                   {k: [int(i) for i in v] for k, v in trace.peaks.items()})
    return path


def read_trace_csv(path) -> EcgTrace:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    if t.size < 2:
        raise ValidationError(f"{path}: need at least two samples")
    sample_rate = 1.0 / float(np.median(np.diff(t)))
    peaks_path = path.with_suffix(".peaks.json")
    peaks = None
    if peaks_path.exists():
        peaks = {k: np.array(v, dtype=int) for k, v in read_json(peaks_path).items()}
    return EcgTrace(samples=data[:, 1], sample_rate=sample_rate,
                    start_time=float(t[0]), peaks=peaks)


def bundle_hash(directory) -> str:
    """SHA-256 over every file in a directory tree, in sorted path order."""
    directory = Path(directory)
    digest = hashlib.sha256()
    for p in sorted(directory.rglob("*")):
        if p.is_file():
            digest.update(p.relative_to(directory).as_posix().encode())
            digest.update(p.read_bytes())
    return digest.hexdigest()
