"""Dynamical single-cycle ECG synthesis on a limit cycle.

A 3-D state (x, y, z) orbits the unit circle at angular velocity omega;
five Gaussian gradient terms anchored at angles theta_ef pull the z
component up or down as the trajectory passes each of the P, Q, R, S, T
events, and -z relaxes it back to the isoelectric line:

    dx/dt = alpha(x,y) x - omega y
    dy/dt = alpha(x,y) y + omega x
    dz/dt = -sum_ef a_ef dtheta_ef exp(-dtheta_ef^2 / (2 b_ef^2)) - z

with alpha = 1 - sqrt(x^2 + y^2) and theta = atan2(y, x).

dtheta_ef handling: the default "symmetric" mode uses the signed branch
difference theta - theta_ef (each event is a symmetric bump fired once
per revolution, matching the original dynamical ECG model's remainder
semantics); "literal" folds the difference into [0, 2*pi), which makes
each bump one-sided.  The default matters here because theta_T = 135 deg
sits close to the branch cut: folding into (-pi, pi] would let the T
event's tail wrap around and distort the start of the cycle.

Integration is forward Euler from (x, y, z) = (-1, 0, 0), i.e. theta
starts at -pi, between the T and P events, so one period traverses one
full PQRST sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .errors import NumericalError, ValidationError
from .metrics import EcgTrace

# amplitude, width (rad), angle (rad) per event, ordered P, Q, R, S, T
DEFAULT_AMPLITUDES = np.array([5.0, -100.0, 480.0, -120.0, 8.0])
DEFAULT_WIDTHS = np.array([0.25, 0.1, 0.1, 0.1, 0.4])
DEFAULT_ANGLES = np.deg2rad(np.array([-15.0, 25.0, 40.0, 60.0, 135.0]))

ANGLE_NUDGE_RAD = np.deg2rad(10.0)  # scaling range of the per-event angle offset
MIN_WIDTH_RAD = 0.01
PIECE_LENGTH = 200
DEFAULT_STEPS_PER_CYCLE = 2000
_DIVERGENCE_LIMIT = 1e6
_MODES = {"symmetric": 0, "literal": 1}


@dataclass(frozen=True)
class OdeParams:
    """Five-peak parameter set plus angular velocity and output lag."""

    amplitudes: np.ndarray   # model units, one per P,Q,R,S,T
    widths: np.ndarray       # rad
    angles: np.ndarray       # rad, strictly increasing in (-pi, pi]
    omega: float             # rad/s
    tau: float = 0.0         # s, left shift applied to the solved cycle

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=float)
        widths = np.asarray(self.widths, dtype=float)
        angles = np.asarray(self.angles, dtype=float)
        if not (amplitudes.shape == widths.shape == angles.shape == (5,)):
            raise ValidationError("need exactly five peak parameter triples")
        if np.any(widths <= 0):
            raise ValidationError("peak widths must be positive")
        if np.any(np.diff(angles) <= 0):
            raise ValidationError("peak angles must be strictly increasing")
        if self.omega <= 0:
            raise ValidationError("omega must be positive")
        if self.tau < 0:
            raise ValidationError("tau must be >= 0")
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "angles", angles)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    @classmethod
    def defaults(cls, omega: float = 2.0 * np.pi, tau: float = 0.0) -> "OdeParams":
        return cls(DEFAULT_AMPLITUDES.copy(), DEFAULT_WIDTHS.copy(),
                   DEFAULT_ANGLES.copy(), omega, tau)


def scale_defaults(p: np.ndarray, omega: float = 2.0 * np.pi,
                   tau: float = 0.0) -> OdeParams:
    """Map 15 scaling values in [-1, 1] onto the default parameter set.

    Amplitudes and widths scale multiplicatively as default * (1 + p);
    angles receive an additive nudge p * 10 deg.  Widths are floored at
    0.01 rad.  Angles are kept strictly increasing (minimum separation
    0.01 rad) so every point of the search box yields a usable parameter
    set; with the default angle gaps this only engages for nudges beyond
    +-7.5 deg on the Q/R pair.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (15,):
        raise ValidationError("expected 15 scaling values")
    if np.any(np.abs(p) > 1.0):
        raise ValidationError("scaling values must lie in [-1, 1]")
    amplitudes = DEFAULT_AMPLITUDES * (1.0 + p[0:5])
    widths = np.maximum(DEFAULT_WIDTHS * (1.0 + p[5:10]), MIN_WIDTH_RAD)
    angles = DEFAULT_ANGLES + p[10:15] * ANGLE_NUDGE_RAD
    for k in range(1, 5):
        if angles[k] <= angles[k - 1] + MIN_WIDTH_RAD:
            angles[k] = angles[k - 1] + MIN_WIDTH_RAD
    return OdeParams(amplitudes, widths, angles, omega, tau)


def _delta_theta(theta: float, angles: np.ndarray, mode: str) -> np.ndarray:
    d = theta - angles
    if mode == "literal":
        d = np.mod(d, 2.0 * np.pi)
    elif mode != "symmetric":
        raise ValidationError(f"unknown delta-theta mode {mode!r}")
    return d


def rhs(state, params: OdeParams, mode: str = "symmetric"):
    """Right-hand side of the cycle dynamics at one state."""
    x, y, z = (float(v) for v in state)
    if not all(np.isfinite((x, y, z))):
        raise ValidationError("state must be finite")
    alpha = 1.0 - np.hypot(x, y)
    theta = np.arctan2(y, x)
    d = _delta_theta(theta, params.angles, mode)
    dz = -float(np.sum(params.amplitudes * d * np.exp(-d**2 / (2.0 * params.widths**2)))) - z
    return (alpha * x - params.omega * y,
            alpha * y + params.omega * x,
            dz)


@njit(cache=True)
def _euler_loop(a, b, th, omega, steps, mode):
    h = (2.0 * np.pi / omega) / steps
    out = np.empty((steps + 1, 3))
    x, y, z = -1.0, 0.0, 0.0
    out[0, 0], out[0, 1], out[0, 2] = x, y, z
    for i in range(steps):
        alpha = 1.0 - np.sqrt(x * x + y * y)
        theta = np.arctan2(y, x)
        dz = -z
        for k in range(5):
            d = theta - th[k]
            if mode == 1:
                d = d % (2.0 * np.pi)
            dz -= a[k] * d * np.exp(-d * d / (2.0 * b[k] * b[k]))
        x, y, z = x + h * (alpha * x - omega * y), y + h * (alpha * y + omega * x), z + h * dz
        if (abs(x) > _DIVERGENCE_LIMIT or abs(y) > _DIVERGENCE_LIMIT
                or abs(z) > _DIVERGENCE_LIMIT or not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z))):
            return out, i + 1
        out[i + 1, 0], out[i + 1, 1], out[i + 1, 2] = x, y, z
    return out, -1


def solve_trajectory(params: OdeParams, steps_per_cycle: int = DEFAULT_STEPS_PER_CYCLE,
                     mode: str = "symmetric", cycles: int = 1) -> np.ndarray:
    """Forward-Euler states, shape (cycles*steps_per_cycle + 1, 3)."""
    if steps_per_cycle < 500:
        raise ValidationError("steps_per_cycle must be >= 500")
    if mode not in _MODES:
        raise ValidationError(f"unknown delta-theta mode {mode!r}")
    states, bad = _euler_loop(params.amplitudes, params.widths, params.angles,
                              params.omega, cycles * steps_per_cycle, _MODES[mode])
    if bad >= 0:
        raise NumericalError(f"integration diverged at step {bad}")
    return states


def solve_single_cycle(params: OdeParams, steps_per_cycle: int = DEFAULT_STEPS_PER_CYCLE,
                       mode: str = "symmetric") -> EcgTrace:
    """z over one period on a uniform grid of steps_per_cycle samples [0, T)."""
    states = solve_trajectory(params, steps_per_cycle, mode)
    return EcgTrace(samples=states[:-1, 2],
                    sample_rate=steps_per_cycle / params.period)


def shift_and_resample(trace: EcgTrace, tau: float, target_len: int) -> EcgTrace:
    """Circular left shift by tau, then linear resampling to target_len.

    The trace is treated as one period of a periodic signal sampled on
    [0, T); output sample k sits at phase (k*T/target_len + tau) mod T.
    """
    if target_len < 2:
        raise ValidationError("target_len must be >= 2")
    n = trace.samples.size
    period = n / trace.sample_rate
    if not (0.0 <= tau < period):
        raise ValidationError(f"tau must lie in [0, period); got {tau} vs {period}")
    xp = np.arange(n + 1) / trace.sample_rate
    fp = np.concatenate([trace.samples, trace.samples[:1]])  # periodic wrap
    tq = (np.arange(target_len) * (period / target_len) + tau) % period
    samples = np.interp(tq, xp, fp)
    return EcgTrace(samples=samples, sample_rate=target_len / period)


def normalize_piece(samples: np.ndarray) -> np.ndarray:
    """Min-max map to [0, 1]; a flat trace maps to all zeros."""
    lo = float(samples.min())
    hi = float(samples.max())
    if hi - lo < 1e-12:
        return np.zeros_like(samples)
    return (samples - lo) / (hi - lo)


def generate_piece(p: np.ndarray, omega: float = 2.0 * np.pi, tau: float = 0.0,
                   steps_per_cycle: int = DEFAULT_STEPS_PER_CYCLE,
                   target_len: int = PIECE_LENGTH,
                   mode: str = "symmetric") -> np.ndarray:
    """Scaled defaults -> Euler solve -> tau shift -> fixed-length piece in [0, 1]."""
    params = scale_defaults(p, omega=omega, tau=tau)
    trace = solve_single_cycle(params, steps_per_cycle, mode)
    piece = shift_and_resample(trace, params.tau, target_len)
    return normalize_piece(piece.samples)


def piece_peak_indices(p: np.ndarray, omega: float = 2.0 * np.pi, tau: float = 0.0,
                       steps_per_cycle: int = DEFAULT_STEPS_PER_CYCLE,
                       target_len: int = PIECE_LENGTH,
                       mode: str = "symmetric") -> dict:
    """Locate the five event extrema of a generated piece.

    Searches the dense solution for the signed extremum of z near each
    event angle and maps it through the tau shift and resampling onto
    piece indices.  Returns {"P": i, ..., "T": i}.
    """
    params = scale_defaults(p, omega=omega, tau=tau)
    trace = solve_single_cycle(params, steps_per_cycle, mode)
    z = trace.samples
    n = z.size
    period = params.period
    out = {}
    for name, angle, amp, width in zip(("P", "Q", "R", "S", "T"),
                                       params.angles, params.amplitudes,
                                       params.widths):
        t_event = ((angle + np.pi) % (2.0 * np.pi)) / params.omega
        half = max(3, int(round(3.0 * width / params.omega * trace.sample_rate)))
        c = int(round(t_event * trace.sample_rate))
        lo, hi = max(0, c - half), min(n, c + half + 1)
        seg = z[lo:hi]
        i = lo + (int(np.argmax(seg)) if amp >= 0 else int(np.argmin(seg)))
        t_peak = i / trace.sample_rate
        idx = int(round(((t_peak - tau) % period) / period * target_len)) % target_len
        out[name] = idx
    return out
