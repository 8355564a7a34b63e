"""Derivative-free recovery of cycle-generator parameters from an ECG piece.

fit_piece searches the 16-dimensional box [-1, 1]^15 x [0, period) with
multi-start Nelder-Mead, minimising the RMSE between the generated and
target pieces.  Starts always include the default parameter point, once
with tau = 0 and once with tau chosen by circular cross-correlation
against the default-morphology template (which usually drops the search
straight into the right basin), plus seeded random starts.  Parameters
outside the box are clipped before evaluation and penalised, so the
optimizer sees a finite objective everywhere.

fit_trace anchors a piece to a measured radar cycle: the dominant
vibration is located on a denoised energy envelope of the displacement
segment and the R peak is placed one electromechanical lag ahead of it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import minimize

from .errors import ValidationError
from .ecg_ode import (PIECE_LENGTH, generate_piece, normalize_piece,
                      piece_peak_indices)
from .metrics import rmse

ENVELOPE_SMOOTH_S = 0.02
VIBRATION_SNR_MIN = 4.0  # peak/median ratio below which a cycle counts as empty


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 2000       # objective evaluations per start
    tolerance: float = 1e-7          # objective improvement threshold
    restarts: int = 5                # random starts on top of the seeded pair
    polish: int = 2                  # re-starts from the incumbent best
    omega: float = 2.0 * np.pi       # rad/s of the generated cycle
    steps_per_cycle: int = 2000
    electromechanical_lag: float = 0.02  # s, R precedes the first vibration
    track_history: bool = False      # record best-so-far residuals

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.restarts < 0 or self.polish < 0:
            raise ValidationError("restarts and polish must be >= 0")


@dataclass(frozen=True)
class FitResult:
    p: np.ndarray           # 15 scaling values in [-1, 1]
    tau: float              # s
    residual: float         # RMSE against the target piece
    evaluations: int
    history: Optional[tuple] = None   # best-so-far residual per evaluation

    def piece(self, cfg: FitConfig) -> np.ndarray:
        return generate_piece(self.p, omega=cfg.omega, tau=self.tau,
                              steps_per_cycle=cfg.steps_per_cycle)


@dataclass(frozen=True)
class TraceFit:
    piece: np.ndarray
    fit: FitResult
    r_index: int            # index of the R peak on the piece grid
    v1_time: float          # s, detected dominant vibration within the cycle
    peak_indices: dict      # P..T -> piece index


def _template(cfg: FitConfig) -> np.ndarray:
    return generate_piece(np.zeros(15), omega=cfg.omega,
                          steps_per_cycle=cfg.steps_per_cycle)


def _xcorr_tau(target: np.ndarray, template: np.ndarray, period: float) -> float:
    """Left shift aligning the template to the target, by circular xcorr."""
    a = template - template.mean()
    b = target - target.mean()
    xc = np.real(np.fft.ifft(np.fft.fft(a) * np.conj(np.fft.fft(b))))
    lag = int(np.argmax(xc))
    return (lag % target.size) * period / target.size


def fit_piece(target: np.ndarray, cfg: FitConfig = FitConfig(),
              rng_seed: int = 0) -> FitResult:
    """Recover (p, tau) whose generated piece best matches the target."""
    target = np.asarray(target, dtype=float)
    if target.ndim != 1 or target.size != PIECE_LENGTH:
        raise ValidationError(f"target must be a length-{PIECE_LENGTH} piece")
    if not np.all(np.isfinite(target)):
        raise ValidationError("target contains non-finite values")
    target = normalize_piece(target)

    period = 2.0 * np.pi / cfg.omega
    nevals = 0
    history: list = []
    best_seen = [np.inf]

    def objective(q):
        nonlocal nevals
        nevals += 1
        p = np.clip(q[:15], -1.0, 1.0)
        tau = float(q[15]) % period
        piece = generate_piece(p, omega=cfg.omega, tau=tau,
                               steps_per_cycle=cfg.steps_per_cycle)
        penalty = 10.0 * float(np.sum(np.maximum(np.abs(q[:15]) - 1.0, 0.0) ** 2))
        value = rmse(piece, target) + penalty
        if cfg.track_history:
            best_seen[0] = min(best_seen[0], value)
            history.append(best_seen[0])
        return value

    tau_aligned = _xcorr_tau(target, _template(cfg), period)
    rng = np.random.default_rng(rng_seed)
    starts = [np.concatenate([np.zeros(15), [tau_aligned]]),
              np.zeros(16)]
    for _ in range(cfg.restarts):
        jitter = (tau_aligned + rng.uniform(-0.05, 0.05) * period) % period
        starts.append(np.concatenate([rng.uniform(-0.5, 0.5, 15), [jitter]]))

    best_x, best_f = None, np.inf
    opts = dict(maxfev=cfg.max_iterations, xatol=1e-4, fatol=cfg.tolerance,
                adaptive=True)
    for s0 in starts:
        res = minimize(objective, s0, method="Nelder-Mead", options=opts)
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
    polish_opts = dict(maxfev=cfg.max_iterations, xatol=1e-5,
                       fatol=cfg.tolerance / 10.0, adaptive=True)
    for _ in range(cfg.polish):
        res = minimize(objective, best_x, method="Nelder-Mead", options=polish_opts)
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)

    p = np.clip(best_x[:15], -1.0, 1.0)
    tau = float(best_x[15]) % period
    residual = rmse(generate_piece(p, omega=cfg.omega, tau=tau,
                                   steps_per_cycle=cfg.steps_per_cycle), target)
    return FitResult(p=p, tau=tau, residual=float(residual), evaluations=nevals,
                     history=tuple(history) if cfg.track_history else None)


def detect_vibration(radar_cycle: np.ndarray, sample_rate: float) -> float:
    """Time (s, within the cycle) of the dominant vibration.

    Works on a denoised energy envelope (squared displacement, Gaussian
    smoothed); raises if the envelope shows no clear event.
    """
    x = np.asarray(radar_cycle, dtype=float)
    if x.size < 4:
        raise ValidationError("radar cycle too short")
    env = gaussian_filter1d(x ** 2, sigma=max(1.0, ENVELOPE_SMOOTH_S * sample_rate))
    med = float(np.median(env))
    peak = float(env.max())
    if med <= 0 or peak < VIBRATION_SNR_MIN * med:
        raise ValidationError("no vibration detected in cycle")
    return int(np.argmax(env)) / sample_rate


def fit_trace(radar_cycle: np.ndarray, ppi: float, cfg: FitConfig = FitConfig(),
              sample_rate: float = 200.0, rng_seed: int = 0) -> TraceFit:
    """Fit an ECG piece to one radar displacement cycle.

    The R peak is placed cfg.electromechanical_lag seconds before the
    detected dominant vibration; morphology comes from fitting against
    the default-shape template shifted to that R position.
    """
    if ppi <= 0:
        raise ValidationError("ppi must be positive")
    v1 = detect_vibration(radar_cycle, sample_rate)
    omega = 2.0 * np.pi / ppi
    fit_cfg = FitConfig(max_iterations=cfg.max_iterations, tolerance=cfg.tolerance,
                        restarts=cfg.restarts, polish=cfg.polish, omega=omega,
                        steps_per_cycle=cfg.steps_per_cycle,
                        electromechanical_lag=cfg.electromechanical_lag,
                        track_history=cfg.track_history)

    t_r = (v1 - cfg.electromechanical_lag) % ppi
    r_target = int(round(PIECE_LENGTH * t_r / ppi)) % PIECE_LENGTH
    template = _template(fit_cfg)
    r_template = int(np.argmax(template))
    # template R sits at phase r_template/PIECE_LENGTH; shift it onto r_target
    tau_star = ((r_template - r_target) % PIECE_LENGTH) * ppi / PIECE_LENGTH
    target = generate_piece(np.zeros(15), omega=omega, tau=tau_star,
                            steps_per_cycle=fit_cfg.steps_per_cycle)

    result = fit_piece(target, fit_cfg, rng_seed=rng_seed)
    piece = result.piece(fit_cfg)
    peaks = piece_peak_indices(result.p, omega=omega, tau=result.tau,
                               steps_per_cycle=fit_cfg.steps_per_cycle)
    return TraceFit(piece=piece, fit=result, r_index=int(np.argmax(piece)),
                    v1_time=v1, peak_indices=peaks)
