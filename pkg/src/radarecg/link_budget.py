"""Free-space radar link budget: received power, noise floor, maximum range.

All antenna gains, powers and the radar cross section enter in dB units
(dBi / dBm / dBsm) and are converted to linear at full double precision:

    P_R      = G_T * G_R * lambda^2 * sigma * P_T / ((4 pi)^3 R^4)
    P_r,min  = -174 dBm + 10 log10(B) + NF + SNR_min
    R_max    = ((G_T G_R lambda^2 sigma P_T) / ((4 pi)^3 P_r,min))^(1/4)

so received_power(R = max_range) == min_detectable_power identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ValidationError

THERMAL_NOISE_DBM_PER_HZ = -174.0


@dataclass(frozen=True)
class LinkBudgetConfig:
    tx_gain_dbi: float = 10.0
    rx_gain_dbi: float = 30.0
    tx_power_dbm: float = 12.0
    wavelength_m: float = 3.9e-3
    rcs_dbsm: float = -20.0
    bandwidth_hz: float = 3.8e9
    noise_figure_db: float = 15.0
    desired_snr_db: float = 10.0
    range_m: float = 0.45

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValidationError("bandwidth must be positive")
        if self.wavelength_m <= 0:
            raise ValidationError("wavelength must be positive")
        if self.range_m <= 0:
            raise ValidationError("range must be positive")


#: mm-wave sensor parameter set used throughout (77 GHz automotive radar
#: front end observing a quasi-static chest at 0.45 m).
TABLE_DEFAULTS = LinkBudgetConfig()


def _db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def _linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def _numerator_linear(cfg: LinkBudgetConfig) -> float:
    """G_T * G_R * lambda^2 * sigma * P_T with P_T in mW."""
    return (_db_to_linear(cfg.tx_gain_dbi) * _db_to_linear(cfg.rx_gain_dbi)
            * cfg.wavelength_m ** 2 * _db_to_linear(cfg.rcs_dbsm)
            * _db_to_linear(cfg.tx_power_dbm))


def received_power(cfg: LinkBudgetConfig) -> float:
    """Received power in dBm at cfg.range_m."""
    pr_mw = _numerator_linear(cfg) / ((4.0 * math.pi) ** 3 * cfg.range_m ** 4)
    return _linear_to_db(pr_mw)


def min_detectable_power(cfg: LinkBudgetConfig) -> float:
    """Receiver noise floor plus required SNR, in dBm."""
    return (THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(cfg.bandwidth_hz)
            + cfg.noise_figure_db + cfg.desired_snr_db)


def max_range(cfg: LinkBudgetConfig) -> float:
    """Largest range at which the received power clears the noise floor (m)."""
    prmin_mw = _db_to_linear(min_detectable_power(cfg))
    return (_numerator_linear(cfg) / ((4.0 * math.pi) ** 3 * prmin_mw)) ** 0.25


def budget_report(cfg: LinkBudgetConfig) -> dict:
    """All three figures for one configuration."""
    return {
        "config": {
            "tx_gain_dbi": cfg.tx_gain_dbi,
            "rx_gain_dbi": cfg.rx_gain_dbi,
            "tx_power_dbm": cfg.tx_power_dbm,
            "wavelength_m": cfg.wavelength_m,
            "rcs_dbsm": cfg.rcs_dbsm,
            "bandwidth_hz": cfg.bandwidth_hz,
            "noise_figure_db": cfg.noise_figure_db,
            "desired_snr_db": cfg.desired_snr_db,
            "range_m": cfg.range_m,
        },
        "received_power_dbm": received_power(cfg),
        "min_detectable_power_dbm": min_detectable_power(cfg),
        "max_range_m": max_range(cfg),
    }
