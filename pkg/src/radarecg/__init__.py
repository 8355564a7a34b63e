"""Radar vital-sign signal toolkit.

Chest-displacement synthesis and radar phase mapping, time-frequency
analysis (STFT / Morlet CWT / synchrosqueezing), beat-interval
estimation, dynamical single-cycle ECG synthesis and fitting, ECG
reconstruction metrics, and free-space link budget analysis, wired into
a batch pipeline.
"""

from .errors import NumericalError, ValidationError
from .signal_model import (MultiChannelSignal, NoiseSpec, RadarConfig,
                           SynthTruth, VibrationModel,
                           displacement_from_phase, phase_from_displacement,
                           synth_long_term, synth_single_cycle)
from .spectral import Spectrogram, WaveletConfig, cwt, pse, sst, stft
from .ppi import (EnergyPlot, PpiConfig, PpiSeries, detect_peaks, energy_plot,
                  estimate_ppi, kde_mode)
from .ecg_ode import (OdeParams, generate_piece, rhs, scale_defaults,
                      shift_and_resample, solve_single_cycle, solve_trajectory)
from .ode_fit import FitConfig, FitResult, fit_piece, fit_trace
from .metrics import (EcgTrace, MdrReport, detect_r_peaks, mdr, pcc,
                      peak_timing_error, rmse)
from .link_budget import (LinkBudgetConfig, TABLE_DEFAULTS, max_range,
                          min_detectable_power, received_power)
from .pipeline import (PipelineConfig, SynthSpec, concat_pieces, run_pipeline,
                       slice_cycles)

__version__ = "0.1.0"
