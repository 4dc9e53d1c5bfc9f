"""Modeling and analysis of flux-tunable, SQUID-terminated quarter-wave resonators."""

from .cpw import (CpwGeometry, NanobridgeParams, TransmissionLineModel, coherence_length,
                  complete_elliptic_k, compute_line_params, josephson_regime_ok)
from .fitting import ResonanceFit, TuningFit, fit_resonance, fit_tuning_curve
from .noise import (IQTimeSeries, SpectrumEstimate, calibrate_iq, decompose_quadratures,
                    estimate_psd, fit_power_law, flux_transfer_coefficient, noise_vs_flux,
                    noise_vs_power)
from .resonator import ResonatorModel, resonant_frequency, synthesize_s21, tuning_curve
from .squid import (FluxState, SquidParams, all_flux_branches, critical_applied_flux,
                    load_inductance, solve_total_flux, sweep_flux)
from .sweeps import ComplexSweep, TuningCurve

__version__ = "0.1.0"
