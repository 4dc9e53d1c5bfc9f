"""Forward model of the SQUID-terminated quarter-wave resonator.

The line is lossless; the SQUID loads its shorted end with a purely inductive
impedance i 2 pi f L(phi_tot).  Resonance sits where the imaginary part of the
input impedance diverges, i.e. where Z0 cos(theta) = 2 pi f L sin(theta) with
theta = 2 pi f l / v the electrical length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .constants import H_PLANCK
from .cpw import TransmissionLineModel
from .errors import DomainError, ModelError
from .squid import FluxState, SquidParams, load_inductance, sweep_flux
from .sweeps import ComplexSweep, TuningCurve

BRACKET_FRACTION = 0.2


@dataclass(frozen=True)
class ResonatorModel:
    line: TransmissionLineModel
    physical_length: float
    squid: SquidParams
    coupling_q: float = 1.0e5
    internal_q: float = 1.41e5
    mismatch_angle: float = 0.0
    coupling_capacitance: float = 0.7e-15  # informational only

    def __post_init__(self):
        if not self.physical_length > 0:
            raise DomainError("physical_length must be positive")
        if not (self.coupling_q > 0 and self.internal_q > 0):
            raise DomainError("quality factors must be positive")

    @property
    def bare_frequency(self) -> float:
        """Quarter-wave frequency of the line with a perfect short."""
        return self.line.phase_velocity / (4.0 * self.physical_length)

    @property
    def loaded_q(self) -> float:
        return loaded_q(self.internal_q, self.coupling_q, self.mismatch_angle)

    def with_squid(self, squid: SquidParams) -> "ResonatorModel":
        return replace(self, squid=squid)


def loaded_q(qi, qc, mismatch_angle=0.0):
    """1/Ql = 1/Qi + cos(phi0)/Qc (mismatch-corrected coupling)."""
    return 1.0 / (1.0 / qi + math.cos(mismatch_angle) / qc)


def electrical_length(model: ResonatorModel, frequency):
    return 2.0 * math.pi * np.asarray(frequency, dtype=float) * model.physical_length / model.line.phase_velocity


def input_impedance(model: ResonatorModel, frequency, load_inductance: float):
    """Input impedance of the line terminated in i 2 pi f L.

    Near odd quarter-wave points the cotangent form is used so the
    expression stays finite; ``load_inductance=inf`` gives the open line.
    """
    f = np.asarray(frequency, dtype=float)
    if np.any(f <= 0):
        raise DomainError("frequency must be positive")
    z0 = model.line.characteristic_impedance
    theta = electrical_length(model, f)
    s, c = np.sin(theta), np.cos(theta)
    if math.isinf(load_inductance):
        out = -1j * z0 * c / s
    else:
        zl = 1j * 2 * math.pi * f * load_inductance
        # multiply numerator and denominator of the tan form by cos(theta)
        out = z0 * (zl * c + 1j * z0 * s) / (z0 * c + 1j * zl * s)
    out = np.asarray(out)
    return out.item() if out.ndim == 0 else out


def _theta_residual(theta, kappa):
    return np.cos(theta) - kappa * theta * np.sin(theta)


def inductance_ratio(model: ResonatorModel, load_inductance):
    """Load inductance over the total line inductance, L / (L_l l)."""
    return np.asarray(load_inductance, dtype=float) / (
        model.line.inductance_per_length * model.physical_length)


def resonant_frequency(model: ResonatorModel, load_inductance: float) -> float:
    """Resonance nearest the bare quarter-wave frequency, by bracketed root search."""
    if not load_inductance >= 0:
        raise DomainError("load inductance must be non-negative")
    kappa = float(inductance_ratio(model, load_inductance))
    lo, hi = (1 - BRACKET_FRACTION) * math.pi / 2, (1 + BRACKET_FRACTION) * math.pi / 2
    flo, fhi = _theta_residual(lo, kappa), _theta_residual(hi, kappa)
    if not flo > 0 > fhi:
        raise ModelError(f"no resonance within +-{BRACKET_FRACTION:.0%} of the bare frequency")
    theta = brentq(_theta_residual, lo, hi, args=(kappa,), xtol=1e-15,
                   rtol=4 * np.finfo(float).eps)
    return theta / (math.pi / 2) * model.bare_frequency


def resonant_frequencies(model: ResonatorModel, load_inductances) -> np.ndarray:
    """Vectorised resonance solve (safeguarded Newton on the electrical length)."""
    kappa = inductance_ratio(model, load_inductances)
    if np.any(kappa < 0):
        raise DomainError("load inductance must be non-negative")
    lo = np.full(kappa.shape, (1 - BRACKET_FRACTION) * math.pi / 2)
    if np.any(_theta_residual(lo, kappa) <= 0):
        raise ModelError(f"no resonance within +-{BRACKET_FRACTION:.0%} of the bare frequency")
    hi = np.full(kappa.shape, math.pi / 2)
    theta = math.pi / 2 - kappa * (math.pi / 2) / (1 + kappa)
    for _ in range(60):
        r = _theta_residual(theta, kappa)
        lo = np.where(r > 0, theta, lo)
        hi = np.where(r <= 0, theta, hi)
        d = -(1 + kappa) * np.sin(theta) - kappa * theta * np.cos(theta)
        step = r / d
        nxt = theta - step
        bad = (nxt <= lo) | (nxt >= hi)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = np.abs(nxt - theta) <= 2e-16 * theta
        theta = nxt
        if np.all(done):
            break
    return theta / (math.pi / 2) * model.bare_frequency


def calibrate_length(line: TransmissionLineModel, squid: SquidParams, target_f0: float,
                     total_flux: float = 0.0) -> float:
    """Line length that puts the resonance at `target_f0` for the given loop flux.

    Closed form: tan(theta) = Z0 / (2 pi f0 L) fixes theta, then l = theta v / (2 pi f0).
    """
    lval = load_inductance(squid, total_flux)
    theta = math.atan2(line.characteristic_impedance, 2 * math.pi * target_f0 * lval)
    return theta * line.phase_velocity / (2 * math.pi * target_f0)


def tuning_curve(model: ResonatorModel, flux_ramp: Sequence[float],
                 initial_state: FluxState | None = None) -> TuningCurve:
    states = sweep_flux(model.squid, flux_ramp, initial_state)
    if not states:
        return TuningCurve(np.empty(0), np.empty(0), [], "up", np.empty(0), np.empty(0, bool))
    tot = np.array([s.total_flux for s in states])
    freqs = resonant_frequencies(model, load_inductance(model.squid, tot))
    ext = np.array([s.applied_flux for s in states])
    jumped = np.array([s.jumped for s in states])
    first = next((b - a for a, b in zip(ext[:-1], ext[1:]) if b != a), 1.0)
    return TuningCurve(
        applied_flux=ext,
        resonant_frequency=freqs,
        jump_locations=[float(x) for x in ext[jumped]],
        sweep_direction="up" if first > 0 else "down",
        total_flux=tot,
        jumped=jumped,
    )


def notch_s21(frequency, f0, ql, qc, mismatch_angle=0.0, amplitude=1.0,
              phase_offset=0.0, cable_delay=0.0):
    """Notch-port transmission with environment factor a exp(i(alpha - 2 pi f tau))."""
    f = np.asarray(frequency, dtype=float)
    env = amplitude * np.exp(1j * (phase_offset - 2 * np.pi * f * cable_delay))
    return env * (1 - (ql / qc) * np.exp(1j * mismatch_angle) / (1 + 2j * ql * (f / f0 - 1)))


def synthesize_s21(model: ResonatorModel, frequencies, f0: float, cable_delay: float = 0.0,
                   amplitude: float = 1.0, phase_offset: float = 0.0) -> ComplexSweep:
    if np.any(np.asarray(frequencies) <= 0):
        raise DomainError("frequencies must be positive")
    z = notch_s21(frequencies, f0, model.loaded_q, model.coupling_q, model.mismatch_angle,
                  amplitude, phase_offset, cable_delay)
    return ComplexSweep(frequencies, z)


def s21_response_at_flux(model: ResonatorModel, flux_state: FluxState, frequencies,
                         cable_delay: float = 0.0, amplitude: float = 1.0,
                         phase_offset: float = 0.0) -> ComplexSweep:
    f0 = resonant_frequency(model, load_inductance(model.squid, flux_state.total_flux))
    sweep = synthesize_s21(model, frequencies, f0, cable_delay, amplitude, phase_offset)
    sweep.metadata["applied_flux"] = flux_state.applied_flux
    return sweep


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (np.asarray(p_dbm, dtype=float) / 10.0)


def photon_number(f0: float, qi: float, qc: float, input_power: float,
                  convention: str = "energy") -> float:
    """Average intracavity photon number for drive power `input_power` (W).

    ``convention="energy"`` (default) reads the prefactor as Ql^2 / Qc, which
    follows from stored energy 2 Ql^2 P / (Qc w0) up to the 2/pi geometry
    factor.  ``convention="literal"`` evaluates (1/Qi + 1/Qc)^2 / Qc^2 as
    typeset, kept only for comparison; it gives ~1e-17 photons at -80 dBm.
    """
    if not (f0 > 0 and qi > 0 and qc > 0 and input_power > 0):
        raise DomainError("photon_number needs positive f0, Qi, Qc and power")
    inv_ql = 1.0 / qi + 1.0 / qc
    if convention == "energy":
        q_factor = 1.0 / (inv_ql ** 2 * qc)
    elif convention == "literal":
        q_factor = inv_ql ** 2 / qc ** 2
    else:
        raise DomainError(f"unknown photon-number convention {convention!r}")
    return 2.0 / math.pi * q_factor * input_power / (H_PLANCK * f0 ** 2)
