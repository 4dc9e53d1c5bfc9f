"""Seeded synthetic datasets mirroring the measured figures.

Every generator takes an explicit ``numpy.random.Generator`` or seed so that
the same seed always produces identical arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import IQTimeSeries, colored_noise, power_law_psd
from .resonator import dbm_to_watt, loaded_q, notch_s21

REFERENCE_SAMPLE_RATE = 112e3
REFERENCE_DURATION = 10.0
REFERENCE_F0 = 5.6513e9
REFERENCE_QI = 1.41e5
NOISE_POWERS_DBM = (-90.0, -85.0, -80.0, -75.0)


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream per (seed, keys) so records do not share noise."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2 ** 64 - 1), *keys]))


def noisy_sweep(frequencies, f0, qi, qc, mismatch_angle=0.0, amplitude=1.0,
                phase_offset=0.0, cable_delay=0.0, sigma=0.0, rng=None):
    """Notch S21 plus complex white noise of standard deviation `sigma` per quadrature."""
    ql = loaded_q(qi, qc, mismatch_angle)
    z = notch_s21(frequencies, f0, ql, qc, mismatch_angle, amplitude, phase_offset, cable_delay)
    if sigma > 0:
        n = np.size(frequencies)
        z = z + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return z


def sweep_frequencies(f0, ql, linewidths=10.0, n=2001):
    """`n` points spanning `linewidths` resonance widths (f0/Ql) centred on f0."""
    half = 0.5 * linewidths * f0 / ql
    return np.linspace(f0 - half, f0 + half, n)


def phase_noise_psd(level_1khz: float, knee: float = 100.0, rolloff: float | None = None):
    """Phase-noise shape: f^-1 below `knee`, f^-0.5 above, single-pole roll-off."""
    level_1hz = level_1khz * 1e3 ** 0.5
    return power_law_psd(level_1hz, -0.5, knee=knee, low_exponent=-1.0, rolloff=rolloff)


@dataclass
class IQChain:
    """Resonance circle as seen through the measurement chain (gain, phase)."""

    f0: float = REFERENCE_F0
    qi: float = REFERENCE_QI
    qc: float = 1.0e5
    mismatch_angle: float = 0.0
    gain: float = 0.35
    phase: float = 0.7

    @property
    def ql(self):
        return loaded_q(self.qi, self.qc, self.mismatch_angle)

    @property
    def bandwidth(self):
        """Resonator half-bandwidth f0 / (2 Ql), where the phase response rolls off."""
        return self.f0 / (2 * self.ql)

    def raw(self, s21):
        return self.gain * np.exp(1j * self.phase) * np.asarray(s21)

    def s21(self, f):
        return notch_s21(f, self.f0, self.ql, self.qc, self.mismatch_angle)

    def calibration_points(self, n=15, linewidths=6.0):
        f = sweep_frequencies(self.f0, self.ql, linewidths, n)
        return dict(zip(f.tolist(), self.raw(self.s21(f)).tolist()))

    def circle(self):
        """(center, radius, rotation) of the raw-IQ circle."""
        d = self.ql / self.qc * np.exp(1j * self.mismatch_angle)
        center = self.raw(1 - d / 2)
        res = self.raw(1 - d)
        return complex(center), float(abs(res - center)), float(np.angle(res - center))


def synthesize_iq_record(chain: IQChain, phase_psd, rng: np.random.Generator,
                         duration: float = REFERENCE_DURATION, sample_rate: float = REFERENCE_SAMPLE_RATE,
                         amplitude_rms: float = 1e-4, metadata: dict | None = None
                         ) -> IQTimeSeries:
    """IQ trace at the resonance with prescribed phase-noise PSD and white amplitude noise."""
    n = int(round(duration * sample_rate))
    theta = colored_noise(n, sample_rate, phase_psd, rng)
    amp = amplitude_rms * rng.standard_normal(n)
    center, radius, rot = chain.circle()
    z = center + radius * np.exp(1j * rot) * (1 + amp) * np.exp(1j * theta)
    md = {"carrier_frequency": chain.f0, "calibration_points": chain.calibration_points()}
    md.update(metadata or {})
    return IQTimeSeries(z.real, z.imag, sample_rate, md)


def power_series_records(seed: int, powers_dbm=NOISE_POWERS_DBM, level_at_ref: float = 1e-9,
                         ref_dbm: float = -80.0, power_exponent: float = -0.5,
                         duration: float = REFERENCE_DURATION, sample_rate: float = REFERENCE_SAMPLE_RATE,
                         chain: IQChain | None = None):
    """IQ records whose phase noise scales as P^power_exponent."""
    chain = chain or IQChain()
    out = []
    for k, p in enumerate(powers_dbm):
        level = level_at_ref * float(dbm_to_watt(p) / dbm_to_watt(ref_dbm)) ** power_exponent
        psd = phase_noise_psd(level, rolloff=chain.bandwidth)
        rec = synthesize_iq_record(chain, psd, rng_for(seed, 1, k),
                                   duration, sample_rate,
                                   metadata={"input_power_dbm": float(p), "applied_flux": 0.0})
        out.append(rec)
    return out


def flux_series_records(seed: int, fluxes=None, level: float = 1e-9, power_dbm: float = -85.0,
                        duration: float = REFERENCE_DURATION, sample_rate: float = REFERENCE_SAMPLE_RATE,
                        chain: IQChain | None = None):
    """IQ records from one noise process at each applied flux (independent seeds)."""
    chain = chain or IQChain()
    if fluxes is None:
        fluxes = np.linspace(0.0, 0.95, 20)
    psd = phase_noise_psd(level, rolloff=chain.bandwidth)
    return [synthesize_iq_record(chain, psd, rng_for(seed, 2, k), duration, sample_rate,
                                 metadata={"input_power_dbm": power_dbm,
                                           "applied_flux": float(x)})
            for k, x in enumerate(fluxes)]


def frequency_jitter_record(chain: IQChain, jitter_rms: float, rng: np.random.Generator,
                            n: int = 20000):
    """IQ samples at a fixed drive f0 while the resonance wanders by white jitter (Hz)."""
    df = jitter_rms * rng.standard_normal(n)
    ql = chain.ql
    z = notch_s21(chain.f0, chain.f0 + df, ql, chain.qc, chain.mismatch_angle)
    return chain.raw(z), df


__all__ = ["rng_for", "noisy_sweep", "sweep_frequencies", "phase_noise_psd", "IQChain",
           "synthesize_iq_record", "power_series_records", "flux_series_records",
           "frequency_jitter_record"]
