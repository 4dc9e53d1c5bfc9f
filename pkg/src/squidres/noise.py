"""Homodyne IQ noise analysis.

Raw IQ traces are mapped into the frame of the resonance circle, split into
tangential (phase) and radial (amplitude) quadratures, and reduced to
one-sided power spectral densities with power-law fits.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import signal

from .errors import (CalibrationError, DegenerateGeometryError, DomainError,
                     InsufficientDataError)
from .fitting import algebraic_circle_fit, fit_phase
from .resonator import ResonatorModel, resonant_frequency
from .squid import (FluxState, _g, _newton, beta_l, load_inductance, stable_interval)

DEFAULT_SEGMENT = 2 ** 14
DEFAULT_OVERLAP = 0.5
DEFAULT_WINDOW = "hann"
LOW_BAND = (1.0, 100.0)
MID_BAND = (100.0, 1.0e4)
DEFAULT_EVAL_FREQUENCY = 1.0e3
FLUX_STEP = 1e-4
# half-width of the window main lobe in bins; bins this close to DC see its leakage
MAINLOBE_BINS = {"boxcar": 1, "hann": 2, "hamming": 2, "blackman": 3}


@dataclass
class IQTimeSeries:
    i_samples: np.ndarray
    q_samples: np.ndarray
    sample_rate: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.i_samples = np.asarray(self.i_samples, dtype=float)
        self.q_samples = np.asarray(self.q_samples, dtype=float)
        if self.i_samples.shape != self.q_samples.shape or self.i_samples.ndim != 1:
            raise DomainError("I and Q traces must be 1-D and of equal length")
        if not self.sample_rate > 0:
            raise DomainError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return self.i_samples.size / self.sample_rate

    @property
    def iq(self) -> np.ndarray:
        return self.i_samples + 1j * self.q_samples


@dataclass(frozen=True)
class CircleCalibration:
    """Maps raw IQ onto a unit circle centred at the origin.

    Convention: z_cal = (z - center) exp(-i rotation) / radius, so the
    resonance point lands on +1.  ``rotation`` is the angle of the resonance
    point seen from the circle centre.
    """
    center: complex
    radius: float
    rotation: float
    resonance_point: complex
    resonance_frequency: float = float("nan")
    loaded_q: float = float("nan")
    rms: float = 0.0

    def apply(self, z):
        return (np.asarray(z) - self.center) * np.exp(-1j * self.rotation) / self.radius


def calibrate_iq(traces_by_frequency: Mapping[float, complex],
                 cable_delay: float = 0.0) -> CircleCalibration:
    """Fit the resonance circle traced by mean IQ points over drive frequency."""
    if len(traces_by_frequency) < 5:
        raise CalibrationError("need at least five drive frequencies")
    f = np.array(sorted(traces_by_frequency), dtype=float)
    z = np.array([complex(traces_by_frequency[k]) for k in f])
    z = z * np.exp(2j * np.pi * f * cable_delay)
    try:
        circ = algebraic_circle_fit(z)
    except DegenerateGeometryError as exc:
        raise CalibrationError(f"degenerate IQ circle: {exc}") from exc
    if circ.radius < 3 * circ.rms:
        raise CalibrationError("IQ circle radius below three times the point scatter")
    theta0, ql, f0, _ = fit_phase(f, z, circ.center)
    res_point = circ.center + circ.radius * np.exp(1j * theta0)
    rot = float(np.angle(np.exp(1j * theta0)))
    return CircleCalibration(complex(circ.center), circ.radius, rot, complex(res_point),
                             float(f0), float(ql), circ.rms)


@dataclass
class Quadratures:
    phase: np.ndarray
    amplitude: np.ndarray
    excluded: int = 0


def decompose_quadratures(series: IQTimeSeries, cal: CircleCalibration) -> Quadratures:
    """Tangential (phase, rad) and radial (fractional) deviations about the circle centre.

    Phase is measured relative to the mean angle of the record; samples that
    sit exactly on the centre have no angle and are dropped.
    """
    w = cal.apply(series.iq)
    r = np.abs(w)
    keep = r > 0
    w, r = w[keep], r[keep]
    ang = np.unwrap(np.angle(w))
    return Quadratures(ang - ang.mean(), r - 1.0, int(np.count_nonzero(~keep)))


@dataclass
class SpectrumEstimate:
    frequency: np.ndarray
    psd: np.ndarray
    segment_length: int
    window: str
    overlap_fraction: float
    equivalent_noise_bandwidth: float
    n_segments: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def resolution(self) -> float:
        return self.frequency[1] - self.frequency[0]

    def band(self, lo, hi):
        """Bins inside [lo, hi], excluding those within the window main lobe of DC."""
        fmin = MAINLOBE_BINS.get(self.window, 2) * self.resolution
        m = (self.frequency >= lo) & (self.frequency <= hi) & (self.frequency >= fmin)
        return self.frequency[m], self.psd[m]


def estimate_psd(samples, sample_rate: float, segment_length: int = DEFAULT_SEGMENT,
                 overlap_fraction: float = DEFAULT_OVERLAP,
                 window: str = DEFAULT_WINDOW) -> SpectrumEstimate:
    """One-sided averaged-periodogram PSD (units^2/Hz) with window power normalisation.

    No detrending is applied, so the DC bin carries the mean; downstream fits
    skip it.
    """
    x = np.asarray(samples, dtype=float)
    if segment_length > x.size:
        raise InsufficientDataError("segment_length exceeds the record length")
    if not 0.0 <= overlap_fraction <= 0.9:
        raise DomainError("overlap_fraction must lie in [0, 0.9]")
    noverlap = int(round(overlap_fraction * segment_length))
    hop = segment_length - noverlap
    n_seg = 1 + (x.size - segment_length) // hop
    if n_seg < 2:
        warnings.warn("single segment: periodogram variance is not reduced", stacklevel=2)
    freq, psd = signal.welch(x, fs=sample_rate, window=window, nperseg=segment_length,
                             noverlap=noverlap, detrend=False, scaling="density",
                             return_onesided=True, average="mean")
    win = signal.get_window(window, segment_length)
    enbw = sample_rate * np.sum(win ** 2) / np.sum(win) ** 2
    return SpectrumEstimate(freq, psd, segment_length, window, overlap_fraction,
                            float(enbw), int(n_seg))


@dataclass
class PowerLawFit:
    exponent: float
    level: float  # PSD at 1 Hz
    stderr: float
    n_bins: int
    band: tuple


def fit_power_law(spectrum: SpectrumEstimate, band=MID_BAND, min_bins: int = 10) -> PowerLawFit:
    """Straight-line fit of log PSD against log frequency inside `band`."""
    f, p = spectrum.band(*band)
    bad = ~(p > 0)
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} non-positive PSD bins excluded", stacklevel=2)
        f, p = f[~bad], p[~bad]
    if f.size < min_bins:
        raise InsufficientDataError(f"{f.size} bins in band {band}; need {min_bins}")
    x, y = np.log10(f), np.log10(p)
    coef, cov = np.polyfit(x, y, 1, cov=True)
    return PowerLawFit(float(coef[0]), float(10 ** coef[1]), float(math.sqrt(cov[0, 0])),
                       int(f.size), tuple(band))


def _common_grid(spectra):
    grids = [s.frequency for s in spectra]
    ref = grids[0]
    same = all(g.shape == ref.shape and np.allclose(g, ref, rtol=1e-12) for g in grids)
    if same:
        return ref, [s.psd for s in spectra]
    warnings.warn("spectra on different frequency grids; regridding in log-log", stacklevel=3)
    out = []
    m = ref > 0
    for s in spectra:
        k = (s.frequency > 0) & (s.psd > 0)
        vals = np.full(ref.shape, np.nan)
        vals[m] = 10 ** np.interp(np.log10(ref[m]), np.log10(s.frequency[k]), np.log10(s.psd[k]))
        out.append(vals)
    return ref, out


def level_at(frequency, psd, eval_frequency, rel_width: float = 0.1,
             min_bins: int = 7) -> float:
    """Mean PSD over bins within a fractional band `rel_width` around `eval_frequency`.

    Averaging tens of bins keeps the scatter of a single-record level at a few
    percent; a smooth spectral slope across the band biases every record alike,
    so ratios and slopes between records are unaffected.  Falls back to the
    nearest `min_bins` bins when the band is narrower than that.
    """
    frequency = np.asarray(frequency)
    if not frequency[0] <= eval_frequency <= frequency[-1]:
        raise DomainError(f"{eval_frequency} Hz outside the spectrum")
    m = (np.abs(frequency / eval_frequency - 1) <= rel_width) & (frequency > 0)
    if np.count_nonzero(m) < min_bins:
        i = int(np.argmin(np.abs(frequency - eval_frequency)))
        h = min_bins // 2
        m = np.zeros(frequency.size, bool)
        m[max(i - h, 1):i + h + 1] = True
    return float(np.nanmean(np.asarray(psd)[m]))


@dataclass
class ScalingResult:
    exponent: float
    stderr: float
    points: list


def noise_vs_power(spectra: Mapping[float, SpectrumEstimate],
                   eval_frequency: float = DEFAULT_EVAL_FREQUENCY) -> ScalingResult:
    """Slope of log S_theta(eval_frequency) against log input power.

    Keys are input powers in dBm; the slope is with respect to power in watts.
    """
    if len(spectra) < 3:
        raise InsufficientDataError("need at least three input powers")
    powers = sorted(spectra)
    grid, psds = _common_grid([spectra[p] for p in powers])
    levels = [level_at(grid, q, eval_frequency) for q in psds]
    x = np.array(powers, dtype=float) / 10.0  # log10(P / mW)
    y = np.log10(levels)
    slope, stderr = _line_slope(x, y)
    return ScalingResult(slope, stderr, list(zip(powers, levels)))


def _line_slope(x, y):
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    dof = x.size - 2
    sxx = np.sum((x - x.mean()) ** 2)
    stderr = math.sqrt(np.sum(resid ** 2) / dof / sxx) if dof > 0 else float("nan")
    return float(coef[0]), stderr


@dataclass
class FluxIndependence:
    max_relative_spread: float
    independent: bool
    threshold: float
    points: list


def noise_vs_flux(spectra: Mapping[float, SpectrumEstimate],
                  eval_frequency: float = DEFAULT_EVAL_FREQUENCY,
                  threshold: float = 2.0) -> FluxIndependence:
    """Max/min ratio of S_theta(eval_frequency) across applied flux."""
    if len(spectra) < 3:
        raise InsufficientDataError("need at least three flux points")
    fluxes = sorted(spectra)
    grid, psds = _common_grid([spectra[p] for p in fluxes])
    levels = [level_at(grid, q, eval_frequency) for q in psds]
    ratio = max(levels) / min(levels)
    return FluxIndependence(float(ratio), bool(ratio < threshold), threshold,
                            list(zip(fluxes, levels)))


def _branch_frequency(model, beta, pe, branch_flux):
    """f0 at applied flux `pe` on the stable branch through `branch_flux`, or None."""
    lo, hi = stable_interval(beta, branch_flux)
    if math.isfinite(lo):
        if not _g(beta, pe, lo) < 0 < _g(beta, pe, hi):
            return None
    else:
        half = beta / (2 * math.pi) + 1e-9
        lo, hi = pe - half, pe + half
    p = _newton(beta, pe, min(max(branch_flux, lo), hi), lo, hi)
    return resonant_frequency(model, load_inductance(model.squid, p))


@dataclass
class TransferCoefficient:
    value: float  # Hz per flux quantum
    one_sided: bool = False


def flux_transfer_coefficient(model: ResonatorModel, flux_state: FluxState,
                              step: float = FLUX_STEP) -> TransferCoefficient:
    """df0/dPhi_ext at the operating point, by finite differences along its branch.

    Central differences unless a jump lies within two steps, in which case a
    one-sided difference on the surviving side is used and a warning issued.
    """
    if not flux_state.stable:
        raise DomainError("transfer coefficient needs a stable flux state")
    beta = beta_l(model.squid)
    pe, p = flux_state.applied_flux, flux_state.total_flux
    f = lambda x: _branch_frequency(model, beta, x, p)
    fp2, fm2 = f(pe + 2 * step), f(pe - 2 * step)
    if fp2 is not None and fm2 is not None:
        return TransferCoefficient((f(pe + step) - f(pe - step)) / (2 * step))
    warnings.warn("operating point within two steps of a jump: one-sided difference",
                  stacklevel=2)
    f0 = f(pe)
    if fm2 is not None:
        return TransferCoefficient((f0 - f(pe - step)) / step, True)
    if fp2 is not None:
        return TransferCoefficient((f(pe + step) - f0) / step, True)
    raise DomainError("branch too short for a finite-difference derivative")


def phase_to_frequency_noise(s_theta, f0: float, ql: float):
    """Convert phase noise (rad^2/Hz) to fractional-frequency-equivalent S_f (Hz^2/Hz).

    Uses the small-signal gain d(theta)/d(f0) = 4 Ql / f0 about the circle centre.
    """
    return np.asarray(s_theta) * (f0 / (4 * ql)) ** 2


def equivalent_flux_noise(s_f, transfer: float):
    """Flux noise (Phi0^2/Hz) that would produce the measured frequency noise.

    Reported as an upper bound on the SQUID's own flux noise: the measured
    resonator noise need not originate in the loop.
    """
    return np.asarray(s_f) / transfer ** 2


# --------------------------------------------------------------------------
# synthetic coloured noise

def power_law_psd(level: float, exponent: float, knee: float | None = None,
                  low_exponent: float | None = None, rolloff: float | None = None
                  ) -> Callable[[np.ndarray], np.ndarray]:
    """One-sided PSD  level * f**exponent, with an optional steeper segment below
    `knee` (continuous at the knee) and a single-pole roll-off above `rolloff`."""

    def psd(f):
        f = np.asarray(f, dtype=float)
        out = np.zeros_like(f)
        m = f > 0
        fm = f[m]
        val = level * fm ** exponent
        if knee is not None and low_exponent is not None:
            low = level * knee ** exponent * (fm / knee) ** low_exponent
            val = np.where(fm < knee, low, val)
        if rolloff is not None:
            val = val / (1 + (fm / rolloff) ** 2)
        out[m] = val
        return out

    return psd


def colored_noise(n: int, sample_rate: float, psd: Callable, rng: np.random.Generator) -> np.ndarray:
    """Real series of length `n` whose one-sided PSD is `psd(f)`, by spectral shaping.

    Each rFFT bin gets an independent complex Gaussian amplitude with variance
    matched to the target density; the DC bin is zero.
    """
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    target = np.asarray(psd(freqs), dtype=float)
    target[0] = 0.0
    spec = rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)
    # E|X_k|^2 = n fs S(f_k) / 2 for interior bins (two-sided density S/2)
    spec *= np.sqrt(n * sample_rate * target / 4.0)
    if n % 2 == 0:
        spec[-1] = spec[-1].real * math.sqrt(2.0)
    return np.fft.irfft(spec, n)
