"""Coplanar-waveguide line parameters and nanobridge feasibility.

Line parameters use the quasi-static conformal-mapping result for a CPW with
zero-thickness conductors on an infinitely thick substrate.  Kinetic
inductance is neglected, so the inductance per length is purely geometric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .constants import C_LIGHT, EPS0, MU0
from .errors import DomainError

JOSEPHSON_LENGTH_FACTOR = 3.5
NB_CRITICAL_TEMPERATURE = 9.2  # K, bulk niobium


@dataclass(frozen=True)
class CpwGeometry:
    center_width: float
    gap: float
    film_thickness: float = 150e-9
    substrate_rel_permittivity: float = 11.45
    physical_length: float = 5e-3

    def __post_init__(self):
        for name in ("center_width", "gap", "film_thickness", "physical_length"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive length, got {v!r}")
        if not self.substrate_rel_permittivity >= 1:
            raise DomainError("substrate_rel_permittivity must be >= 1")


@dataclass(frozen=True)
class TransmissionLineModel:
    inductance_per_length: float  # H/m
    capacitance_per_length: float  # F/m

    @property
    def characteristic_impedance(self) -> float:
        return math.sqrt(self.inductance_per_length / self.capacitance_per_length)

    @property
    def phase_velocity(self) -> float:
        return 1.0 / math.sqrt(self.inductance_per_length * self.capacitance_per_length)

    @classmethod
    def from_impedance(cls, z0: float, phase_velocity: float) -> "TransmissionLineModel":
        """Build a line from Z0 and phase velocity instead of geometry."""
        return cls(z0 / phase_velocity, 1.0 / (z0 * phase_velocity))


@dataclass(frozen=True)
class NanobridgeParams:
    geometric_length: float = 40e-9
    coherence_length_ref: float = 40e-9
    reference_temperature: float = 4.2
    critical_temperature: float = NB_CRITICAL_TEMPERATURE

    def __post_init__(self):
        if not 0 < self.reference_temperature < self.critical_temperature:
            raise DomainError("need 0 < reference_temperature < critical_temperature")


def complete_elliptic_k(modulus: float, rtol: float = 1e-15) -> float:
    """Complete elliptic integral of the first kind K(k), by the AGM.

    Takes the modulus k (not the parameter m = k**2).
    """
    k = float(modulus)
    if not (0.0 <= k < 1.0):
        raise DomainError(f"elliptic modulus must lie in [0, 1), got {modulus!r}")
    a, b = 1.0, math.sqrt((1.0 - k) * (1.0 + k))
    for _ in range(64):
        if abs(a - b) <= rtol * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def compute_line_params(geometry: CpwGeometry) -> TransmissionLineModel:
    w, s = geometry.center_width, geometry.gap
    k = w / (w + 2.0 * s)
    if not 0.0 < k < 1.0:
        raise DomainError(f"CPW modulus k={k} outside (0, 1)")
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    ratio = complete_elliptic_k(kp) / complete_elliptic_k(k)  # K(k')/K(k)
    if not math.isfinite(ratio) or ratio <= 0:
        raise DomainError("non-finite elliptic integral ratio")
    eps_eff = 0.5 * (1.0 + geometry.substrate_rel_permittivity)
    return TransmissionLineModel(
        inductance_per_length=MU0 / 4.0 * ratio,
        capacitance_per_length=4.0 * EPS0 * eps_eff / ratio,
    )


def gap_for_impedance(center_width: float, target_z0: float, rel_permittivity: float,
                      lo: float = 1e-3, hi: float = 1e3) -> float:
    """Gap width giving `target_z0`, by bracketed root search on the gap/width ratio.

    Z0 increases monotonically with the gap at fixed width, so the root is unique.
    """
    def resid(log_ratio):
        g = CpwGeometry(center_width, center_width * math.exp(log_ratio),
                        substrate_rel_permittivity=rel_permittivity)
        return compute_line_params(g).characteristic_impedance - target_z0

    try:
        x = brentq(resid, math.log(lo), math.log(hi), xtol=1e-14)
    except ValueError as exc:
        raise DomainError(f"no gap in [{lo}w, {hi}w] yields Z0={target_z0} ohm") from exc
    return center_width * math.exp(x)


def coherence_length(params: NanobridgeParams, temperature: float) -> float:
    """Ginzburg-Landau coherence length, scaled as (1 - T/Tc)^(-1/2) from the reference point."""
    tc = params.critical_temperature
    if not temperature < tc:
        raise DomainError(f"T={temperature} K >= Tc={tc} K: coherence length diverges")
    if temperature < 0:
        raise DomainError("temperature must be non-negative")
    return params.coherence_length_ref * math.sqrt(
        (1.0 - params.reference_temperature / tc) / (1.0 - temperature / tc))


def josephson_regime_ok(params: NanobridgeParams, temperature: float,
                        effective_length: float) -> tuple[bool, float]:
    """Check the weak-link length criterion l <= 3.5 xi(T).

    Returns ``(ok, margin)`` where margin = 3.5 xi(T) - effective_length.
    """
    limit = JOSEPHSON_LENGTH_FACTOR * coherence_length(params, temperature)
    margin = limit - effective_length
    return margin >= 0, margin


__all__ = [
    "C_LIGHT", "CpwGeometry", "TransmissionLineModel", "NanobridgeParams",
    "complete_elliptic_k", "compute_line_params", "gap_for_impedance",
    "coherence_length", "josephson_regime_ok",
]
