"""Data containers shared by the forward model, the fitters and file I/O."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass
class ComplexSweep:
    """Frequency-indexed complex transmission trace."""

    frequency: np.ndarray
    s21: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frequency = np.asarray(self.frequency, dtype=float)
        self.s21 = np.asarray(self.s21, dtype=complex)
        if self.frequency.shape != self.s21.shape or self.frequency.ndim != 1:
            raise DomainError("frequency and s21 must be 1-D arrays of equal length")
        if self.frequency.size > 1 and not np.all(np.diff(self.frequency) > 0):
            raise DomainError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(self.s21)):
            raise DomainError("s21 contains non-finite values")

    def __len__(self):
        return self.frequency.size


@dataclass
class TuningCurve:
    """Resonant frequency along a flux ramp.

    ``direction`` holds +1/-1 per point; ``sweep_direction`` names the first
    segment ("up" or "down").
    """

    applied_flux: np.ndarray
    resonant_frequency: np.ndarray
    jump_locations: list = field(default_factory=list)
    sweep_direction: str = "up"
    total_flux: np.ndarray | None = None
    jumped: np.ndarray | None = None
    direction: np.ndarray | None = None

    def __post_init__(self):
        self.applied_flux = np.asarray(self.applied_flux, dtype=float)
        self.resonant_frequency = np.asarray(self.resonant_frequency, dtype=float)
        n = self.applied_flux.size
        if self.resonant_frequency.size != n:
            raise DomainError("applied_flux and resonant_frequency differ in length")
        if np.any(self.resonant_frequency <= 0):
            raise DomainError("resonant frequencies must be positive")
        if self.sweep_direction not in ("up", "down"):
            raise DomainError("sweep_direction must be 'up' or 'down'")
        if self.jumped is None:
            self.jumped = np.zeros(n, dtype=bool)
            for x in self.jump_locations:
                self.jumped[np.argmin(np.abs(self.applied_flux - x))] = True
        self.jumped = np.asarray(self.jumped, dtype=bool)
        if self.direction is None:
            self.direction = _directions(self.applied_flux,
                                         1 if self.sweep_direction == "up" else -1)
        self.direction = np.asarray(self.direction, dtype=int)

    def __len__(self):
        return self.applied_flux.size


def _directions(flux, first):
    d = np.sign(np.diff(flux, prepend=flux[0] if flux.size else 0.0)).astype(int)
    cur = first
    for i in range(d.size):
        if d[i] == 0:
            d[i] = cur
        cur = d[i]
    return d
