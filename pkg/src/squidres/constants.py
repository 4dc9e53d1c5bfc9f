"""Physical constants used across the toolkit (SI units)."""

from scipy import constants as _c

PHI0 = _c.physical_constants["mag. flux quantum"][0]  # Wb
H_PLANCK = _c.h
MU0 = _c.mu_0
EPS0 = _c.epsilon_0
C_LIGHT = _c.c
