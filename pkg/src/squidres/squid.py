"""rf-SQUID flux quantization and flux-dependent load inductance.

All fluxes are in units of the flux quantum.  The loop obeys

    phi_tot = phi_ext - (beta_L / 2 pi) sin(2 pi phi_tot)

which is multivalued for beta_L > 1.  A root is stable when
1 + beta_L cos(2 pi phi_tot) > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .constants import PHI0
from .errors import BranchLostError, DomainError, ModelError, NoHysteresisError

TWO_PI = 2.0 * math.pi
NEWTON_TOL = 1e-10
NEWTON_MAXITER = 100
_POLISH_TOL = 1e-15
GRID_STEP = 1.0 / 2000


def screening_parameter(loop_inductance: float, critical_current: float) -> float:
    return TWO_PI * loop_inductance * critical_current / PHI0


def josephson_inductance(critical_current: float) -> float:
    """Zero-bias Josephson inductance Phi0 / (2 pi I0)."""
    return PHI0 / (TWO_PI * critical_current)


@dataclass(frozen=True)
class SquidParams:
    loop_inductance: float
    junction_arm_inductance: float
    shunt_arm_inductance: float
    critical_current: float
    junction_inductance_zero: float

    def __post_init__(self):
        for name in ("loop_inductance", "junction_arm_inductance", "shunt_arm_inductance",
                     "critical_current", "junction_inductance_zero"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive and finite, got {v!r}")
        total = self.junction_arm_inductance + self.shunt_arm_inductance
        if abs(total - self.loop_inductance) > 1e-9 * self.loop_inductance:
            raise DomainError("L1 + L2 must equal the loop inductance")

    @classmethod
    def from_loop(cls, loop_inductance, critical_current, arm_split=0.5,
                  junction_inductance_zero=None):
        """Build from L_loop and I0; `arm_split` is the junction-arm fraction L1/L_loop."""
        if not 0.0 < arm_split < 1.0:
            raise DomainError("arm_split must lie in (0, 1)")
        l1 = arm_split * loop_inductance
        if junction_inductance_zero is None:
            junction_inductance_zero = josephson_inductance(critical_current)
        return cls(loop_inductance, l1, loop_inductance - l1, critical_current,
                   junction_inductance_zero)

    @classmethod
    def from_beta(cls, beta, loop_inductance=1.55e-12, arm_split=0.5):
        i0 = beta * PHI0 / (TWO_PI * loop_inductance)
        return cls.from_loop(loop_inductance, i0, arm_split)

    @property
    def arm_split(self) -> float:
        return self.junction_arm_inductance / self.loop_inductance

    @property
    def beta_l(self) -> float:
        return beta_l(self)


def beta_l(params: SquidParams) -> float:
    return screening_parameter(params.loop_inductance, params.critical_current)


@dataclass(frozen=True)
class FluxState:
    applied_flux: float
    total_flux: float
    branch_index: int
    stable: bool
    jumped: bool = False


def flux_residual(beta: float, applied_flux, total_flux):
    return total_flux - applied_flux + beta / TWO_PI * np.sin(TWO_PI * total_flux)


def _g(beta, pe, p):
    return p - pe + beta / TWO_PI * math.sin(TWO_PI * p)


def _dg(beta, p):
    return 1.0 + beta * math.cos(TWO_PI * p)


def _is_stable(beta, p):
    return _dg(beta, p) > 0.0


def _make_state(beta, pe, p, jumped=False):
    return FluxState(pe, p, int(math.floor(p + 0.5)), _is_stable(beta, p), jumped)


def _newton(beta, pe, seed, lo=-math.inf, hi=math.inf):
    """Newton iteration, bisection-safeguarded when a bracket [lo, hi] is known."""
    p = seed
    bracketed = math.isfinite(lo) and math.isfinite(hi)
    for _ in range(NEWTON_MAXITER):
        g = _g(beta, pe, p)
        # iterate past NEWTON_TOL so the root itself is accurate near folds
        if abs(g) < _POLISH_TOL:
            return p
        if bracketed:
            if g < 0:
                lo = p
            else:
                hi = p
        d = _dg(beta, p)
        step_ok = d != 0.0
        if step_ok:
            q = p - g / d
            if bracketed and not (lo < q < hi):
                step_ok = False
        if not step_ok:
            if not bracketed:
                break
            q = 0.5 * (lo + hi)
        if abs(q - p) <= 1e-15 * max(1.0, abs(p)) and abs(_g(beta, pe, q)) < NEWTON_TOL:
            return q
        p = q
    g = _g(beta, pe, p)
    if abs(g) < NEWTON_TOL:
        return p
    raise BranchLostError(f"Newton failed at phi_ext={pe} from seed {seed} (|g|={abs(g):.2e})")


def solve_total_flux(params: SquidParams, applied_flux: float,
                     seed_total_flux: float | None = None) -> FluxState:
    """Solve for the loop flux by Newton iteration from a seed.

    Raises BranchLostError on non-convergence.  The root reached is the one the
    iteration falls into, which is normally the one nearest the seed.
    """
    beta = beta_l(params)
    seed = applied_flux if seed_total_flux is None else seed_total_flux
    if not math.isfinite(seed):
        raise DomainError("seed must be finite")
    p = _newton(beta, applied_flux, float(seed))
    return _make_state(beta, applied_flux, p)


def fold_flux(beta: float) -> float:
    """Loop flux at the edge of the stable branch around 0 (beta > 1)."""
    if beta <= 1.0:
        raise NoHysteresisError(f"beta_L={beta} <= 1 has no fold")
    return math.acos(-1.0 / beta) / TWO_PI


def stable_interval(beta: float, total_flux: float) -> tuple[float, float]:
    """Interval of loop flux on which the branch through `total_flux` is stable."""
    if beta <= 1.0:
        return -math.inf, math.inf
    n = math.floor(total_flux + 0.5)
    pc = fold_flux(beta)
    return n - pc, n + pc


def _root_window(beta, pe):
    # every root satisfies |phi_tot - phi_ext| <= beta / 2 pi
    half = beta / TWO_PI + 1e-9
    return pe - half, pe + half


def all_flux_branches(params: SquidParams, applied_flux: float,
                      window: tuple[float, float] | None = None,
                      step: float = GRID_STEP) -> list[FluxState]:
    """Every root of the flux equation inside `window`, by grid scan plus bisection.

    With no window, one wide enough to contain every root is used.
    """
    beta = beta_l(params)
    return _grid_roots(beta, applied_flux, window, step)


def _grid_roots(beta, pe, window=None, step=GRID_STEP):
    if window is None:
        lo, hi = _root_window(beta, pe)
        lo, hi = lo - step, hi + step
    else:
        lo, hi = window
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi - lo < 1.0 - 1e-12:
            raise DomainError("window must be finite and at least one flux quantum wide")
    n = int(math.ceil((hi - lo) / step))
    x = lo + step * np.arange(n + 1)
    v = flux_residual(beta, pe, x)
    roots = []
    exact = np.flatnonzero(v == 0.0)
    roots.extend(float(x[i]) for i in exact)
    s = np.sign(v)
    crossings = np.flatnonzero(s[:-1] * s[1:] < 0)
    f = lambda p: _g(beta, pe, p)
    for i in crossings:
        roots.append(brentq(f, x[i], x[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    roots.sort()
    return [_make_state(beta, pe, r) for r in roots]


def stable_roots_newton(params: SquidParams, applied_flux: float) -> list[FluxState]:
    """Stable roots found branch by branch with safeguarded Newton.

    Each stable interval between neighbouring folds holds at most one root
    (the residual is increasing there), present iff the residual changes sign
    across the interval.  Independent of the grid scan in `all_flux_branches`.
    """
    beta = beta_l(params)
    pe = applied_flux
    if beta <= 1.0:
        lo, hi = _root_window(beta, pe)
        return [_make_state(beta, pe, _newton(beta, pe, pe, lo, hi))]
    pc = fold_flux(beta)
    wlo, whi = _root_window(beta, pe)
    out = []
    for n in range(math.floor(wlo) - 1, math.ceil(whi) + 2):
        a, b = n - pc, n + pc
        ga, gb = _g(beta, pe, a), _g(beta, pe, b)
        if ga < 0 < gb:
            out.append(_make_state(beta, pe, _newton(beta, pe, float(n), a, b)))
    return out


def critical_applied_flux(params_or_beta) -> float:
    """Applied flux at which an upward sweep from zero leaves its branch."""
    beta = params_or_beta if isinstance(params_or_beta, (int, float)) else beta_l(params_or_beta)
    pc = fold_flux(beta)
    return pc + beta / TWO_PI * math.sin(TWO_PI * pc)


def beta_from_critical_flux(critical_flux: float) -> float:
    """Invert `critical_applied_flux` (monotone increasing in beta on (1, inf))."""
    if not critical_flux > 0.5:
        raise DomainError("a hysteretic jump requires a critical flux above 0.5")
    hi = 2.0
    while critical_applied_flux(hi) < critical_flux:
        hi *= 2.0
    return brentq(lambda b: critical_applied_flux(b) - critical_flux, 1.0 + 1e-15, hi,
                  xtol=1e-14)


def load_inductance(params: SquidParams, total_flux) -> float:
    """Parallel combination of the junction arm (L1 + LJ/|cos|) and the shunt arm L2.

    Written as L2 (L1 c + LJ) / ((L1 + L2) c + LJ) with c = |cos(pi phi)|, which
    reduces smoothly to L2 when the junction arm opens (c = 0).
    """
    c = np.abs(np.cos(math.pi * np.asarray(total_flux, dtype=float)))
    l1, l2, lj = (params.junction_arm_inductance, params.shunt_arm_inductance,
                  params.junction_inductance_zero)
    out = l2 * (l1 * c + lj) / ((l1 + l2) * c + lj)
    return float(out) if out.ndim == 0 else out


def _continue(beta, pe, prev, direction):
    """Advance one ramp point from loop flux `prev`; returns (phi_tot, jumped)."""
    lo, hi = stable_interval(beta, prev)
    if not math.isfinite(lo):
        lo, hi = _root_window(beta, pe)
        return _newton(beta, pe, prev, lo, hi), False
    if _g(beta, pe, lo) < 0 < _g(beta, pe, hi):
        return _newton(beta, pe, min(max(prev, lo), hi), lo, hi), False
    # branch lost: jump to the nearest stable root in the sweep direction
    cands = [s.total_flux for s in _grid_roots(beta, pe) if s.stable]
    if direction >= 0:
        ahead = [p for p in cands if p > prev]
    else:
        ahead = [p for p in cands if p < prev]
    if not ahead:
        raise ModelError(f"no stable root to jump to at phi_ext={pe}")
    p = min(ahead, key=lambda q: abs(q - prev))
    return p, True


def sweep_flux(params: SquidParams, flux_ramp: Sequence[float],
               initial_state: FluxState | None = None) -> list[FluxState]:
    """Follow the loop flux along a ramp of applied flux, with hysteretic jumps.

    Each point continues the branch of the previous one.  When the branch
    ceases to exist the state jumps to the nearest stable root in the sweep
    direction and the point is flagged ``jumped``.
    """
    beta = beta_l(params)
    ramp = [float(x) for x in flux_ramp]
    if not ramp:
        return []
    if initial_state is None:
        prev = min((s.total_flux for s in _grid_roots(beta, ramp[0]) if s.stable),
                   key=lambda q: abs(q - ramp[0]))
    else:
        prev = initial_state.total_flux
    out = []
    last_pe = ramp[0] if initial_state is None else initial_state.applied_flux
    direction = 1
    for pe in ramp:
        if pe != last_pe:
            direction = 1 if pe > last_pe else -1
        p, jumped = _continue(beta, pe, prev, direction)
        out.append(_make_state(beta, pe, p, jumped))
        prev, last_pe = p, pe
    return out


def jump_fluxes(states: Sequence[FluxState]) -> list[float]:
    return [s.applied_flux for s in states if s.jumped]
