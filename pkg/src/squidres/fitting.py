"""Inverse problems: notch-resonance circle fitting and tuning-curve fitting."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import linalg
from scipy.optimize import least_squares, minimize_scalar

from .constants import PHI0
from .errors import (DegenerateGeometryError, FitError, InsufficientDataError,
                     UnidentifiableError, UnphysicalResultError)
from .resonator import (ResonatorModel, calibrate_length, loaded_q, notch_s21,
                        resonant_frequencies)
from .squid import (SquidParams, beta_from_critical_flux, josephson_inductance,
                    load_inductance, screening_parameter, sweep_flux)
from .sweeps import ComplexSweep, TuningCurve

log = logging.getLogger(__name__)

WING_FRACTION = 0.2
MIN_WING_POINTS = 8


# --------------------------------------------------------------------------
# circle fit

@dataclass(frozen=True)
class CircleFit:
    center: complex
    radius: float
    rms: float


_PRATT = np.array([[0.0, 0, 0, -2], [0, 1, 0, 0], [0, 0, 1, 0], [-2, 0, 0, 0]])


def algebraic_circle_fit(points, refine: bool = True) -> CircleFit:
    """Least-squares circle through complex points.

    Pratt's algebraic fit: minimise |M a| over a = (A, B, C, D) for the conic
    A(x^2+y^2) + Bx + Cy + D = 0 subject to B^2 + C^2 - 4AD = 1, solved as a
    generalised eigenproblem on the moment matrix.  One Gauss-Newton step on
    the geometric distances follows when `refine` is set.
    """
    z = np.asarray(points, dtype=complex).ravel()
    if z.size < 3:
        raise DegenerateGeometryError("need at least three points for a circle")
    # work in centred, scaled coordinates for conditioning
    shift = z.mean()
    scale = np.sqrt(np.mean(np.abs(z - shift) ** 2))
    if not scale > 0:
        raise DegenerateGeometryError("all points coincide")
    w = (z - shift) / scale
    x, y = w.real, w.imag
    zz = x * x + y * y
    design = np.column_stack([zz, x, y, np.ones_like(x)])
    moments = design.T @ design / z.size
    vals, vecs = linalg.eig(moments, _PRATT)
    vals = np.real(vals)
    ok = np.isfinite(vals) & (vals > -1e-9 * max(1.0, np.abs(vals[np.isfinite(vals)]).max()))
    if not np.any(ok):
        raise DegenerateGeometryError("no admissible circle (points collinear?)")
    idx = np.flatnonzero(ok)[np.argmin(vals[ok])]
    a, b, c, d = np.real(vecs[:, idx])
    disc = b * b + c * c - 4 * a * d
    if abs(a) < 1e-10 * math.sqrt(max(disc, 0.0)) or disc <= 0:
        raise DegenerateGeometryError("points are collinear; circle is degenerate")
    cx, cy = -b / (2 * a), -c / (2 * a)
    r = math.sqrt(disc) / (2 * abs(a))
    if refine:
        cx, cy, r = _gauss_newton_step(x, y, cx, cy, r)
    center = shift + scale * complex(cx, cy)
    radius = scale * r
    rms = float(np.sqrt(np.mean((np.abs(z - center) - radius) ** 2)))
    return CircleFit(complex(center), float(radius), rms)


def _gauss_newton_step(x, y, cx, cy, r):
    dx, dy = x - cx, y - cy
    dist = np.hypot(dx, dy)
    if np.any(dist == 0):
        return cx, cy, r
    res = dist - r
    jac = np.column_stack([-dx / dist, -dy / dist, -np.ones_like(dist)])
    step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
    new = (cx + step[0], cy + step[1], r + step[2])
    new_res = np.hypot(x - new[0], y - new[1]) - new[2]
    return new if np.sum(new_res ** 2) <= np.sum(res ** 2) else (cx, cy, r)


# --------------------------------------------------------------------------
# cable delay

def _wing_indices(n, fraction):
    k = int(round(fraction * n))
    return np.r_[0:k, n - k:n]


def _wing_delay(f, z, fraction):
    n = f.size
    k = int(round(fraction * n))
    if 2 * k < MIN_WING_POINTS:
        raise InsufficientDataError(f"only {2 * k} wing points; need {MIN_WING_POINTS}")
    phase = np.unwrap(np.angle(z))
    idx = _wing_indices(n, fraction)
    slope, _ = np.polyfit(f[idx] - f.mean(), phase[idx], 1)
    return -slope / (2 * np.pi)


def _circularity(f, z, tau):
    """Circle-fit rms of the delay-corrected trace, relative to the trace amplitude.

    Normalising by the (delay-independent) amplitude rather than the fitted
    radius keeps large, nearly straight fits from scoring well.
    """
    try:
        c = algebraic_circle_fit(z * np.exp(2j * np.pi * (f - f.mean()) * tau), refine=False)
    except DegenerateGeometryError:
        return np.inf
    return c.rms / np.mean(np.abs(z))


def remove_cable_delay(sweep: ComplexSweep, wing_fraction: float = WING_FRACTION):
    """Estimate and remove the electrical delay of the measurement lines.

    A straight line through the unwrapped phase of the outer wings gives a
    first estimate.  It is then refined by making the corrected trace as
    circular as possible, which removes the bias the resonance puts on the
    wing slope.  Returns ``(corrected_sweep, delay)``.
    """
    f, z = sweep.frequency, sweep.s21
    tau = _wing_delay(f, z, wing_fraction)
    span = f[-1] - f[0]
    zc = z * np.exp(2j * np.pi * (f - f.mean()) * tau)
    spread = np.ptp(np.abs(zc - zc.mean()))
    if spread > 1e-9 * np.abs(zc).mean():
        half = 0.25 / span
        grid = tau + np.linspace(-half, half, 101)
        vals = np.array([_circularity(f, z, t) for t in grid])
        step = grid[1] - grid[0]
        # the true delay's well can be narrower than the grid step, while the
        # baseline arc gives a broad false minimum: refine every local minimum
        inner = (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:])
        cands = np.r_[np.flatnonzero(inner) + 1, int(np.argmin(vals))]
        cands = [i for i in np.unique(cands) if np.isfinite(vals[i])]
        cands = sorted(cands, key=lambda i: vals[i])[:8]
        best_t, best_v = tau, np.inf
        for i in cands:
            res = minimize_scalar(lambda t: _circularity(f, z, t),
                                  bounds=(grid[i] - step, grid[i] + step),
                                  method="bounded", options={"xatol": 1e-6 * step})
            t, v = (float(res.x), res.fun) if res.fun <= vals[i] else (float(grid[i]), vals[i])
            if v < best_v:
                best_t, best_v = t, v
        if np.isfinite(best_v):
            tau = best_t
    out = ComplexSweep(f, z * np.exp(2j * np.pi * f * tau), dict(sweep.metadata))
    return out, float(tau)


# --------------------------------------------------------------------------
# resonance fit

@dataclass
class ResonanceFit:
    f0: float
    qi: float
    qc: float
    ql: float
    mismatch_angle: float
    cable_delay: float
    amplitude: float
    phase_offset: float
    uncertainties: dict = field(default_factory=dict)
    rms_residual: float = 0.0
    qi_abs_convention: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _phase_model(f, theta0, ql, f0):
    return theta0 + 2 * np.arctan(2 * ql * (1 - f / f0))


def fit_phase(f, z, center):
    """Fit theta(f) = theta0 + 2 arctan(2 Ql (1 - f/f0)) to the angle about `center`."""
    theta = np.unwrap(np.angle(z - center))
    # the trace runs clockwise (decreasing angle) through resonance
    sign = 1.0 if theta[-1] < theta[0] else -1.0
    th = sign * theta
    speed = -np.gradient(th, f)
    i0 = int(np.argmax(speed))
    f0g = f[i0]
    mid = th[i0]
    above = np.flatnonzero(th < mid - np.pi / 2)
    below = np.flatnonzero(th > mid + np.pi / 2)
    if above.size and below.size:
        fwhm = f[above[0]] - f[below[-1]]
    else:
        fwhm = (f[-1] - f[0]) / 10
    qlg = f0g / max(fwhm, f[1] - f[0])
    fc = f.mean()
    span = f[-1] - f[0]

    def resid(p):
        t0, lq, u = p
        return th - _phase_model(f, t0, math.exp(lq), fc + u * span)

    res = least_squares(resid, [mid, math.log(qlg), (f0g - fc) / span], method="lm",
                        xtol=1e-14, ftol=1e-14, max_nfev=2000)
    t0, lq, u = res.x
    return sign * t0, math.exp(lq), fc + u * span, res


def _scaled_covariance(jac, s2):
    """(J^T J)^-1 s2 with column equilibration; parameters differ by many decades."""
    norms = np.linalg.norm(jac, axis=0)
    norms[norms == 0] = 1.0
    js = jac / norms
    try:
        inner = np.linalg.pinv(js.T @ js)
    except np.linalg.LinAlgError:
        return np.full((jac.shape[1],) * 2, np.nan)
    return inner / np.outer(norms, norms) * s2


_PARAMS = ("f0", "qi", "qc", "mismatch_angle", "amplitude", "phase_offset", "cable_delay")


def fit_resonance(sweep: ComplexSweep, wing_fraction: float = WING_FRACTION,
                  qc_convention: str = "dcm") -> ResonanceFit:
    """Extract f0, Qi, Qc, Ql, mismatch angle, delay and environment from a notch sweep.

    Pipeline: delay removal, circle fit, phase fit, then a joint complex
    least-squares polish of all seven parameters on the raw trace.  Standard
    errors come from the Jacobian at the optimum.
    """
    if qc_convention not in ("dcm", "abs"):
        raise ValueError(f"unknown qc_convention {qc_convention!r}")
    f, zraw = sweep.frequency, sweep.s21
    if f.size < 2 * MIN_WING_POINTS:
        raise InsufficientDataError("sweep too short for a resonance fit")
    corrected, tau = remove_cable_delay(sweep, wing_fraction)
    z = corrected.s21
    try:
        circle = algebraic_circle_fit(z)
    except DegenerateGeometryError as exc:
        raise FitError(f"no resonance circle: {exc}") from exc
    scatter = max(circle.rms, 1e-15 * np.abs(z).max())
    if circle.radius < 3 * scatter or circle.radius < 1e-6 * np.abs(z).max():
        raise FitError("resonance circle not resolved above the point scatter",
                       {"radius": circle.radius, "rms": circle.rms})
    theta0, ql, f0, phase_res = fit_phase(f, z, circle.center)
    if not (f[0] <= f0 <= f[-1]) or ql <= 0:
        raise FitError("phase fit did not locate a resonance inside the sweep",
                       {"f0": f0, "ql": ql})
    off = circle.center + circle.radius * np.exp(1j * (theta0 + np.pi))
    amp, alpha = abs(off), float(np.angle(off))
    cn = circle.center / off
    phi0 = float(np.angle(1 - cn))
    qc = ql / (2 * abs(1 - cn))
    qi_inv = 1 / ql - math.cos(phi0) / qc
    qi_start = 1 / qi_inv if qi_inv > 0 else 10 * ql

    fc = f.mean()
    alpha_c = alpha - 2 * np.pi * fc * tau  # phase at the sweep centre

    def unpack(p):
        f0_, lqi, lqc, ph, la, al, tu = p
        return f0_, math.exp(lqi), math.exp(lqc), ph, math.exp(la), al, tu

    def resid(p):
        f0_, qi_, qc_, ph, a_, al, tu = unpack(p)
        model = notch_s21(f, f0_, loaded_q(qi_, qc_, ph), qc_, ph, a_, al, 0.0) \
            * np.exp(-2j * np.pi * (f - fc) * tu)
        d = model - zraw
        return np.concatenate([d.real, d.imag])

    p0 = [f0, math.log(qi_start), math.log(qc), phi0, math.log(amp), alpha_c, tau]
    scale = [f0 / ql, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0 / (f[-1] - f[0])]
    res = least_squares(resid, p0, method="lm", x_scale=scale, xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=4000)
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError("joint least-squares did not converge",
                       {"status": int(res.status), "message": res.message})
    f0_, qi_, qc_, ph, a_, alc, tu = unpack(res.x)
    al = alc + 2 * np.pi * fc * tu
    al = float((al + np.pi) % (2 * np.pi) - np.pi)
    ql_ = loaded_q(qi_, qc_, ph)
    if qi_ <= 0 or not np.isfinite(qi_):
        raise UnphysicalResultError("internal Q is not positive", {"qi": qi_})
    if not (f[0] <= f0_ <= f[-1]):
        raise FitError("fitted f0 lies outside the sweep", {"f0": f0_})

    # covariance in (f0, Qi, Qc, phi0, a, alpha_c, tau) via the log-parameter chain
    n_dof = max(res.fun.size - res.x.size, 1)
    s2 = 2 * res.cost / n_dof
    cov_p = _scaled_covariance(res.jac, s2)
    dvdp = np.diag([1.0, qi_, qc_, 1.0, a_, 1.0, 1.0])
    cov = dvdp @ cov_p @ dvdp
    # alpha at f = 0 picks up the delay term
    gal = np.zeros(7); gal[5] = 1.0; gal[6] = 2 * np.pi * fc
    sig = {k: float(math.sqrt(max(cov[i, i], 0.0))) for i, k in enumerate(_PARAMS)}
    sig["phase_offset"] = float(math.sqrt(max(gal @ cov @ gal, 0.0)))
    # Ql = 1/(1/Qi + cos(phi)/Qc)
    gql = np.zeros(7)
    gql[1] = ql_ ** 2 / qi_ ** 2
    gql[2] = ql_ ** 2 * math.cos(ph) / qc_ ** 2
    gql[3] = ql_ ** 2 * math.sin(ph) / qc_
    sig["ql"] = float(math.sqrt(max(gql @ cov @ gql, 0.0)))

    rms = float(np.sqrt(np.mean(res.fun ** 2) * 2))
    qi_abs = 1 / (1 / ql_ - 1 / qc_) if 1 / ql_ > 1 / qc_ else float("inf")
    out = ResonanceFit(
        f0=float(f0_), qi=float(qi_), qc=float(qc_), ql=float(ql_),
        mismatch_angle=float(ph), cable_delay=float(tu), amplitude=float(a_),
        phase_offset=al, uncertainties=sig, rms_residual=rms, qi_abs_convention=float(qi_abs),
        diagnostics={"nfev": int(res.nfev), "status": int(res.status),
                     "circle_radius": circle.radius, "circle_rms": circle.rms,
                     "initial_delay": tau, "qc_convention": qc_convention},
    )
    if qc_convention == "abs":
        out.qi, out.qi_abs_convention = out.qi_abs_convention, out.qi
    return out


# --------------------------------------------------------------------------
# tuning-curve fit

@dataclass
class TuningFit:
    beta_l: float
    loop_inductance: float
    critical_current: float
    arm_split_fraction: float
    flux_offset: float
    flux_period_scale: float
    physical_length: float
    rms_residual: float
    uncertainties: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def squid(self) -> SquidParams:
        return SquidParams.from_loop(self.loop_inductance, self.critical_current,
                                     self.arm_split_fraction)


def _observed_critical_flux(curve: TuningCurve, scale, offset):
    """Critical flux implied by each recorded jump, mapped onto the upward-sweep value."""
    x = curve.applied_flux
    vals = []
    for i in np.flatnonzero(curve.jumped):
        if i == 0:
            continue
        xm = 0.5 * (x[i - 1] + x[i])  # crossing lies between the two samples
        pe = scale * xm + offset
        if curve.direction[i] > 0:
            vals.append(pe - math.floor(pe))
        else:
            vals.append(math.ceil(pe) - pe)
    return vals


def model_tuning_frequencies(template: ResonatorModel, squid: SquidParams, length: float,
                             applied_flux) -> np.ndarray:
    """Resonant frequencies along an applied-flux ramp (hysteresis included)."""
    states = sweep_flux(squid, applied_flux)
    tot = np.array([s.total_flux for s in states])
    model = replace(template, squid=squid, physical_length=length)
    return resonant_frequencies(model, load_inductance(squid, tot))


def fit_tuning_curve(curve: TuningCurve, model_template: ResonatorModel,
                     free_loop_inductance: bool = False, fit_flux_axis: bool = True,
                     flux_period_scale: float = 1.0, flux_offset: float = 0.0,
                     arm_split: float | None = None, max_nfev: int = 200) -> TuningFit:
    """Fit screening parameter, arm split, flux axis and line length to a tuning curve.

    With recorded jumps, beta_L is tied to the jump position through the
    closed-form critical flux, so the hysteretic switching of the model always
    coincides with the data.  Without jumps beta_L is a free parameter and at
    least one flux period is required.
    """
    x = curve.applied_flux
    fdat = curve.resonant_frequency
    if x.size == 0:
        raise UnidentifiableError("empty tuning curve")
    has_jump = bool(np.any(curve.jumped[1:]))
    if not has_jump and np.ptp(x) * flux_period_scale < 1.0:
        raise UnidentifiableError("no jump and less than one flux period: beta_L not identifiable")
    tmpl_sq = model_template.squid
    split0 = tmpl_sq.arm_split if arm_split is None else arm_split
    fscale = 1e3  # residuals in kHz

    names = ["arm_split_logit", "length"]
    if fit_flux_axis:
        names += ["flux_offset", "log_scale"]
    if not has_jump:
        names.append("log_beta")
    if free_loop_inductance:
        names.append("log_loop_inductance")

    def unpack(p, names=names):
        d = dict(zip(names, p))
        split = 1 / (1 + math.exp(-d["arm_split_logit"]))
        offset = d.get("flux_offset", flux_offset)
        scale = math.exp(d["log_scale"]) if "log_scale" in d else flux_period_scale
        lloop = (math.exp(d["log_loop_inductance"]) if "log_loop_inductance" in d
                 else tmpl_sq.loop_inductance)
        if has_jump:
            crit = np.mean(_observed_critical_flux(curve, scale, offset))
            beta = beta_from_critical_flux(crit) if crit > 0.5 else 1.0 + 1e-9
        else:
            beta = math.exp(d["log_beta"])
        i0 = beta * PHI0 / (2 * math.pi * lloop)
        length = model_template.physical_length * d["length"]
        return split, offset, scale, lloop, beta, i0, length

    def resid(p, names=names):
        try:
            split, offset, scale, lloop, beta, i0, length = unpack(p, names)
            sq = SquidParams.from_loop(lloop, i0, split)
            fm = model_tuning_frequencies(model_template, sq, length, scale * x + offset)
        except Exception:  # noqa: BLE001 - outside model domain: penalise
            return np.full(x.size, 1e6)
        return (fm - fdat) / fscale

    base = {"flux_offset": flux_offset, "log_scale": math.log(flux_period_scale),
            "log_beta": math.log(screening_parameter(tmpl_sq.loop_inductance,
                                                     tmpl_sq.critical_current)),
            "log_loop_inductance": math.log(tmpl_sq.loop_inductance)}
    imax = int(np.argmax(fdat))

    def start_for(split):
        # line length matched to the highest observed frequency at this split
        p = dict(base, arm_split_logit=math.log(split / (1 - split)), length=1.0)
        beta = unpack([p[n] for n in names])[4]
        sq = SquidParams.from_beta(beta, tmpl_sq.loop_inductance, split)
        states = sweep_flux(sq, flux_period_scale * x + flux_offset)
        lval = calibrate_length(model_template.line, sq, fdat[imax], states[imax].total_flux)
        p["length"] = lval / model_template.physical_length
        return p

    # the arm split shapes the curve strongly and the landscape is rough near
    # jumps, so pick the start from a coarse scan, then fit with the flux axis
    # held before freeing it
    if arm_split is None:
        scan = [start_for(a) for a in np.linspace(0.05, 0.95, 19)]
        p0 = min(scan, key=lambda p: np.sum(resid([p[n] for n in names]) ** 2))
    else:
        p0 = start_for(split0)
    nfev = 0
    stage1 = [n for n in names if n not in ("flux_offset", "log_scale")]
    if stage1 != names:
        r1 = least_squares(resid, [p0[n] for n in stage1], method="lm", xtol=1e-10,
                           ftol=1e-12, max_nfev=max_nfev * (len(stage1) + 1), diff_step=1e-7,
                           kwargs={"names": stage1})
        p0.update(zip(stage1, r1.x))
        nfev += r1.nfev
    start = np.array([p0[n] for n in names])

    res = least_squares(resid, start, method="lm", xtol=1e-10, ftol=1e-12,
                        max_nfev=max_nfev * (len(names) + 1), diff_step=1e-7)
    nfev += res.nfev
    if not np.all(np.isfinite(res.x)):
        raise FitError("tuning fit diverged", {"message": res.message})
    split, offset, scale, lloop, beta, i0, length = unpack(res.x)
    rms = float(np.sqrt(np.mean(res.fun ** 2)) * fscale)

    diag = {"nfev": int(nfev), "status": int(res.status), "message": res.message,
            "parameters": names, "beta_from_jump": has_jump,
            "joint_directions": bool(np.unique(curve.direction).size > 1),
            "warnings": []}
    if free_loop_inductance:
        diag["warnings"].append("loop inductance free: beta_L and L_loop are weakly identifiable")
    if split < 0.01 or split > 0.99:
        diag["warnings"].append("arm split fraction at its boundary")
    n_dof = max(res.fun.size - res.x.size, 1)
    unc = {}
    cov = _scaled_covariance(res.jac, 2 * res.cost / n_dof)
    sd = np.sqrt(np.clip(np.diag(cov), 0, None))
    for n, s in zip(names, sd):
        unc[n] = float(s)
    unc["arm_split_fraction"] = float(split * (1 - split) * unc["arm_split_logit"])
    unc["physical_length"] = float(model_template.physical_length * unc["length"])
    # offset and offset + 1 give identical residuals; report it in [0, 1)
    offset_wrapped = offset - math.floor(offset)
    return TuningFit(beta_l=float(beta), loop_inductance=float(lloop), critical_current=float(i0),
                     arm_split_fraction=float(split), flux_offset=float(offset_wrapped),
                     flux_period_scale=float(scale), physical_length=float(length),
                     rms_residual=rms, uncertainties=unc, diagnostics=diag)


def beta_from_jump(jump_flux: float, direction: str = "up") -> float:
    """Screening parameter implied by a single observed jump flux (in flux quanta)."""
    pe = jump_flux - math.floor(jump_flux) if direction == "up" else math.ceil(jump_flux) - jump_flux
    return beta_from_critical_flux(pe)


__all__ = ["CircleFit", "algebraic_circle_fit", "remove_cable_delay", "ResonanceFit",
           "fit_resonance", "fit_phase", "TuningFit", "fit_tuning_curve", "beta_from_jump",
           "model_tuning_frequencies", "josephson_inductance"]
