"""Worked flux-sensitivity estimate: how much tuning range is needed.

The measured phase noise S_theta converts to frequency jitter
S_f = S_theta (f0 / 4 Ql)^2; dividing by the transfer coefficient df0/dPhi
gives the equivalent flux noise.  The script evaluates this for the
reference device and for a redesign with half the line inductance per length
and five times the shunt-arm inductance, and reports the transfer
coefficient needed to reach a target flux noise.  Documentation only: the
numbers depend on the assumed S_theta.

    python3 scripts/sensitivity_estimate.py --s-theta 1e-9 --target 0.5e-6
"""

import argparse
import dataclasses
import math

import numpy as np

from squidres.config import ToolkitConfig
from squidres.cpw import TransmissionLineModel
from squidres.noise import equivalent_flux_noise, flux_transfer_coefficient, phase_to_frequency_noise
from squidres.resonator import ResonatorModel, calibrate_length, tuning_curve
from squidres.squid import SquidParams, sweep_flux


def summary(model, n=4001):
    ramp = np.linspace(0, 1, n)
    curve = tuning_curve(model, ramp)
    states = sweep_flux(model.squid, ramp)
    best = 0.0
    for s in states[1:-1:20]:
        if s.jumped:
            continue
        try:
            best = max(best, abs(flux_transfer_coefficient(model, s).value))
        except Exception:  # near a jump the coefficient is not defined on both sides
            continue
    return np.ptp(curve.resonant_frequency), best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s-theta", type=float, default=1e-9, help="phase noise, rad^2/Hz")
    ap.add_argument("--target", type=float, default=0.5e-6, help="flux noise, Phi0/sqrt(Hz)")
    ap.add_argument("--range", type=float, nargs=2, default=[10e6, 20e6],
                    help="tuning ranges (Hz) to translate into tolerable S_theta")
    args = ap.parse_args()

    ref = ToolkitConfig().model()
    sq = ref.squid
    l2 = 5 * sq.shunt_arm_inductance
    sq2 = SquidParams(sq.junction_arm_inductance + l2, sq.junction_arm_inductance, l2,
                      sq.critical_current, sq.junction_inductance_zero)
    line2 = TransmissionLineModel(ref.line.inductance_per_length / 2, ref.line.capacitance_per_length)
    f0 = ToolkitConfig().resonator.target_f0
    redesign = dataclasses.replace(ref, line=line2, squid=sq2,
                                   physical_length=calibrate_length(line2, sq2, f0))

    s_f = float(phase_to_frequency_noise(args.s_theta, f0, ref.loaded_q))
    need = math.sqrt(s_f) / args.target
    print(f"S_theta = {args.s_theta:.2g} rad^2/Hz -> sqrt(S_f) = {math.sqrt(s_f):.3g} Hz/sqrt(Hz)")
    print(f"transfer coefficient needed for {args.target * 1e6:.2g} uPhi0/sqrt(Hz): "
          f"{need / 1e6:.3g} MHz/Phi0")
    spans = {}
    for name, m in (("reference", ref), ("redesign", redesign)):
        span, v = summary(m)
        spans[name] = (span, v)
        phi = math.sqrt(float(equivalent_flux_noise(s_f, v)))
        print(f"{name:9s}: beta_L {m.squid.beta_l:.2f}, tuning range {span / 1e6:.3g} MHz, "
              f"max |df0/dPhi| {v / 1e6:.3g} MHz/Phi0, flux noise {phi * 1e6:.3g} uPhi0/sqrt(Hz)")

    # transfer coefficient scales roughly with tuning range at fixed curve shape
    span, v = spans["reference"]
    print(f"tuning range needed (reference curve shape): {span * need / v / 1e6:.3g} MHz")
    for r in args.range:
        v_r = v * r / span
        s_theta = (args.target * v_r * 4 * ref.loaded_q / f0) ** 2
        print(f"a {r / 1e6:.0f} MHz range tolerates S_theta up to {s_theta:.2g} rad^2/Hz")


if __name__ == "__main__":
    main()
