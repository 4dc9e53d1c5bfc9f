"""Hysteretic tuning curve of the reference device, up and down sweeps.

Finds the junction-arm split that reproduces a 300 kHz peak-to-peak tuning
range, then writes the curve (CSV + SVG) for that split and for the
symmetric one.

    python3 scripts/tuning_curve.py --out out/tuning
"""

import argparse
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from squidres.config import load_config
from squidres.formats import write_tuning
from squidres.plotting import plot_tuning
from squidres.resonator import tuning_curve


def model_for(cfg, split):
    # with no physical_length set, the line is recalibrated to target_f0
    cfg.squid.arm_split_fraction = split
    return cfg.model()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None)
    ap.add_argument("--out", default="out/tuning")
    ap.add_argument("--target-range", type=float, default=300e3, help="Hz peak-to-peak")
    ap.add_argument("--points", type=int, default=2001)
    args = ap.parse_args()
    cfg = load_config(args.config)
    out = Path(args.out)
    up = np.linspace(0, 1, args.points)
    ramp = np.concatenate([up, up[::-1][1:]])

    def span(split):
        return np.ptp(tuning_curve(model_for(cfg, split), up).resonant_frequency)

    split = brentq(lambda a: span(a) - args.target_range, 0.05, 0.95, xtol=1e-5)
    for tag, a in (("symmetric", 0.5), ("fitted", split)):
        model = model_for(cfg, a)
        curve = tuning_curve(model, ramp)
        md = {"arm_split": a, "beta_l": model.squid.beta_l}
        write_tuning(out / f"tuning_{tag}.csv", curve, md)
        plot_tuning(out / f"tuning_{tag}.svg", curve)
        print(f"{tag:9s} split {a:.3f}: beta_L {model.squid.beta_l:.3f}, "
              f"range {np.ptp(curve.resonant_frequency) / 1e3:.1f} kHz, "
              f"jumps at {[round(x, 4) for x in curve.jump_locations]}")


if __name__ == "__main__":
    main()
