"""Command-line entry point: ``squidres <verb> [options]``.

Exit codes: 0 success, 2 validation error, 3 fit failure, 4 I/O error.
Logs (the only place timestamps appear) go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats, plotting
from .config import CONFIG_ENV, ToolkitConfig, dump_config, load_config
from .errors import (CalibrationError, ConfigError, DomainError, FitError, FormatError,
                     InsufficientDataError, SquidResError)
from .fitting import fit_resonance, fit_tuning_curve, model_tuning_frequencies
from .noise import (calibrate_iq, decompose_quadratures, estimate_psd, fit_power_law,
                    noise_vs_flux, noise_vs_power)
from .resonator import resonant_frequency, tuning_curve
from .squid import load_inductance
from .sweeps import ComplexSweep, TuningCurve
from .synthetic import (IQChain, flux_series_records, noisy_sweep, power_series_records,
                        rng_for, sweep_frequencies)

EXIT_OK, EXIT_VALIDATION, EXIT_FIT, EXIT_IO = 0, 2, 3, 4
SCENARIOS = ("s21", "tuning", "noise-power", "noise-flux")
REPORT_VERSION = "1.0"

log = logging.getLogger("squidres")


class ValidationFailure(SquidResError):
    """Bad command-line input."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _write_json(path, doc):
    formats.atomic_write(path, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def parse_ramp(spec: str) -> np.ndarray:
    """'start:stop:n[,start:stop:n...]' -> concatenated flux ramp; joints are not repeated."""
    parts = [p.strip() for p in spec.split(",") if p.strip()]
    out = []
    for p in parts:
        try:
            a, b, n = p.split(":")
            seg = np.linspace(float(a), float(b), int(n))
        except ValueError as exc:
            raise ValidationFailure(f"bad ramp segment {p!r}; expected start:stop:n") from exc
        if out and seg.size and out[-1].size and seg[0] == out[-1][-1]:
            seg = seg[1:]
        out.append(seg)
    return np.concatenate(out) if out else np.empty(0)


# --------------------------------------------------------------------------
# verbs

def cmd_validate_config(cfg: ToolkitConfig, args) -> int:
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def cmd_simulate_tuning(cfg: ToolkitConfig, args) -> int:
    out = Path(cfg.output_dir)
    ramp = parse_ramp(args.ramp)
    model = cfg.model()
    path = out / "tuning_curve.csv"
    if ramp.size == 0:
        warnings.warn("empty flux ramp: writing an empty tuning curve", stacklevel=1)
        formats.write_tuning(path, TuningCurve(np.empty(0), np.empty(0)))
        return EXIT_OK
    curve = tuning_curve(model, ramp - cfg.squid.flux_offset)
    curve.applied_flux = ramp.copy()
    curve.jump_locations = [float(x) for x in ramp[curve.jumped]]
    md = {"beta_l": model.squid.beta_l, "physical_length": model.physical_length,
          "flux_offset": cfg.squid.flux_offset,
          "flux_calibration": "applied flux in units of the flux quantum"}
    formats.write_tuning(path, curve, md)
    plotting.plot_tuning(out / "tuning_curve.svg", curve)
    log.info("tuning curve: %d points, %d jumps, peak-to-peak %.1f kHz", len(curve),
             len(curve.jump_locations), np.ptp(curve.resonant_frequency) * 1e-3)
    return EXIT_OK


def cmd_fit_s21(cfg: ToolkitConfig, args) -> int:
    sweep = formats.read_sweep(args.input)
    out = Path(cfg.output_dir)
    stem = Path(args.input).name.rsplit(".", 1)[0]
    fit = fit_resonance(sweep)
    report = {"format": "squidres-fit-report", "version": REPORT_VERSION, "kind": "resonance",
              "input": Path(args.input).name, "input_checksum": formats.sha256_file(args.input),
              "result": fit.to_dict()}
    _write_json(out / f"{stem}_fit.json", report)
    plotting.plot_resonance_fit(out / f"{stem}_fit.svg", sweep, fit)
    log.info("f0 = %.6f GHz, Qi = %.4g, Qc = %.4g", fit.f0 * 1e-9, fit.qi, fit.qc)
    return EXIT_OK


def cmd_fit_tuning(cfg: ToolkitConfig, args) -> int:
    curve = formats.read_tuning(args.input)
    if len(curve) < 3:
        raise FitError("tuning curve has fewer than three points")
    out = Path(cfg.output_dir)
    stem = Path(args.input).name.rsplit(".", 1)[0]
    template = cfg.model()
    fit = fit_tuning_curve(curve, template)
    pe = fit.flux_period_scale * curve.applied_flux - fit.flux_offset
    model_f = model_tuning_frequencies(template, fit.squid(), fit.physical_length, pe)
    report = {"format": "squidres-fit-report", "version": REPORT_VERSION, "kind": "tuning",
              "input": Path(args.input).name, "input_checksum": formats.sha256_file(args.input),
              "result": fit.to_dict()}
    _write_json(out / f"{stem}_fit.json", report)
    plotting.plot_tuning(out / f"{stem}_fit.svg", curve, overlay=model_f)
    log.info("beta_L = %.4f, rms residual %.3g Hz", fit.beta_l, fit.rms_residual)
    return EXIT_OK


def _segment_for(cfg, n):
    seg = cfg.noise.segment_length
    if seg > n:
        seg = 2 ** int(math.floor(math.log2(max(n // 2, 16))))
        warnings.warn(f"record of {n} samples shorter than segment; using {seg}", stacklevel=2)
    return seg


def _process_record(cfg: ToolkitConfig, rec: dict, out: Path) -> dict:
    entry = {"path": rec["path"], "metadata": rec.get("metadata", {})}
    if rec["kind"] != "iq-record":
        entry["error"] = f"kind {rec['kind']} is not an iq-record"
        return entry
    try:
        if not formats.verify_record(rec):
            entry["error"] = "checksum mismatch; record skipped"
            return entry
        series = formats.read_iq(rec["abspath"])
        pts = series.metadata.get("calibration_points")
        if not pts:
            raise CalibrationError("record carries no calibration sweep")
        cal = calibrate_iq(pts)
        quad = decompose_quadratures(series, cal)
        n = cfg.noise
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            spec = estimate_psd(quad.phase, series.sample_rate, _segment_for(cfg, quad.phase.size),
                                n.overlap_fraction, n.window)
        entry["warnings"] = sorted({str(w.message) for w in caught})
        fits = {}
        for name, band in (("low", n.low_band), ("mid", n.mid_band)):
            try:
                pl = fit_power_law(spec, tuple(band))
                fits[name] = {"exponent": pl.exponent, "stderr": pl.stderr,
                              "level_at_1hz": pl.level, "n_bins": pl.n_bins, "band": list(band)}
            except InsufficientDataError as exc:
                fits[name] = {"error": str(exc), "band": list(band)}
        stem = Path(rec["path"]).name.split(".")[0]
        spec_path = out / "spectra" / f"{stem}_psd.csv"
        formats.write_spectrum(spec_path, spec, {"source": rec["path"], **entry["metadata"]})
        entry.update({"spectrum": str(Path("spectra") / spec_path.name), "power_law": fits,
                      "calibration": {"center": [cal.center.real, cal.center.imag],
                                      "radius": cal.radius, "rotation": cal.rotation,
                                      "resonance_frequency": cal.resonance_frequency,
                                      "loaded_q": cal.loaded_q},
                      "_spectrum": spec})
    except (SquidResError, ValueError, OSError) as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
    return entry


def _modal(values):
    return Counter(values).most_common(1)[0][0]


def _aggregate_power(cfg, ok):
    keyed = [(e["metadata"].get("input_power_dbm"), e["metadata"].get("applied_flux"), e)
             for e in ok]
    keyed = [k for k in keyed if k[0] is not None]
    if keyed:
        flux = _modal([k[1] for k in keyed])
        group = {float(p): e["_spectrum"] for p, x, e in keyed if x == flux}
    else:
        group = {}
    if len(group) < 3:
        return {"status": "not-applicable", "reason": "fewer than three input powers"}, None
    res = noise_vs_power(group, cfg.noise.eval_frequency)
    return {"status": "ok", "exponent": res.exponent, "stderr": res.stderr,
            "eval_frequency": cfg.noise.eval_frequency,
            "points": [{"input_power_dbm": p, "s_theta": s} for p, s in res.points]}, res.points


def _aggregate_flux(cfg, ok):
    keyed = [(e["metadata"].get("applied_flux"), e["metadata"].get("input_power_dbm"), e)
             for e in ok]
    keyed = [k for k in keyed if k[0] is not None]
    if keyed:
        power = _modal([k[1] for k in keyed])
        group = {float(x): e["_spectrum"] for x, p, e in keyed if p == power}
    else:
        group = {}
    if len(group) < 3:
        return {"status": "not-applicable", "reason": "fewer than three flux points"}, None
    res = noise_vs_flux(group, cfg.noise.eval_frequency, cfg.noise.independence_threshold)
    return {"status": "ok", "max_min_ratio": res.max_relative_spread,
            "independent": res.independent, "threshold": res.threshold,
            "eval_frequency": cfg.noise.eval_frequency,
            "points": [{"applied_flux": x, "s_theta": s} for x, s in res.points]}, res.points


def cmd_noise(cfg: ToolkitConfig, args) -> int:
    records = formats.read_manifest(args.manifest)
    if not records:
        raise ValidationFailure("manifest contains no records")
    if not any(r["kind"] == "iq-record" for r in records):
        raise ValidationFailure("manifest contains no iq-record entries")
    out = Path(cfg.output_dir)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        entries = list(pool.map(lambda r: _process_record(cfg, r, out), records))
    ok = [e for e in entries if "error" not in e]
    for e in entries:
        if "error" in e:
            log.warning("%s: %s", e["path"], e["error"])
    if not ok:
        raise FitError("no record could be analysed")
    power, ppts = _aggregate_power(cfg, ok)
    flux, fpts = _aggregate_flux(cfg, ok)
    plotting.plot_spectra(out / "noise_spectra.svg",
                          {Path(e["path"]).name.split(".")[0]: e["_spectrum"] for e in ok})
    if ppts:
        plotting.plot_scaling(out / "noise_vs_power.svg", ppts, "input power (dBm)")
    if fpts:
        plotting.plot_scaling(out / "noise_vs_flux.svg", fpts, r"$\Phi_{ext}$ ($\Phi_0$)")
    for e in entries:
        e.pop("_spectrum", None)
    report = {"format": "squidres-noise-report", "version": REPORT_VERSION,
              "manifest": Path(args.manifest).name,
              "estimator": {"segment_length": cfg.noise.segment_length, "window": cfg.noise.window,
                            "overlap_fraction": cfg.noise.overlap_fraction},
              "records": entries, "noise_vs_power": power, "noise_vs_flux": flux}
    _write_json(out / "noise_report.json", report)
    if power["status"] == "ok":
        log.info("S_theta ~ P^%.3f", power["exponent"])
    if flux["status"] == "ok":
        log.info("flux max/min ratio %.3f (%s)", flux["max_min_ratio"],
                 "independent" if flux["independent"] else "flux dependent")
    return EXIT_OK


def _chain(cfg: ToolkitConfig) -> IQChain:
    r = cfg.resonator
    return IQChain(r.target_f0, r.internal_q, r.coupling_q, r.mismatch_angle)


def cmd_generate(cfg: ToolkitConfig, args) -> int:
    scenario = args.scenario
    if scenario not in SCENARIOS:
        raise ValidationFailure(f"unknown scenario {scenario!r}; valid scenarios: "
                                + ", ".join(SCENARIOS))
    out = Path(cfg.output_dir)
    seed, syn, res, nz = cfg.rng_seed, cfg.synthetic, cfg.resonator, cfg.noise
    model = cfg.model()
    records = []
    if scenario == "s21":
        f0 = resonant_frequency(model, float(load_inductance(model.squid, 0.0)))
        ql = model.loaded_q
        f = sweep_frequencies(f0, ql, syn.s21_linewidths, syn.s21_points)
        z = noisy_sweep(f, f0, res.internal_q, res.coupling_q, res.mismatch_angle,
                        res.amplitude, res.phase_offset, res.cable_delay, syn.s21_noise,
                        rng_for(seed, 0))
        md = {"f0": f0, "qi": res.internal_q, "qc": res.coupling_q,
              "mismatch_angle": res.mismatch_angle, "cable_delay": res.cable_delay,
              "sigma": syn.s21_noise, "seed": seed}
        path = out / "s21_sweep.csv"
        formats.write_sweep(path, ComplexSweep(f, z, md))
        records.append(formats.make_record(path, "s21-sweep", out, md))
    elif scenario == "tuning":
        n = syn.tuning_points
        ramp = np.concatenate([np.linspace(0, 1, n), np.linspace(1, 0, n)[1:]])
        curve = tuning_curve(model, ramp)
        if syn.tuning_noise_hz > 0:
            curve.resonant_frequency = curve.resonant_frequency + syn.tuning_noise_hz * \
                rng_for(seed, 3).standard_normal(len(curve))
        md = {"beta_l": model.squid.beta_l, "noise_hz": syn.tuning_noise_hz, "seed": seed}
        path = out / "tuning_curve.csv"
        formats.write_tuning(path, curve, md)
        records.append(formats.make_record(path, "tuning-curve", out, md))
    else:
        chain = _chain(cfg)
        if scenario == "noise-power":
            recs = power_series_records(seed, syn.powers_dbm, syn.phase_noise_level, -80.0,
                                        syn.power_exponent, nz.duration, nz.sample_rate, chain)
        else:
            fluxes = np.arange(syn.flux_points) / syn.flux_points
            recs = flux_series_records(seed, fluxes, syn.phase_noise_level, syn.flux_power_dbm,
                                       nz.duration, nz.sample_rate, chain)
        for k, rec in enumerate(recs):
            p, x = rec.metadata["input_power_dbm"], rec.metadata["applied_flux"]
            name = (f"iq_p{p:+05.1f}dBm.bin" if scenario == "noise-power"
                    else f"iq_flux{k:03d}.bin")
            path = out / name
            formats.write_iq_binary(path, rec)
            records.append(formats.make_record(path, "iq-record", out,
                                               {"input_power_dbm": p, "applied_flux": x,
                                                "seed": seed}))
    formats.write_manifest(out / "manifest.json", records)
    log.info("%s: wrote %d record(s) to %s", scenario, len(records), out)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument handling

def _common(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d,
                        help=f"JSON config file (default: ${CONFIG_ENV}, then built-in defaults)")
    parser.add_argument("--seed", type=int, default=d, help="override rng_seed")
    parser.add_argument("--out", default=d, help="override output directory")
    parser.add_argument("--workers", type=int, default=d, help="concurrent records (noise)")
    parser.add_argument("--strict", action="store_true", default=d,
                        help="treat warnings as validation errors")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="squidres", description=__doc__.splitlines()[0])
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="verb", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        _common(sp, suppress=True)
        sp.set_defaults(func=func)
        return sp

    add("validate-config", cmd_validate_config, "check a config file and print its normal form")
    sp = add("simulate-tuning", cmd_simulate_tuning, "model resonance frequency along a flux ramp")
    sp.add_argument("--ramp", default="0:1:2001",
                    help="flux ramp 'start:stop:n[,start:stop:n]' in flux quanta")
    sp = add("fit-s21", cmd_fit_s21, "fit a complex S21 sweep")
    sp.add_argument("input")
    sp = add("fit-tuning", cmd_fit_tuning, "fit the SQUID model to a tuning curve")
    sp.add_argument("input")
    sp = add("noise", cmd_noise, "phase-noise spectra and scaling reports for a manifest")
    sp.add_argument("manifest")
    sp = add("generate", cmd_generate, "write a seeded synthetic dataset and manifest")
    sp.add_argument("scenario", help="one of: " + ", ".join(SCENARIOS))
    return p


def _load(args) -> ToolkitConfig:
    cfg = load_config(args.config, strict=True)
    if args.seed is not None:
        cfg.rng_seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg.workers = args.workers
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(message)s")
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            if args.strict:
                warnings.simplefilter("error", UserWarning)
            cfg = _load(args)
            return args.func(cfg, args)
    except FitError as exc:
        log.error("fit failed: %s", exc)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            log.error("diagnostics: %s", json.dumps(_jsonable(diag), sort_keys=True))
        return EXIT_FIT
    except (ConfigError, FormatError, ValidationFailure, DomainError, UserWarning) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except CalibrationError as exc:
        log.error("calibration failed: %s", exc)
        return EXIT_FIT
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except SquidResError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    finally:
        logging.captureWarnings(False)


if __name__ == "__main__":
    sys.exit(main())
