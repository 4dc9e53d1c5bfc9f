"""Toolkit configuration: JSON file with one section per model component.

Unknown keys are rejected; missing keys take the defaults below.  Loading
builds the model objects once so every section is checked against the
invariants of the type it feeds.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .cpw import CpwGeometry, compute_line_params, gap_for_impedance
from .errors import ConfigError, SquidResError
from .resonator import ResonatorModel, calibrate_length
from .squid import SquidParams

CONFIG_ENV = "SQUIDRES_CONFIG"
CONFIG_FORMAT = "squidres-config"
CONFIG_VERSION = "1.0"


@dataclass
class CpwSection:
    center_width: float = 10e-6
    gap: float | None = None  # None: chosen to hit target_impedance
    target_impedance: float = 50.0
    film_thickness: float = 150e-9
    substrate_rel_permittivity: float = 11.45
    physical_length: float | None = None  # None: calibrated to resonator.target_f0


@dataclass
class SquidSection:
    loop_inductance: float = 1.55e-12
    critical_current: float = 320e-6
    arm_split_fraction: float = 0.5
    junction_inductance_zero: float | None = None
    flux_offset: float = 0.0


@dataclass
class ResonatorSection:
    target_f0: float = 5.6513e9
    coupling_q: float = 1.0e5
    internal_q: float = 1.41e5
    mismatch_angle: float = 0.0
    cable_delay: float = 50e-9
    amplitude: float = 1.0
    phase_offset: float = 0.0
    coupling_capacitance: float = 0.7e-15


@dataclass
class NoiseSection:
    segment_length: int = 2 ** 14
    window: str = "hann"
    overlap_fraction: float = 0.5
    low_band: list = field(default_factory=lambda: [1.0, 100.0])
    mid_band: list = field(default_factory=lambda: [100.0, 1.0e4])
    eval_frequency: float = 1.0e3
    independence_threshold: float = 2.0
    sample_rate: float = 112e3
    duration: float = 10.0


@dataclass
class SyntheticSection:
    s21_noise: float = 1e-3
    s21_points: int = 2001
    s21_linewidths: float = 10.0
    tuning_points: int = 2001
    tuning_noise_hz: float = 0.0
    powers_dbm: list = field(default_factory=lambda: [-90.0, -85.0, -80.0, -75.0])
    flux_points: int = 20
    flux_power_dbm: float = -85.0
    phase_noise_level: float = 1e-9  # rad^2/Hz at 1 kHz and -80 dBm
    power_exponent: float = -0.5
    amplitude_rms: float = 1e-4


@dataclass
class ToolkitConfig:
    cpw: CpwSection = field(default_factory=CpwSection)
    squid: SquidSection = field(default_factory=SquidSection)
    resonator: ResonatorSection = field(default_factory=ResonatorSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    synthetic: SyntheticSection = field(default_factory=SyntheticSection)
    rng_seed: int = 42
    output_dir: str = "out"
    workers: int = 1

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {"format": CONFIG_FORMAT, "version": CONFIG_VERSION, **d}

    def squid_params(self) -> SquidParams:
        s = self.squid
        return SquidParams.from_loop(s.loop_inductance, s.critical_current,
                                     s.arm_split_fraction, s.junction_inductance_zero)

    def geometry(self) -> CpwGeometry:
        c = self.cpw
        gap = c.gap
        if gap is None:
            gap = gap_for_impedance(c.center_width, c.target_impedance,
                                    c.substrate_rel_permittivity)
        return CpwGeometry(c.center_width, gap, c.film_thickness,
                           c.substrate_rel_permittivity, c.physical_length or 1.0)

    def model(self) -> ResonatorModel:
        line = compute_line_params(self.geometry())
        sq = self.squid_params()
        length = self.cpw.physical_length
        if length is None:
            length = calibrate_length(line, sq, self.resonator.target_f0)
        r = self.resonator
        return ResonatorModel(line, length, sq, r.coupling_q, r.internal_q, r.mismatch_angle,
                              r.coupling_capacitance)


_SECTIONS = {"cpw": CpwSection, "squid": SquidSection, "resonator": ResonatorSection,
             "noise": NoiseSection, "synthetic": SyntheticSection}
_SCALARS = {"rng_seed": int, "output_dir": str, "workers": int}


def _coerce(name, value, default):
    if default is None or value is None:
        if value is not None and not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number or null")
        return None if value is None else float(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true/false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{name}: expected a list")
        return [float(v) for v in value]
    return value


def config_from_dict(data: dict, strict: bool = True) -> ToolkitConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    data = dict(data)
    fmt = data.pop("format", CONFIG_FORMAT)
    ver = str(data.pop("version", CONFIG_VERSION))
    if fmt != CONFIG_FORMAT:
        raise ConfigError(f"format: expected {CONFIG_FORMAT!r}, got {fmt!r}")
    if ver.split(".")[0] != CONFIG_VERSION.split(".")[0]:
        raise ConfigError(f"version: unsupported major version {ver}")
    cfg = ToolkitConfig()
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: section must be an object")
            section = getattr(cfg, key)
            known = {f.name for f in dataclasses.fields(section)}
            for k, v in value.items():
                if k not in known:
                    if strict:
                        raise ConfigError(f"{key}.{k}: unknown field")
                    continue
                setattr(section, k, _coerce(f"{key}.{k}", v, getattr(section, k)))
        elif key in _SCALARS:
            setattr(cfg, key, _coerce(key, value, getattr(cfg, key)))
        elif strict:
            raise ConfigError(f"{key}: unknown field")
    validate(cfg)
    return cfg


def validate(cfg: ToolkitConfig) -> None:
    """Build each model object so its invariants are checked; re-raise with the section name."""
    checks = [("cpw", cfg.geometry), ("squid", cfg.squid_params), ("resonator", cfg.model)]
    for name, build in checks:
        try:
            build()
        except SquidResError as exc:
            raise ConfigError(f"{name}: {exc}") from exc
    n = cfg.noise
    if not 0 <= n.overlap_fraction <= 0.9:
        raise ConfigError("noise.overlap_fraction: must lie in [0, 0.9]")
    if n.segment_length < 16:
        raise ConfigError("noise.segment_length: must be at least 16")
    for band in ("low_band", "mid_band"):
        b = getattr(n, band)
        if len(b) != 2 or not 0 <= b[0] < b[1]:
            raise ConfigError(f"noise.{band}: expected [lo, hi] with 0 <= lo < hi")
    if not 0 <= cfg.rng_seed < 2 ** 64:
        raise ConfigError("rng_seed: must be a 64-bit unsigned integer")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")


def load_config(path: str | os.PathLike | None = None, strict: bool = True) -> ToolkitConfig:
    """Read a config file; with no path, fall back to $SQUIDRES_CONFIG, then defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return ToolkitConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(data, strict)


def dump_config(cfg: ToolkitConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
