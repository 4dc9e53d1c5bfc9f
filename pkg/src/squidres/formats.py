"""On-disk formats.

Columnar data is UTF-8 CSV preceded by a '#' header block::

    # squidres-format: s21-sweep
    # version: 1.0
    # units: frequency_hz=Hz, s21_real=1, s21_imag=1
    # meta: {"power_dbm": -80.0}
    frequency_hz,s21_real,s21_imag
    5.6e9,0.99,0.01
    ...

Bulk IQ records are little-endian float64, interleaved I,Q, with a JSON
sidecar of the same stem.  Flux columns are always in flux quanta.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .noise import IQTimeSeries, SpectrumEstimate
from .sweeps import ComplexSweep, TuningCurve

FORMAT_VERSION = "1.0"
MANIFEST_FORMAT = "squidres-manifest"
KINDS = ("s21-sweep", "iq-record", "tuning-curve", "spectrum")

SWEEP_COLUMNS = ("frequency_hz", "s21_real", "s21_imag")
TUNING_COLUMNS = ("applied_flux_phi0", "resonant_frequency_hz", "total_flux_phi0",
                  "branch", "jumped", "direction")
SPECTRUM_COLUMNS = ("frequency_hz", "psd_per_hz")
IQ_COLUMNS = ("i", "q")


def atomic_write(path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _check_version(ver, where):
    if str(ver).split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise FormatError(f"{where}: unsupported format version {ver}")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_table(path, kind: str, columns: dict, units: dict | None = None,
                metadata: dict | None = None) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    lines = [f"# squidres-format: {kind}", f"# version: {FORMAT_VERSION}"]
    if units:
        lines.append("# units: " + ", ".join(f"{k}={v}" for k, v in units.items()))
    lines.append("# meta: " + json.dumps(metadata or {}, sort_keys=True))
    lines.append(",".join(names))
    n = arrays[0].size if arrays else 0
    for i in range(n):
        lines.append(",".join(_fmt(a[i]) for a in arrays))
    atomic_write(path, "\n".join(lines) + "\n")


def read_table(path, kind: str | None = None):
    """Parse a columnar file; returns ``(columns, metadata)``.  Errors name the line."""
    path = Path(path)
    header, meta, names, rows = {}, {}, None, []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if names is not None:
                    raise FormatError(f"{path}:{lineno}: header line after data")
                key, _, val = line[1:].partition(":")
                key, val = key.strip(), val.strip()
                if key == "meta":
                    try:
                        meta = json.loads(val)
                    except json.JSONDecodeError as exc:
                        raise FormatError(f"{path}:{lineno}: bad metadata JSON") from exc
                else:
                    header[key] = val
                continue
            if names is None:
                names = [c.strip() for c in line.split(",")]
                continue
            if not raw.endswith("\n"):
                raise FormatError(f"{path}:{lineno}: truncated line (no newline)")
            fields = line.split(",")
            if len(fields) != len(names):
                raise FormatError(f"{path}:{lineno}: expected {len(names)} fields, "
                                  f"got {len(fields)}")
            try:
                rows.append([float(x) for x in fields])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric field") from exc
    if "squidres-format" not in header:
        raise FormatError(f"{path}: missing 'squidres-format' header")
    if kind is not None and header["squidres-format"] != kind:
        raise FormatError(f"{path}: expected {kind}, found {header['squidres-format']}")
    _check_version(header.get("version", "?"), path)
    if names is None:
        raise FormatError(f"{path}: missing column header line")
    data = np.array(rows, dtype=float).reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}, meta


def _require(cols, names, path):
    missing = [n for n in names if n not in cols]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}")


def write_sweep(path, sweep: ComplexSweep) -> None:
    write_table(path, "s21-sweep",
                {"frequency_hz": sweep.frequency, "s21_real": sweep.s21.real,
                 "s21_imag": sweep.s21.imag},
                {"frequency_hz": "Hz", "s21_real": "1", "s21_imag": "1"}, sweep.metadata)


def read_sweep(path) -> ComplexSweep:
    cols, meta = read_table(path, "s21-sweep")
    _require(cols, SWEEP_COLUMNS, path)
    try:
        return ComplexSweep(cols["frequency_hz"], cols["s21_real"] + 1j * cols["s21_imag"], meta)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_tuning(path, curve: TuningCurve, metadata: dict | None = None) -> None:
    n = len(curve)
    tot = curve.total_flux if curve.total_flux is not None else np.full(n, np.nan)
    branch = np.floor(tot + 0.5)
    md = {"sweep_direction": curve.sweep_direction,
          "jump_locations": [float(x) for x in curve.jump_locations]}
    md.update(metadata or {})
    write_table(path, "tuning-curve",
                {"applied_flux_phi0": curve.applied_flux,
                 "resonant_frequency_hz": curve.resonant_frequency,
                 "total_flux_phi0": tot, "branch": branch.astype(int) if n and np.all(np.isfinite(branch)) else branch,
                 "jumped": curve.jumped, "direction": curve.direction},
                {"applied_flux_phi0": "Phi0", "resonant_frequency_hz": "Hz",
                 "total_flux_phi0": "Phi0"}, md)


def read_tuning(path) -> TuningCurve:
    cols, meta = read_table(path, "tuning-curve")
    _require(cols, ("applied_flux_phi0", "resonant_frequency_hz"), path)
    n = cols["applied_flux_phi0"].size
    jumped = cols.get("jumped", np.zeros(n)).astype(bool)
    return TuningCurve(cols["applied_flux_phi0"], cols["resonant_frequency_hz"],
                       [float(x) for x in cols["applied_flux_phi0"][jumped]],
                       meta.get("sweep_direction", "up"), cols.get("total_flux_phi0"),
                       jumped, cols.get("direction"))


def write_spectrum(path, spec: SpectrumEstimate, metadata: dict | None = None) -> None:
    md = {"segment_length": spec.segment_length, "window": spec.window,
          "overlap_fraction": spec.overlap_fraction,
          "equivalent_noise_bandwidth": spec.equivalent_noise_bandwidth,
          "n_segments": spec.n_segments}
    md.update(metadata or {})
    write_table(path, "spectrum", {"frequency_hz": spec.frequency, "psd_per_hz": spec.psd},
                {"frequency_hz": "Hz", "psd_per_hz": "rad^2/Hz"}, md)


def read_spectrum(path) -> SpectrumEstimate:
    cols, meta = read_table(path, "spectrum")
    _require(cols, SPECTRUM_COLUMNS, path)
    return SpectrumEstimate(cols["frequency_hz"], cols["psd_per_hz"],
                            int(meta.get("segment_length", 0)), meta.get("window", "hann"),
                            float(meta.get("overlap_fraction", 0.5)),
                            float(meta.get("equivalent_noise_bandwidth", float("nan"))),
                            int(meta.get("n_segments", 0)), meta)


def _sidecar(path):
    path = Path(path)
    return path.with_name(path.name[:-len(".bin")] + ".json") if path.name.endswith(".bin") \
        else path.with_suffix(".json")


def _jsonable_meta(md):
    out = {}
    for k, v in md.items():
        if k == "calibration_points" and isinstance(v, dict):
            out[k] = [[float(f), float(complex(z).real), float(complex(z).imag)]
                      for f, z in sorted(v.items())]
        else:
            out[k] = v
    return out


def write_iq_binary(path, series: IQTimeSeries) -> Path:
    """Write interleaved little-endian float64 I,Q plus a JSON sidecar; returns the sidecar path."""
    buf = np.empty(2 * series.i_samples.size, dtype="<f8")
    buf[0::2], buf[1::2] = series.i_samples, series.q_samples
    atomic_write(path, buf.tobytes())
    side = {"format": "squidres-iq", "version": FORMAT_VERSION, "encoding": "float64-le-interleaved",
            "sample_rate": series.sample_rate, "n_samples": int(series.i_samples.size),
            "duration": series.duration, "metadata": _jsonable_meta(series.metadata)}
    sc = _sidecar(path)
    atomic_write(sc, json.dumps(side, indent=2, sort_keys=True) + "\n")
    return sc


def _restore_meta(md):
    md = dict(md)
    if isinstance(md.get("calibration_points"), list):
        md["calibration_points"] = {float(f): complex(re, im) for f, re, im in md["calibration_points"]}
    return md


def read_iq_binary(path) -> IQTimeSeries:
    sc = _sidecar(path)
    try:
        side = json.loads(Path(sc).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{sc}: line {exc.lineno}: {exc.msg}") from exc
    if side.get("format") != "squidres-iq":
        raise FormatError(f"{sc}: not an IQ sidecar")
    _check_version(side.get("version", "?"), sc)
    raw = np.fromfile(path, dtype="<f8")
    n = int(side["n_samples"])
    if raw.size != 2 * n:
        raise FormatError(f"{path}: expected {2 * n} float64 values, found {raw.size}")
    return IQTimeSeries(raw[0::2].copy(), raw[1::2].copy(), float(side["sample_rate"]),
                        _restore_meta(side.get("metadata", {})))


def write_iq_csv(path, series: IQTimeSeries) -> None:
    md = _jsonable_meta(series.metadata)
    md["sample_rate"] = series.sample_rate
    write_table(path, "iq-record", {"i": series.i_samples, "q": series.q_samples},
                {"i": "V", "q": "V"}, md)


def read_iq_csv(path) -> IQTimeSeries:
    cols, meta = read_table(path, "iq-record")
    _require(cols, IQ_COLUMNS, path)
    if "sample_rate" not in meta:
        raise FormatError(f"{path}: metadata lacks sample_rate")
    fs = float(meta.pop("sample_rate"))
    return IQTimeSeries(cols["i"], cols["q"], fs, _restore_meta(meta))


def read_iq(path) -> IQTimeSeries:
    return read_iq_csv(path) if str(path).endswith(".csv") else read_iq_binary(path)


# --------------------------------------------------------------------------
# manifest

def make_record(path, kind, base_dir, metadata=None) -> dict:
    if kind not in KINDS:
        raise FormatError(f"unknown record kind {kind!r}")
    path = Path(path)
    return {"path": os.path.relpath(path, base_dir), "kind": kind,
            "metadata": metadata or {}, "checksum": sha256_file(path)}


def write_manifest(path, records: list) -> None:
    doc = {"format": MANIFEST_FORMAT, "version": FORMAT_VERSION, "records": records}
    atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> list:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if doc.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{path}: not a manifest")
    _check_version(doc.get("version", "?"), path)
    recs = doc.get("records", [])
    for r in recs:
        if r.get("kind") not in KINDS:
            raise FormatError(f"{path}: record {r.get('path')!r} has unknown kind {r.get('kind')!r}")
        r["abspath"] = str((path.parent / r["path"]).resolve())
    return recs


def verify_record(record: dict) -> bool:
    return sha256_file(record["abspath"]) == record["checksum"]
