import json

import numpy as np
import pytest

from squidres.cli import EXIT_FIT, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main, parse_ramp
from squidres.config import CONFIG_ENV
from squidres.formats import read_manifest, read_tuning, sha256_file


def run(*argv):
    return main([str(a) for a in argv])


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_parse_ramp():
    np.testing.assert_allclose(parse_ramp("0:1:3,1:0:3"), [0, 0.5, 1, 0.5, 0])
    assert parse_ramp("").size == 0
    with pytest.raises(Exception):
        parse_ramp("0:1")


def test_generate_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("generate", "s21", "--seed", 42, "--out", tmp_path / d) == EXIT_OK
    assert sha256_file(tmp_path / "a/s21_sweep.csv") == sha256_file(tmp_path / "b/s21_sweep.csv")
    assert run("generate", "s21", "--seed", 43, "--out", tmp_path / "c") == EXIT_OK
    assert sha256_file(tmp_path / "a/s21_sweep.csv") != sha256_file(tmp_path / "c/s21_sweep.csv")
    rec = read_manifest(tmp_path / "a/manifest.json")[0]
    assert rec["kind"] == "s21-sweep" and rec["metadata"]["seed"] == 42


def test_generate_then_fit_s21(tmp_path):
    assert run("generate", "s21", "--out", tmp_path) == EXIT_OK
    assert run("fit-s21", tmp_path / "s21_sweep.csv", "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "s21_sweep_fit.json").read_text())
    truth = read_manifest(tmp_path / "manifest.json")[0]["metadata"]
    assert rep["input_checksum"] == sha256_file(tmp_path / "s21_sweep.csv")
    assert abs(rep["result"]["f0"] - truth["f0"]) < 1e3
    assert (tmp_path / "s21_sweep_fit.svg").exists()


def test_noiseless_round_trip(tmp_path):
    cfg = write_cfg(tmp_path, {"synthetic": {"s21_noise": 0.0},
                               "resonator": {"mismatch_angle": 0.15}})
    assert run("generate", "s21", "--config", cfg, "--out", tmp_path) == EXIT_OK
    assert run("fit-s21", tmp_path / "s21_sweep.csv", "--out", tmp_path) == EXIT_OK
    res = json.loads((tmp_path / "s21_sweep_fit.json").read_text())["result"]
    truth = read_manifest(tmp_path / "manifest.json")[0]["metadata"]
    for k in ("f0", "qi", "qc", "mismatch_angle", "cable_delay"):
        assert res[k] == pytest.approx(truth[k], rel=1e-6), k


def test_fit_s21_errors(tmp_path):
    assert run("generate", "s21", "--out", tmp_path) == EXIT_OK
    p = tmp_path / "s21_sweep.csv"
    text = p.read_text()
    p.write_text(text[: len(text) // 2])
    assert run("fit-s21", p, "--out", tmp_path) == EXIT_VALIDATION
    assert not (tmp_path / "s21_sweep_fit.json").exists()
    # a flat baseline has no resonance to fit
    lines = text.splitlines()
    body = [",".join([ln.split(",")[0], "0.9", "0.1"]) for ln in lines[5:]]
    flat = tmp_path / "flat.csv"
    flat.write_text("\n".join(lines[:5] + body) + "\n")
    assert run("fit-s21", flat, "--out", tmp_path) == EXIT_FIT
    assert not (tmp_path / "flat_fit.json").exists()
    assert run("fit-s21", tmp_path / "missing.csv", "--out", tmp_path) == EXIT_IO


def test_truncated_file_message_names_line(tmp_path, caplog):
    assert run("generate", "s21", "--out", tmp_path) == EXIT_OK
    p = tmp_path / "s21_sweep.csv"
    p.write_text(p.read_text()[:-5])
    with caplog.at_level("ERROR"):
        assert run("fit-s21", p, "--out", tmp_path) == EXIT_VALIDATION
    assert "s21_sweep.csv:2006: truncated" in caplog.text


def test_simulate_tuning(tmp_path):
    assert run("simulate-tuning", "--out", tmp_path) == EXIT_OK
    curve = read_tuning(tmp_path / "tuning_curve.csv")
    assert len(curve.jump_locations) == 1
    assert curve.jump_locations[0] == pytest.approx(0.545, abs=1e-3)
    assert (tmp_path / "tuning_curve.svg").exists()
    cfg = write_cfg(tmp_path, {"squid": {"critical_current": 320e-6 * 0.5 / 1.51}})
    assert run("simulate-tuning", "--config", cfg, "--out", tmp_path / "b") == EXIT_OK
    assert read_tuning(tmp_path / "b/tuning_curve.csv").jump_locations == []


def test_empty_ramp(tmp_path, caplog):
    with caplog.at_level("WARNING"):
        assert run("simulate-tuning", "--ramp", "", "--out", tmp_path) == EXIT_OK
    assert "empty flux ramp" in caplog.text
    assert len(read_tuning(tmp_path / "tuning_curve.csv")) == 0
    assert run("--strict", "simulate-tuning", "--ramp", "", "--out", tmp_path / "s") \
        == EXIT_VALIDATION


def test_fit_tuning(tmp_path):
    cfg = write_cfg(tmp_path, {"synthetic": {"tuning_points": 801}})
    assert run("generate", "tuning", "--config", cfg, "--out", tmp_path) == EXIT_OK
    assert run("fit-tuning", tmp_path / "tuning_curve.csv", "--out", tmp_path) == EXIT_OK
    res = json.loads((tmp_path / "tuning_curve_fit.json").read_text())["result"]
    assert res["beta_l"] == pytest.approx(1.507, abs=0.02)
    assert (tmp_path / "tuning_curve_fit.svg").exists()


@pytest.mark.slow
def test_noise_power_scaling(tmp_path):
    assert run("generate", "noise-power", "--out", tmp_path) == EXIT_OK
    assert run("noise", tmp_path / "manifest.json", "--workers", 2, "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "noise_report.json").read_text())
    assert rep["noise_vs_power"]["status"] == "ok"
    assert rep["noise_vs_power"]["exponent"] == pytest.approx(-0.5, abs=0.05)
    assert rep["noise_vs_flux"]["status"] == "not-applicable"
    assert len(list((tmp_path / "spectra").glob("*_psd.csv"))) == 4


def test_noise_flux_independence(tmp_path):
    cfg = write_cfg(tmp_path, {"noise": {"duration": 2.0}, "synthetic": {"flux_points": 6}})
    assert run("generate", "noise-flux", "--config", cfg, "--out", tmp_path) == EXIT_OK
    assert run("noise", tmp_path / "manifest.json", "--config", cfg, "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "noise_report.json").read_text())
    assert rep["noise_vs_flux"]["status"] == "ok" and rep["noise_vs_flux"]["independent"]
    assert rep["noise_vs_power"]["status"] == "not-applicable"


def test_noise_edge_cases(tmp_path):
    cfg = write_cfg(tmp_path, {"noise": {"duration": 1.0}, "synthetic": {"powers_dbm": [-80.0]}})
    assert run("generate", "noise-power", "--config", cfg, "--out", tmp_path) == EXIT_OK
    man = tmp_path / "manifest.json"
    assert run("noise", man, "--config", cfg, "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "noise_report.json").read_text())
    assert rep["noise_vs_power"]["status"] == "not-applicable"
    assert rep["noise_vs_flux"]["status"] == "not-applicable"
    # corrupt the only record: the checksum check marks it, nothing is left to analyse
    rec = read_manifest(man)[0]
    with open(rec["abspath"], "r+b") as fh:
        fh.write(b"\1" * 8)
    assert run("noise", man, "--config", cfg, "--out", tmp_path) == EXIT_FIT
    doc = json.loads(man.read_text())
    doc["records"] = []
    man.write_text(json.dumps(doc))
    assert run("noise", man, "--out", tmp_path) == EXIT_VALIDATION


def test_checksum_mismatch_is_reported_per_record(tmp_path):
    cfg = write_cfg(tmp_path, {"noise": {"duration": 1.0},
                               "synthetic": {"powers_dbm": [-85.0, -80.0]}})
    assert run("generate", "noise-power", "--config", cfg, "--out", tmp_path) == EXIT_OK
    rec = read_manifest(tmp_path / "manifest.json")[0]
    with open(rec["abspath"], "r+b") as fh:
        fh.write(b"\1" * 8)
    assert run("noise", tmp_path / "manifest.json", "--config", cfg, "--out", tmp_path) == EXIT_OK
    entries = json.loads((tmp_path / "noise_report.json").read_text())["records"]
    assert "checksum" in entries[0]["error"] and "error" not in entries[1]


def test_validation_paths(tmp_path, monkeypatch, capsys):
    assert run("generate", "movie", "--out", tmp_path) == EXIT_VALIDATION
    bad = write_cfg(tmp_path, {"squid": {"loop_inductance": -1.0}})
    assert run("validate-config", "--config", bad) == EXIT_VALIDATION
    good = write_cfg(tmp_path, {"rng_seed": 5}, "good.json")
    monkeypatch.setenv(CONFIG_ENV, str(good))
    capsys.readouterr()
    assert run("validate-config") == EXIT_OK
    assert json.loads(capsys.readouterr().out)["rng_seed"] == 5
    assert run("validate-config", "--config", tmp_path / "nope.json") == EXIT_IO


def test_outputs_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run("simulate-tuning", "--ramp", "0:1:401,1:0:401", "--out", tmp_path / d) == EXIT_OK
    for name in ("tuning_curve.csv", "tuning_curve.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
