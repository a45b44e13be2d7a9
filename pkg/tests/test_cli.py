import csv
import json
import math

import pytest

from spinport.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from spinport.config import ConfigError, DEFAULTS, from_document, load_config
from spinport.model import default_system
from spinport.report import sha256_file


def test_empty_file_gives_figure_defaults(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    cfg = load_config(p)
    ref = default_system()
    assert cfg.system == ref
    assert cfg.raw == DEFAULTS
    assert load_config(None).system == ref


def test_unknown_key_named(tmp_path):
    with pytest.raises(ConfigError, match="omega_q"):
        from_document({"system": {"omega_q": 1.0}})
    with pytest.raises(ConfigError, match="colour"):
        from_document({"colour": "red"})
    p = tmp_path / "broken.json"
    p.write_text('{"system": {\n "n_ions": }')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)


def test_partial_override_keeps_defaults():
    cfg = from_document({"system": {"omega_khz": {"b": -18.9}, "n_ions": {"c": 30}}})
    assert cfg.raw["system"]["omega_khz"] == {"a": -19.1, "b": -18.9, "c": -19.1}
    assert cfg.system.c.N == 30 and cfg.system.a.N == 70


def test_invalid_values_rejected():
    for doc in ({"protocol": {"bs_angle": 2.0}}, {"system": {"n_ions": 0}},
                {"protocol": {"engine": "mps"}}, {"input": {"xi_db": 1.0}}, {"protocol": {"tms_mode": "fixed"}}):
        with pytest.raises(ConfigError):
            from_document(doc)



def test_teleport_outputs_and_manifest(tmp_path):
    out = tmp_path / "tp"
    code = main(["teleport", "--out", str(out), "--n-ions", "10", "--seed", "4", "--input", "pdsc"])
    assert code == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    listed = {f["path"] for f in man["files"]}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    for f in man["files"]:
        assert sha256_file(out / f["path"]) == f["sha256"]
    resolved = json.loads((out / "config.resolved.json").read_text())
    cfg = from_document({"system": {"n_ions": 10}, "input": {"kind": "PDSC"}}, seed=4, preset="teleport")
    assert resolved == cfg.raw and man["config_hash"] == cfg.digest()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["probability_sum"] == pytest.approx(1.0)
    with open(out / "magnetization.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["axis", "M", "P_input", "P_output"]
    assert any(name.endswith(".png") for name in listed)


def test_rerun_is_byte_identical(tmp_path):
    args = ["outcome-grid", "--n-ions", "8", "--seed", "1", "--no-figures"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    for name in ("outcome_grid.csv", "husimi_output.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    with open(tmp_path / "a" / "outcome_grid.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 81
    best = max(rows, key=lambda r: float(r["P"]))
    assert (float(best["M_a"]), float(best["M_c"])) == (0.0, 0.0)
    # full precision floats round-trip
    assert all(float(repr(float(r["P"]))) == float(r["P"]) for r in rows)


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"omega_q": 3}')
    assert main(["teleport", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    short = tmp_path / "short.json"
    short.write_text('{"protocol": {"r_max": 0.3}}')
    assert main(["teleport", "--config", str(short), "--n-ions", "10", "--out", str(tmp_path / "y")]) == EXIT_NUMERIC
    assert main(["teleport", "--input", "dicke", "--engine", "gauss", "--out", str(tmp_path / "z")]) == EXIT_CONFIG


def test_other_presets_small(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "system": {"n_ions": 8, "n_max": 4},
        "witness_scan": {"r_max": 1.6, "r_step": 0.1},
        "scaling_sweep": {"n_values": [6, 8, 10, 12], "inputs": ["SC"]},
        "engine_compare": {"n_ions": 6, "gauss_n_ions": [10], "n_traj": 300, "n_points": 4},
    }))
    for preset in ("witness-scan", "scaling-sweep", "engine-compare"):
        out = tmp_path / preset
        assert main([preset, "--config", str(cfg), "--out", str(out), "--seed", "2"]) == EXIT_OK
        assert (out / "summary.json").exists() and list(out.glob("*.png"))
    with open(tmp_path / "witness-scan" / "witness_scan.csv") as fh:
        assert next(csv.reader(fh)) == ["r", "V_s_ESM", "V_s_HP", "V_s_FM"]
    s = json.loads((tmp_path / "scaling-sweep" / "summary.json").read_text())
    assert math.isfinite(s["fits"]["SC"]["p"])


def test_engine_flag_and_fixed_r(tmp_path):
    out = tmp_path / "g"
    assert main(["teleport", "--engine", "gauss", "--r", "0.55", "--out", str(out), "--no-figures"]) == EXIT_OK
    s = json.loads((out / "summary.json").read_text())
    assert s["average_fidelity"] == pytest.approx(1 / (1 + math.exp(-1.1)))
    assert not list(out.glob("*.png"))
