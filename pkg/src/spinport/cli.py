"""Command-line entry point: ``simulate <preset> --config ... --seed ... --out ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .algebra import DimensionError
from .config import ConfigError, from_document
from .engines.ed import NumericError
from .model import ParameterError
from .presets import PRESETS, RUNNERS
from .protocol import ProtocolError
from .report import new_manifest, now_iso, write_csv, write_json
from .states import StateError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
log = logging.getLogger("spinport")


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description="Spin-ensemble teleportation simulations.")
    p.add_argument("preset", choices=PRESETS)
    p.add_argument("--config", type=Path, help="JSON config (kHz units); defaults when omitted")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--engine", choices=("ed", "gauss", "dtwa"))
    p.add_argument("--n-ions", type=int, dest="n_ions", help="ions per ensemble")
    p.add_argument("--input", choices=("sc", "pdsc", "ss", "dicke"))
    p.add_argument("--kc", type=int, help="Dicke excitation count")
    p.add_argument("--r", type=float, help="fixed entangling parameter |r| (skips the V_s scan)")
    p.add_argument("--no-figures", action="store_true", help="write tables only")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _read_doc(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not text.strip():
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    return doc


def apply_overrides(doc: dict, args) -> dict:
    doc = json.loads(json.dumps(doc))
    if args.engine:
        doc.setdefault("protocol", {})["engine"] = args.engine
    if args.n_ions is not None:
        doc.setdefault("system", {})["n_ions"] = args.n_ions
    if args.input:
        doc.setdefault("input", {})["kind"] = args.input.upper()
    if args.kc is not None:
        doc.setdefault("input", {})["k_c"] = args.kc
    if args.r is not None:
        proto = doc.setdefault("protocol", {})
        proto["r"] = args.r
        if proto.get("tms_mode", "auto") == "auto":
            proto["tms_mode"] = "fixed"
    if args.no_figures:
        doc["figures"] = False
    return doc


def run(args) -> int:
    doc = apply_overrides(_read_doc(args.config), args)
    cfg = from_document(doc, seed=args.seed, preset=args.preset)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    manifest = new_manifest(args.preset, cfg.digest(), args.seed)
    log.info("running %s (config %s)", args.preset, manifest.config_hash[:12])
    result = RUNNERS[args.preset](cfg)
    written = [write_json(out / "config.resolved.json", cfg.raw)]
    for name, table in result.tables.items():
        written.append(write_csv(out / f"{name}.csv", table.header, table.rows))
    written.append(write_json(out / "summary.json", result.summary))
    if cfg.raw["figures"]:
        from .plotting import render

        written.extend(render(args.preset, result.plot_data, out))
    for path in written:
        manifest.add(path, out)
    manifest.finished = now_iso()
    manifest.write(out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return run(args)
    except (ConfigError, ParameterError, ProtocolError, StateError, DimensionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
