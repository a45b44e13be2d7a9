"""Experiment configuration: JSON in kHz, validated against a schema, resolved to model objects."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .model import EnsembleSpec, SystemSpec, khz
from .protocol import ProtocolConfig
from .states import InputStateSpec


class ConfigError(ValueError):
    """Invalid experiment configuration."""


_NUM = {"type": "number"}
_PER_ENSEMBLE_NUM = {
    "type": "object",
    "properties": {k: _NUM for k in "abc"},
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_ions": {"oneOf": [
                    {"type": "integer", "minimum": 1},
                    {"type": "object", "properties": {k: {"type": "integer", "minimum": 1} for k in "abc"},
                     "additionalProperties": False},
                ]},
                "omega_khz": _PER_ENSEMBLE_NUM,
                "g_khz": {"oneOf": [_NUM, _PER_ENSEMBLE_NUM]},
                "delta_m_khz": _NUM,
                "n_max": {"type": "integer", "minimum": 1},
            },
        },
        "input": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["SC", "PDSC", "SS", "DICKE", "sc", "pdsc", "ss", "dicke"]},
                "theta": _NUM,
                "phi": _NUM,
                "phi_c_deg": _NUM,
                "phi_ss": {"type": ["number", "null"]},
                "xi_db": {"type": ["number", "null"], "exclusiveMaximum": 0},
                "k_c": {"type": "integer", "minimum": 0},
            },
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tms_mode": {"enum": ["auto", "fixed", "ideal"]},
                "r": {"type": ["number", "null"], "minimum": 0},
                "r_step": {"type": "number", "exclusiveMinimum": 0},
                "r_max": {"type": "number", "exclusiveMinimum": 0},
                "refine": {"type": "boolean"},
                "bs_angle": {"type": "number", "exclusiveMinimum": 0, "maximum": math.pi / 2},
                "outcomes": {"enum": ["enumerate", "sample", "most-probable"]},
                "n_samples": {"type": "integer", "minimum": 1},
                "feedback": {"type": "boolean"},
                "engine": {"enum": ["ed", "gauss", "dtwa"]},
                "tms_model": {"enum": ["esm", "fm"]},
                "n_traj": {"type": "integer", "minimum": 1},
            },
        },
        "witness_scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r_max": {"type": "number", "exclusiveMinimum": 0},
                "r_step": {"type": "number", "exclusiveMinimum": 0},
                "full_model": {"type": "boolean"},
            },
        },
        "scaling_sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_values": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 4},
                "inputs": {"type": "array", "items": {"enum": ["SC", "PDSC", "SS", "DICKE"]}, "minItems": 1},
            },
        },
        "engine_compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_ions": {"type": "integer", "minimum": 1},
                "gauss_n_ions": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "n_traj": {"type": "integer", "minimum": 1},
                "r_max": {"type": "number", "exclusiveMinimum": 0},
                "n_points": {"type": "integer", "minimum": 2},
            },
        },
        "husimi": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_theta": {"type": "integer", "minimum": 2},
                "n_phi": {"type": "integer", "minimum": 2},
            },
        },
        "figures": {"type": "boolean"},
    },
}

DEFAULTS = {
    "system": {
        "n_ions": 70,
        "omega_khz": {"a": -19.1, "b": -18.8, "c": -19.1},
        "g_khz": 3.6,
        "delta_m_khz": -26.0,
        "n_max": 10,
    },
    "input": {"kind": "SC", "theta": math.pi / 2, "phi": math.pi, "phi_c_deg": 6.0,
              "phi_ss": None, "xi_db": -4.15, "k_c": 1},
    "protocol": {"tms_mode": "auto", "r": None, "r_step": 0.02, "r_max": 3.0, "refine": True,
                 "bs_angle": math.pi / 4, "outcomes": "enumerate", "n_samples": 1000,
                 "feedback": True, "engine": "ed", "tms_model": "esm", "n_traj": 10_000},
    "witness_scan": {"r_max": 2.0, "r_step": 0.02, "full_model": True},
    "scaling_sweep": {"n_values": [10, 20, 30, 40, 50, 60, 70], "inputs": ["SC", "SS"]},
    "engine_compare": {"n_ions": 20, "gauss_n_ions": [20, 40], "n_traj": 10_000, "r_max": 0.6, "n_points": 13},
    "husimi": {"n_theta": 61, "n_phi": 121},
    "figures": True,
}


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            out[k] = _merge(base[k], v)
        else:
            out[k] = v
    return out


def _describe(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "additionalProperties":
        return f"unknown key at {where}: {err.message}"
    return f"{where}: {err.message}"


@dataclass
class ExperimentConfig:
    """Resolved configuration; ``raw`` is the fully defaulted JSON document."""

    raw: dict
    system: SystemSpec
    protocol: ProtocolConfig
    seed: int = 0
    preset: str = ""
    out_dir: Path | None = None
    extras: dict = field(default_factory=dict)

    def digest(self) -> str:
        doc = {"config": self.raw, "seed": self.seed, "preset": self.preset}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def resolve(doc: dict) -> dict:
    """Validate a user document and fill defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(_describe(e) for e in errors))
    return _merge(DEFAULTS, doc)


def build_system(sys_doc: dict) -> SystemSpec:
    n = sys_doc["n_ions"]
    n_ions = {k: n for k in "abc"} if isinstance(n, int) else {**{k: 70 for k in "abc"}, **n}
    g = sys_doc["g_khz"]
    g_map = {k: g for k in "abc"} if not isinstance(g, dict) else {**{k: 3.6 for k in "abc"}, **g}
    orient = {"a": "-x", "b": "+x", "c": "-x"}
    ens = {k: EnsembleSpec(k, n_ions[k], khz(sys_doc["omega_khz"][k]), khz(g_map[k]), orient[k]) for k in "abc"}
    return SystemSpec(ens["a"], ens["b"], ens["c"], khz(sys_doc["delta_m_khz"]), sys_doc["n_max"])


def build_input(doc: dict) -> InputStateSpec:
    return InputStateSpec(
        kind=doc["kind"], theta=doc["theta"], phi=doc["phi"], phi_c=math.radians(doc["phi_c_deg"]),
        phi_ss=doc["phi_ss"], xi_db=doc["xi_db"], k_c=doc["k_c"],
    )


def build_protocol(doc: dict, input_spec: InputStateSpec, seed: int) -> ProtocolConfig:
    return ProtocolConfig(input=input_spec, seed=seed, **doc)


def from_document(doc: dict, seed: int = 0, preset: str = "") -> ExperimentConfig:
    raw = resolve(doc)
    try:
        system = build_system(raw["system"])
        protocol = build_protocol(raw["protocol"], build_input(raw["input"]), seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(raw=raw, system=system, protocol=protocol, seed=seed, preset=preset)


def load_config(path: str | Path | None, seed: int = 0, preset: str = "") -> ExperimentConfig:
    """Read a JSON config file; an empty file or ``None`` gives the defaults."""
    if path is None:
        return from_document({}, seed, preset)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    if not text.strip():
        doc = {}
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_document(doc, seed, preset)
