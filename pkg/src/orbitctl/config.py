"""Run-configuration loading with schema validation (unknown keys are rejected)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .fields import BUILTINS, ControlSystem, system_from_config
from .flow import IntegratorOptions

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}}
_MATRIX = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 9, "maxItems": 9},
        {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}, "minItems": 3, "maxItems": 3},
    ]
}

MANIFOLD_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["rn", "torus", "sphere2"]},
        "dim": {"type": "integer", "minimum": 1},
        "periods": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

GENERATOR_SCHEMA = {
    "type": "object",
    "properties": {
        "components": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "controls": {"type": "object", "patternProperties": {"^u[1-9][0-9]*$": {"type": "number"}}, "additionalProperties": False},
        "name": {"type": "string"},
    },
    "required": ["components"],
    "additionalProperties": False,
}

SYSTEM_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"builtin": {"enum": sorted(BUILTINS)}, "params": {"type": "object"}},
            "required": ["builtin"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "manifold": MANIFOLD_SCHEMA,
                "generators": {"type": "array", "items": GENERATOR_SCHEMA, "minItems": 1},
                "label": {"type": "string"},
            },
            "required": ["manifold", "generators"],
            "additionalProperties": False,
        },
    ]
}

RUN_SCHEMA = {
    "type": "object",
    "properties": {
        "system": SYSTEM_SCHEMA,
        "integrator": {
            "type": "object",
            "properties": {"step": {"type": "number", "exclusiveMinimum": 0}, "sphere_renormalize": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "point": _NUMBER_LIST,
        "depth": {"type": "integer", "minimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "legs_per_sample": {"type": "integer", "minimum": 1},
        "t_max": {"type": "number", "exclusiveMinimum": 0},
        "radius": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["system"],
    "additionalProperties": False,
}

MATRICES_SCHEMA = {
    "type": "object",
    "properties": {"A": _MATRIX, "B": {"type": "array", "items": _MATRIX}},
    "required": ["A"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key and its location."""


def _location(err: jsonschema.ValidationError) -> str:
    return "/" + "/".join(str(p) for p in err.absolute_path) if err.absolute_path else "<root>"


def _best(err: jsonschema.ValidationError) -> jsonschema.ValidationError:
    # descend into oneOf branches and keep the deepest, most specific complaint
    if err.context:
        return _best(max(err.context, key=lambda e: (len(e.absolute_path), -len(e.schema_path))))
    return err


def validate(data: Any, schema: Mapping, source: str = "config") -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = _best(errors[0])
        raise ConfigError(f"{source}: at {_location(err)}: {err.message}")


def load_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def normalize_run(data: Any) -> dict:
    """A bare system definition is accepted as shorthand for ``{"system": ...}``."""
    if isinstance(data, dict) and "system" not in data and ("builtin" in data or "manifold" in data):
        return {"system": data}
    return data


def load_run(path: str | Path) -> dict:
    data = normalize_run(load_json(path))
    validate(data, RUN_SCHEMA, str(path))
    return data


def build_system(run: Mapping) -> ControlSystem:
    try:
        return system_from_config(run["system"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"at /system: {exc}") from None


def integrator_options(run: Mapping) -> IntegratorOptions:
    return IntegratorOptions(**run.get("integrator", {}))


def load_matrices(path: str | Path) -> dict:
    data = load_json(path)
    validate(data, MATRICES_SCHEMA, str(path))
    return data
