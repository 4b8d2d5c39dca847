"""Experiment configuration: JSON parsing and schema validation."""
from __future__ import annotations

import json

import jsonschema


class ConfigParseError(ValueError):
    def __init__(self, source, err: json.JSONDecodeError):
        super().__init__(f"{source}: line {err.lineno}, column {err.colno}: {err.msg}")
        self.lineno = err.lineno
        self.colno = err.colno


class ConfigValidationError(ValueError):
    def __init__(self, source, errors):
        self.errors = errors
        lines = [f"{source}: invalid configuration"]
        for path, msg in errors:
            lines.append(f"  at {path or '<root>'}: {msg}")
        super().__init__("\n".join(lines))


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}
_bound = {"oneOf": [_num, _vec]}

SET = {
    "type": "object",
    "required": ["type"],
    "properties": {"type": {"enum": ["box", "ball", "whole_space"]}},
    "allOf": [
        {"if": {"properties": {"type": {"const": "box"}}},
         "then": {"required": ["lower", "upper"],
                  "properties": {"lower": _bound, "upper": _bound}}},
        {"if": {"properties": {"type": {"const": "ball"}}},
         "then": {"required": ["center", "radius"],
                  "properties": {"center": _vec, "radius": _pos}}},
    ],
}

SCHEDULE = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["harmonic", "harmonic_shift", "log_damped",
                          "constant", "zero"]},
        "c": _pos, "h": _nonneg,
    },
    "allOf": [{"if": {"properties": {"type": {"const": "constant"}}},
               "then": {"required": ["h"]}}],
}

COMPRESSOR = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["identity", "uniform_quantizer", "gaussian"]},
        "bits": {"type": "integer", "minimum": 1, "maximum": 32},
        "variance": _pos,
    },
    "allOf": [
        {"if": {"properties": {"type": {"const": "uniform_quantizer"}}},
         "then": {"required": ["bits"]}},
        {"if": {"properties": {"type": {"const": "gaussian"}}},
         "then": {"required": ["variance"]}},
    ],
}

POWER_PARAMS = {
    "type": "object",
    "properties": {"weights": _vec, "gains": _vec, "noise_var": _pos,
                   "p_min": _pos, "p_max": _pos},
    "additionalProperties": False,
}

OBJECTIVE = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"enum": ["sum_quadratic", "six_hump_camel", "power_allocation"]},
        "anchors": {"type": "array", "items": _vec, "minItems": 1},
        "anchor_seed": {"type": "integer", "minimum": 0},
        "n_anchors": {"type": "integer", "minimum": 1},
        "dim": {"type": "integer", "minimum": 1},
        "params": POWER_PARAMS,
    },
    "allOf": [{"if": {"properties": {"name": {"const": "sum_quadratic"}}},
               "then": {"oneOf": [{"required": ["anchors"]},
                                  {"required": ["anchor_seed"]}]}}],
}

START = {"oneOf": [
    _vec,
    {"type": "object", "required": ["uniform"], "additionalProperties": False,
     "properties": {"uniform": {"type": "array", "items": _num,
                                "minItems": 2, "maxItems": 2}}},
]}

METHOD = {
    "type": "object",
    "required": ["method"],
    "properties": {
        "method": {"enum": ["pgd", "fpnag", "pnag", "pogm"]},
        "gamma": _pos,
        "mu": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "schedule": SCHEDULE,
        "label": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"method": {"enum": ["fpnag", "pnag", "pogm"]}}},
         "then": {"required": ["gamma"]}},
        {"if": {"properties": {"method": {"const": "fpnag"}}},
         "then": {"required": ["mu"]}},
    ],
}

_meta = {"experiment": {}, "description": {"type": "string"},
         "figure": {"type": "string"}, "name": {"type": "string"}}

OPTIMIZER_RUN = {
    "type": "object",
    "required": ["experiment", "objective", "set", "methods", "n_iters",
                 "x0", "seeds"],
    "properties": {
        **_meta,
        "objective": OBJECTIVE,
        "set": SET,
        "methods": {"type": "array", "items": METHOD, "minItems": 1},
        "compressor": COMPRESSOR,
        "noise_variance": _nonneg,
        "lr_decay": {"type": "boolean"},
        "n_iters": {"type": "integer", "minimum": 0},
        "stop_kkt_tol": _nonneg,
        "x0": START,
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0},
                  "minItems": 1},
    },
    "additionalProperties": False,
}

PSP = {
    "type": "object",
    "required": ["experiment", "diagnostic", "set", "h_fine"],
    "properties": {
        **_meta,
        "diagnostic": {"enum": ["contraction", "window", "lyapunov"]},
        "objective": OBJECTIVE,
        "set": SET,
        "h_fine": _pos,
        "h_fines": {"type": "array", "items": _pos, "minItems": 1},
        "t_end": _pos,
        "x0": _vec,
        "gamma_mod": _pos,
        "gamma": _pos,
        "mu": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "schedule": SCHEDULE,
        "windows": {"type": "array", "items": _nonneg, "minItems": 1},
        "tau": _pos,
        "dim": {"type": "integer", "minimum": 1},
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0},
                  "minItems": 1},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"diagnostic": {"const": "contraction"}}},
         "then": {"required": ["dim", "gamma_mod", "t_end", "seeds"]}},
        {"if": {"properties": {"diagnostic": {"const": "window"}}},
         "then": {"required": ["objective", "x0", "schedule", "windows", "tau"]}},
        {"if": {"properties": {"diagnostic": {"const": "lyapunov"}}},
         "then": {"required": ["objective", "x0", "gamma", "mu", "t_end",
                               "h_fines"]}},
    ],
}

DPCGD = {
    "type": "object",
    "required": ["experiment", "n_iters", "compressors", "n_runs", "base_seed"],
    "properties": {
        **_meta,
        "params": POWER_PARAMS,
        "x0": {"oneOf": [_vec, {"enum": ["p_min", "p_max", "center"]}]},
        "alpha": SCHEDULE,
        "lambda": SCHEDULE,
        "n_iters": {"type": "integer", "minimum": 0},
        "channel": {
            "type": "object", "required": ["type"],
            "properties": {"type": {"enum": ["deterministic", "random_uniform"]},
                           "low": _pos, "high": _pos},
            "additionalProperties": False,
        },
        "compressors": {"type": "array", "items": COMPRESSOR, "minItems": 1},
        "noise_variance": _nonneg,
        "n_runs": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

SCHEMAS = {"optimizer_run": OPTIMIZER_RUN, "psp_diagnostic": PSP, "dpcgd": DPCGD}

TOP = {
    "type": "object",
    "required": ["experiment"],
    "properties": {"experiment": {"enum": sorted(SCHEMAS)}},
}


def _path(err) -> str:
    return "/".join(str(p) for p in err.absolute_path)


def _errors(validator, cfg):
    errs = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    out = []
    for e in errs:
        # report the most specific failures of composite keywords
        leaves = [c for c in e.context if not c.context] if e.context else []
        if e.validator in ("allOf",) and leaves:
            out.extend((_path(c), c.message) for c in leaves)
        else:
            out.append((_path(e), e.message))
    return out


def validate(cfg, source="<config>") -> dict:
    top = jsonschema.Draft202012Validator(TOP)
    errs = _errors(top, cfg)
    if not errs:
        errs = _errors(jsonschema.Draft202012Validator(SCHEMAS[cfg["experiment"]]), cfg)
    if errs:
        raise ConfigValidationError(source, errs)
    return cfg


def parse(text: str, source="<config>") -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigParseError(source, err) from None


def load(text: str, source="<config>") -> dict:
    return validate(parse(text, source), source)
