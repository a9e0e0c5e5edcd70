"""JSON schemas for command-line configs and reports."""

from __future__ import annotations

import jsonschema

_number = {"type": "number"}
_nullable_number = {"type": ["number", "null"]}
_interval = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}
_time = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 1}]}
_inf_number = {"oneOf": [_number, {"enum": ["inf", "-inf"]}]}

EXP_TERM = {
    "type": "object",
    "properties": {"weight": _number, "rate": _number},
    "required": ["weight", "rate"],
    "additionalProperties": False,
}
GAUSS_TERM = {
    "type": "object",
    "properties": {"mean": _number, "var": _number, "mass": _number},
    "required": ["mean", "var"],
    "additionalProperties": False,
}
MEASURE = {
    "type": "object",
    "properties": {"exp": {"type": "array", "items": EXP_TERM}, "gauss": {"type": "array", "items": GAUSS_TERM}},
    "additionalProperties": False,
}
# process internals are checked by ProcessSpec.from_json, which is equally strict
PAIR = {
    "type": "object",
    "properties": {"measure": MEASURE, "process": {"type": "object"}, "initial_shift": _number},
    "required": ["measure", "process"],
    "additionalProperties": False,
}
DESIGN = {
    "type": "object",
    "properties": {
        "times": {"type": "array", "items": _time, "minItems": 1},
        "shifts": {"type": "array", "items": _time},
        "boxes": {"type": "array", "items": _interval},
        "rectangles": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "times": {"type": "array", "items": _time, "minItems": 2, "maxItems": 2},
                    "rect": {"type": "array", "items": _interval, "minItems": 2, "maxItems": 2},
                },
                "required": ["times", "rect"],
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

CONFIG = {
    "type": "object",
    "properties": {
        "description": {"type": "string"},
        "pair": PAIR,
        "pair_a": PAIR,
        "pair_b": PAIR,
        "times": {"type": "array", "items": _time, "minItems": 1},
        "boxes": {"type": "array", "items": {"oneOf": [_interval, {"type": "null"}]}},
        "box": {"type": "array", "items": _interval, "minItems": 1},
        "design": DESIGN,
        "replicates": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "method": {"enum": ["window", "targeted"]},
        "workers": {"type": "integer", "minimum": 1},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "window_padding": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "mode": {"enum": ["analytic", "mc", "both"]},
    },
    "additionalProperties": False,
}

CLASSIFICATION = {
    "type": "object",
    "properties": {
        "label": {"enum": ["S1", "S1*", "S2", "S3", "not_stationary"]},
        "params": {"type": "object"},
        "evidence": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"check": {"type": "string"}, "residual": _number, "note": {"type": "string"}},
                "required": ["check", "residual"],
                "additionalProperties": False,
            },
        },
        "canonical": {"oneOf": [PAIR, {"type": "null"}]},
    },
    "required": ["label", "params", "evidence", "canonical"],
    "additionalProperties": False,
}

CANONICAL = {
    "type": "object",
    "properties": {
        "label": {"enum": ["S1", "S1*", "S2", "S3", "not_stationary"]},
        "canonical": {"oneOf": [PAIR, {"type": "null"}]},
    },
    "required": ["label", "canonical"],
    "additionalProperties": False,
}

COMPARISON = {
    "type": "object",
    "properties": {
        "times": {"type": "array", "items": _time},
        "shift": {"oneOf": [_time, {"type": "null"}]},
        "box": {"type": "array", "items": _interval},
        "est_a": _number,
        "se_a": _number,
        "est_b": _number,
        "se_b": _number,
        "analytic": _nullable_number,
        "analytic_b": _nullable_number,
        "z": _inf_number,
    },
    "required": ["times", "shift", "box", "est_a", "se_a", "est_b", "se_b", "analytic", "z"],
    "additionalProperties": False,
}

TEST_REPORT = {
    "type": "object",
    "properties": {
        "test": {"enum": ["stationarity", "equal_in_law"]},
        "comparisons": {"type": "array", "items": COMPARISON},
        "verdict": {"enum": ["pass", "fail"]},
        "alpha": _number,
        "critical_z": _number,
        "replicates": {"type": "integer"},
        "seed": {"type": "integer"},
        "design": DESIGN,
    },
    "required": ["comparisons", "verdict"],
    "additionalProperties": False,
}

EQUAL_IN_LAW = {
    "type": "object",
    "properties": {
        "verdict": {"enum": ["pass", "fail"]},
        "analytic": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "properties": {
                        "equal": {"type": "boolean"},
                        "label_a": {"type": "string"},
                        "label_b": {"type": "string"},
                        "reason": {"type": "string"},
                        "certificate": {"type": ["object", "null"]},
                    },
                    "required": ["equal", "label_a", "label_b", "reason", "certificate"],
                    "additionalProperties": False,
                },
            ]
        },
        "mc": {"oneOf": [{"type": "null"}, TEST_REPORT]},
    },
    "required": ["verdict", "analytic", "mc"],
    "additionalProperties": False,
}

INTENSITY = {
    "type": "object",
    "properties": {
        "times": {"type": "array", "items": _time},
        "box": {"type": "array", "items": _interval},
        "analytic": _nullable_number,
        "estimate": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "properties": {"mean_count": _number, "std_error": _number, "replicates": {"type": "integer"}},
                    "required": ["mean_count", "std_error", "replicates"],
                    "additionalProperties": False,
                },
            ]
        },
    },
    "required": ["times", "box", "analytic", "estimate"],
    "additionalProperties": False,
}

SIMULATE = {
    "type": "object",
    "properties": {
        "times": {"type": "array", "items": _time},
        "samples": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "replicate": {"type": "integer"},
                    "window": {"type": "array", "items": _inf_number, "minItems": 2, "maxItems": 2},
                    "truncation_error_bound": _number,
                    "start_points": {"type": "array", "items": _number},
                    "path_values": {"type": "array", "items": {"type": "array", "items": _number}},
                },
                "required": ["replicate", "window", "truncation_error_bound", "start_points", "path_values"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["times", "samples"],
    "additionalProperties": False,
}

OUTPUT_SCHEMAS = {
    "simulate": SIMULATE,
    "intensity": INTENSITY,
    "classify": CLASSIFICATION,
    "canonicalize": CANONICAL,
    "verify-stationarity": TEST_REPORT,
    "equal-in-law": EQUAL_IN_LAW,
}


def validate(instance, schema) -> None:
    """Raise jsonschema.ValidationError if ``instance`` does not match ``schema``."""
    jsonschema.validate(instance, schema)
