"""JSON Schemas for every report the command-line tool prints."""

from __future__ import annotations

_NUM = {"type": "number"}
_STR = {"type": "string"}
_RATIONAL = {"type": "string", "pattern": r"^-?\d+(/\d+)?$|^-?[0-9.eE+-]+$"}
_COMPLEX = {"type": "object", "required": ["re", "im"],
            "properties": {"re": _NUM, "im": _NUM}, "additionalProperties": False}

ESTIMATE = {
    "type": "object",
    "required": ["value", "std_error", "samples", "seed"],
    "properties": {
        "value": {"oneOf": [_NUM, _COMPLEX]},
        "std_error": {"type": "number", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
}

MANIFEST = {
    "type": "object",
    "required": ["command", "domain", "parameters", "seed", "tool_version", "timestamp"],
    "properties": {
        "command": _STR,
        "domain": _STR,
        "parameters": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "tool_version": _STR,
        "timestamp": {"type": "string", "pattern": r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$"},
    },
    "additionalProperties": False,
}


def _report(required: list, properties: dict) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "required": ["manifest", *required],
        "properties": {"manifest": MANIFEST, **properties},
    }


CONSTANTS = _report(["beta_min", "beta_int", "structure"], {
    "beta_min": _RATIONAL,
    "beta_int": _RATIONAL,
    "dimension": {"type": "integer"},
    "structure": {
        "type": "object",
        "required": ["l", "n", "d", "q"],
        "properties": {
            "l": {"type": "integer", "minimum": 1},
            "n": {"type": "array", "items": _RATIONAL},
            "d": {"type": "array", "items": _RATIONAL},
            "q": {"type": "array", "items": _RATIONAL},
        },
    },
})

KERNEL = _report(["z", "w", "beta", "kernel"], {
    "z": _STR, "w": _STR, "beta": _NUM, "c_beta": _NUM, "kernel": _COMPLEX,
})

DISTANCE = _report(["z", "w", "distance"], {
    "z": _STR, "w": _STR, "distance": {"type": "number", "minimum": 0},
})

IDENTITY = _report(["alpha", "beta", "probe_points", "ratios", "coefficient_of_variation", "verdict"], {
    "alpha": _NUM,
    "beta": _NUM,
    "probe_points": {"type": "array", "items": _STR},
    "ratios": {"type": "array", "items": ESTIMATE},
    "coefficient_of_variation": {"type": "number", "minimum": 0},
    "verdict": {"enum": ["constant-consistent", "inconsistent", "divergence-suspected"]},
})

_SHELL = {
    "type": "object",
    "required": ["depth", "max_ratio", "mean_mu_hat", "mean_mu_tilde", "mean_F"],
    "properties": {k: {"type": "number", "minimum": 0}
                   for k in ["depth", "max_ratio", "mean_mu_hat", "mean_mu_tilde", "mean_F"]},
}

DIAGNOSTICS = _report(["beta0", "beta", "sup_ratio", "shell_profile", "verdict"], {
    "beta0": _NUM,
    "beta": _NUM,
    "radius": {"type": "number", "exclusiveMinimum": 0},
    "sup_ratio": {"type": "number", "minimum": 0},
    "shell_profile": {"type": "array", "items": _SHELL, "minItems": 1},
    "carleson_constant": {"type": "number", "minimum": 0},
    "thresholds": {"type": "object"},
    "verdict": {"enum": ["compact-consistent", "not-compact", "bounded-only",
                         "unbounded-suspected", "inconclusive"]},
    "notes": {"type": "array", "items": _STR},
})

VALIDATION_FAILURE = _report(["validation"], {
    "validation": {
        "type": "object",
        "required": ["passed", "witness", "image", "disclaimer"],
        "properties": {"passed": {"const": False}, "witness": _STR, "image": _STR,
                       "disclaimer": _STR, "points_checked": {"type": "integer"}},
    },
})

CARLESON = _report(["beta", "radius", "rows"], {
    "beta": _NUM,
    "radius": _NUM,
    "rows": {
        "type": "array",
        "items": {
            "type": "object",
            "required": ["point", "depth", "mu_tilde", "mu_hat", "F"],
            "properties": {"point": _STR, "depth": _NUM, "mu_tilde": ESTIMATE,
                           "mu_hat": ESTIMATE, "F": ESTIMATE},
        },
    },
})

SELFTEST = _report(["results", "passed"], {
    "passed": {"type": "boolean"},
    "results": {
        "type": "array",
        "items": {
            "type": "object",
            "required": ["suite", "check", "passed", "detail"],
            "properties": {"suite": _STR, "check": _STR, "passed": {"type": "boolean"},
                           "detail": _STR},
        },
    },
})

SCHEMAS = {
    "manifest": MANIFEST,
    "constants": CONSTANTS,
    "kernel": KERNEL,
    "distance": DISTANCE,
    "verify-identity": IDENTITY,
    "compactness": DIAGNOSTICS,
    "validation-failure": VALIDATION_FAILURE,
    "carleson": CARLESON,
    "selftest": SELFTEST,
}
