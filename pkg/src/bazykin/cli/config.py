"""Scenario files: JSON with a versioned schema, validated before any work.

    {
      "schema_version": 1,
      "command": "turing-curve",
      "params": {"nu": 10, "chi": 6, "alpha": 1, "beta": 2.85,
                 "eta": 1, "delta": 0.11, "eps": 1},
      "options": {"delta_range": [0.128, 0.14], "n": 61},
      "seed": 0
    }

``options`` may be partial; :func:`resolve` fills in the defaults so the
manifest records the complete configuration actually run.
"""

from __future__ import annotations

import copy
import json
from importlib import resources

import jsonschema

from ..core_model import Params
from ..errors import ConfigError

SCHEMA_VERSION = 1

COMMANDS = (
    "equilibria",
    "simulate-ode",
    "canard-scan",
    "hopf-curve",
    "fold-curve",
    "domain",
    "dispersion",
    "turing-curve",
    "simulate-pde",
    "transient-scan",
)

_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}
_bool = {"type": "boolean"}
_range = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_numlist = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_eps = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
_free = {"enum": ["chi", "delta"]}
_ic = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["LocalizedBump", "SmallRandom", "HomogeneousOffset"]},
        "magnitude": {"type": ["number", "null"]},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

# option name -> (schema, default); None defaults mean "derived at run time"
OPTIONS = {
    "equilibria": {},
    "simulate-ode": {
        "ic": ({"anyOf": [{"enum": ["near", "far"]},
                          {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2}]}, "near"),
        "t_end": (_pos, 200.0),
        "record_from": (_nonneg, 0.0),
        "n_out": ({"type": "integer", "minimum": 2}, 2001),
        "rtol": (_pos, 1e-9),
        "atol": (_pos, 1e-11),
        "scheme": ({"enum": ["auto", "explicit", "implicit"]}, "auto"),
        "cycle": (_bool, False),
        "vary": ({"type": ["object", "null"], "properties": {"name": _free, "values": _numlist},
                  "required": ["name", "values"], "additionalProperties": False}, None),
    },
    "canard-scan": {
        "free": (_free, "delta"),
        "range": (_range, [0.1443, 0.1445]),
        "n": ({"type": "integer", "minimum": 2}, 21),
        "horizon": ({"type": ["number", "null"], "exclusiveMinimum": 0}, None),
        "refine": (_bool, True),
        "tol": (_pos, 1e-9),
        "jump_ratio": (_pos, 5.0),
    },
    "hopf-curve": {
        "chi_range": (_range, [2.5, 13.0]),
        "n": ({"type": "integer", "minimum": 2}, 43),
        "eps_values": ({"type": ["array", "null"], "items": _eps, "minItems": 1}, None),
        "delta_bracket": (_range, [1e-4, 1.0]),
        "with_l1": (_bool, True),
        "include_fold": (_bool, False),
    },
    "fold-curve": {
        "chi_range": (_range, [2.5, 13.0]),
        "n": ({"type": "integer", "minimum": 2}, 43),
    },
    "domain": {
        "points": ({"type": ["array", "null"], "items": _pair, "minItems": 1}, None),
        "horizon": ({"type": ["number", "null"], "exclusiveMinimum": 0}, None),
    },
    "dispersion": {
        "d": (_pos, 25.0),
        "L": (_pos, 100.0),
        "k2_max": (_pos, 1.0),
        "n_k": ({"type": "integer", "minimum": 2}, 401),
    },
    "turing-curve": {
        "delta_range": (_range, [0.128, 0.14]),
        "n": ({"type": "integer", "minimum": 2}, 61),
        "modes": ({"type": "array", "items": _posint, "minItems": 2, "maxItems": 2}, [13, 20]),
        "L": (_pos, 100.0),
        "eps_values": ({"type": ["array", "null"], "items": _eps, "minItems": 1}, None),
        "d_max": ({"type": ["number", "null"], "exclusiveMinimum": 0}, None),
    },
    "simulate-pde": {
        "d": (_pos, 25.0),
        "L": (_pos, 100.0),
        "dx": (_pos, 0.25),
        "dt": ({"type": ["number", "null"], "exclusiveMinimum": 0}, None),
        "t_end": (_pos, 1000.0),
        "snapshot_every": (_pos, 100.0),
        "diag_every": (_pos, 1.0),
        "scheme": ({"enum": ["IMEX", "FullyExplicit"]}, "IMEX"),
        "ic": (_ic, {"kind": "SmallRandom", "magnitude": None}),
        "classify_window": ({"type": "integer", "minimum": 3}, 20),
        "classify_tol": (_pos, 1e-4),
    },
    "transient-scan": {
        "d_values": ({"type": ["array", "null"], "items": _pos, "minItems": 1}, None),
        "d_range": (_range, [6.7, 15.0]),
        "n": ({"type": "integer", "minimum": 1}, 12),
        "L": (_pos, 200.0),
        "dx": (_pos, 0.25),
        "dt": ({"type": ["number", "null"], "exclusiveMinimum": 0}, None),
        "t_end": (_pos, 5000.0),
        "diag_every": (_pos, 1.0),
        "tol": (_pos, 1e-2),
        "window": ({"type": ["number", "null"], "exclusiveMinimum": 0}, None),
        "fit": (_bool, True),
    },
}

PARAM_SCHEMA = {
    "type": "object",
    "properties": {
        **{k: _pos for k in ("nu", "chi", "alpha", "beta", "eta", "delta")},
        "eps": _eps,
    },
    "required": ["nu", "chi", "alpha", "beta", "eta", "delta", "eps"],
    "additionalProperties": False,
}


def scenario_schema(command: str) -> dict:
    opts = OPTIONS[command]
    return {
        "type": "object",
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "command": {"const": command},
            "params": PARAM_SCHEMA,
            "options": {
                "type": "object",
                "properties": {k: s for k, (s, _) in opts.items()},
                "additionalProperties": False,
            },
            "seed": {"type": ["integer", "null"], "minimum": 0, "maximum": 2**64 - 1},
            "description": {"type": "string"},
        },
        "required": ["schema_version", "command", "params"],
        "additionalProperties": False,
    }


def _field_path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        # the message names the missing key; the path stops at its parent
        missing = [k for k in err.validator_value if k not in err.instance]
        parts.append(missing[0])
    elif err.validator == "additionalProperties":
        allowed = err.schema.get("properties", {})
        extra = sorted(k for k in err.instance if k not in allowed)
        parts.append(extra[0])
    return ".".join(parts) or "<root>"


def validate(doc) -> dict:
    """Check a scenario document; raises ConfigError naming the field."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object", "<root>")
    cmd = doc.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}", "command")
    v = jsonschema.Draft202012Validator(scenario_schema(cmd))
    errors = sorted(v.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _field_path(e))
    for key in ("range", "chi_range", "delta_range", "d_range", "delta_bracket"):
        r = doc.get("options", {}).get(key)
        if r is not None and not r[0] < r[1]:
            raise ConfigError("range must be increasing and non-empty", f"options.{key}")
    o = doc.get("options", {})
    if cmd == "simulate-ode" and o.get("record_from", 0.0) >= o.get("t_end", OPTIONS[cmd]["t_end"][1]):
        raise ConfigError("must be below t_end", "options.record_from")
    m = o.get("modes")
    if m is not None and m[0] > m[1]:
        raise ConfigError("mode range must be increasing", "options.modes")
    return doc


def default_scenario(command: str) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "params": Params().as_dict(), "options": {}}


def resolve(doc: dict) -> dict:
    """Validated copy with every option filled in."""
    doc = copy.deepcopy(validate(doc))
    opts = {k: copy.deepcopy(d) for k, (_, d) in OPTIONS[doc["command"]].items()}
    opts.update(doc.get("options", {}))
    doc["options"] = opts
    if doc.get("seed") is None:
        doc["seed"] = 0
    doc["params"] = {k: float(x) for k, x in doc["params"].items()}
    return doc


def load(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "<file>") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}", "<file>") from exc


def preset_names() -> list:
    root = resources.files(__package__) / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    f = resources.files(__package__) / "presets" / f"{name}.json"
    if not f.is_file():
        raise ConfigError(f"no preset named {name!r} (have: {', '.join(preset_names())})", "--preset")
    return json.loads(f.read_text())
