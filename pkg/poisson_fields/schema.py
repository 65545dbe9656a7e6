# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

SCHEMA_VERSION = 1

process_type = {
    "type": "string",
    "enum": ["gprf", "fgprf", "skellam", "fgspp", "gspp", "integral", "inverse-stable"],
    "description": "Process family",
}

probability = {"type": "number", "minimum": 0, "maximum": 1}

pmf_row = {
    "type": "object",
    "properties": {
        "n": {"type": "integer"},
        "probability": probability,
        "tail_bound": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
    "required": ["n", "probability", "tail_bound"],
}

pmf_document = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "process": process_type,
        "rows": {"type": "array", "items": pmf_row},
    },
    "additionalProperties": False,
    "required": ["schema_version", "process", "rows"],
}

check = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "passed": {"type": "boolean"},
        "statistic": {"type": "number"},
        "tolerance": {"type": "number"},
    },
    "additionalProperties": False,
    "required": ["name", "passed", "statistic", "tolerance"],
}

verify_report = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "suite": {"type": "string"},
        "seed": {"type": "integer"},
        "passed": {"type": "boolean"},
        "checks": {"type": "array", "items": check},
    },
    "additionalProperties": False,
    "required": ["schema_version", "suite", "seed", "passed", "checks"],
}

gof_report = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "process": process_type,
        "statistic": {"type": "number", "minimum": 0},
        "dof": {"type": "integer", "minimum": 1},
        "p_value": probability,
        "samples": {"type": "integer", "minimum": 1},
        "bins": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
    "required": ["schema_version", "process", "statistic", "dof", "p_value", "samples"],
}

moments_report = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "process": process_type,
        "mean": {"type": "number"},
        "variance": {"type": "number", "minimum": 0},
        "covariance": {"type": ["number", "null"]},
    },
    "additionalProperties": False,
    "required": ["schema_version", "process", "mean", "variance"],
}

# re-running the command with `parameters` and `seed` reproduces `digest`
manifest = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"type": "string"},
        "process": process_type,
        "parameters": {"type": "object"},
        "seed": {"type": "integer"},
        "samples": {"type": "integer", "minimum": 1},
        "version": {"type": "string"},
        "started_at": {"type": "string", "description": "UTC timestamp, ISO 8601"},
        "elapsed_seconds": {"type": "number", "minimum": 0},
        "output": {"type": ["string", "null"]},
        "digest": {"type": "string", "pattern": "^sha256:[0-9a-f]{64}$"},
    },
    "additionalProperties": False,
    "required": ["schema_version", "command", "process", "parameters", "seed", "version", "digest"],
}
