"""JSON helpers: conversion of results, deterministic dumps, function loading."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .domain import TabFunc
from .exceptions import PreconditionError


def jsonable(obj):
    """Recursively convert numpy scalars and arrays, tuples, and non-finite floats."""
    if hasattr(obj, "to_json") and not isinstance(obj, type):
        return jsonable(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


def write_json(path, obj) -> str:
    text = dumps(obj)
    Path(path).write_text(text)
    return text


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def load_function(path_or_spec) -> TabFunc:
    """Load a tabulated function from a path or a parsed spec.

    Accepted forms: a full ``{"domain", "values"}`` document, or
    ``{"fixture": name, "params": {...}}`` naming a catalogue builder.
    """
    from .fixtures import build

    spec = path_or_spec
    if isinstance(spec, (str, Path)):
        try:
            spec = json.loads(Path(spec).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"cannot parse {path_or_spec}: {exc}") from None
    if not isinstance(spec, dict):
        raise ValueError("function spec must be a JSON object")
    if "fixture" in spec:
        return build(spec["fixture"], **spec.get("params", {}))
    if "domain" in spec and "values" in spec:
        return TabFunc.from_json(spec)
    raise PreconditionError("function spec needs 'domain' and 'values', or 'fixture'")


def write_manifest(directory, files, meta: dict, name: str = "manifest.json") -> str:
    """Manifest with the SHA-256 of every written file and run metadata.

    Relative file names are taken inside ``directory``.
    """
    entries = {f: hashlib.sha256(Path(directory, f).read_bytes()).hexdigest() for f in sorted(files)}
    return write_json(Path(directory, name), {"files": entries, **meta})
