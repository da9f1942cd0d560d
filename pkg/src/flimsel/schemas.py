"""Shipped JSON schemas for machine-readable outputs."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

SCHEMA_NAMES = ("fit_result", "selection_outcome", "calibration_report",
                "limits_report", "manifest")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(f"unknown schema '{name}'")
    ref = resources.files("flimsel") / "schemas" / f"{name}.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_payload(payload: dict, name: str) -> None:
    """Raise jsonschema.ValidationError if the payload does not conform."""
    jsonschema.validate(payload, load_schema(name))
