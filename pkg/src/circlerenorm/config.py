"""Numerical defaults, overridable from a JSON file."""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

_ACTIVE: dict | None = None


def load_defaults() -> dict:
    text = resources.files(__package__).joinpath("defaults.json").read_text()
    return json.loads(text)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            if k not in out:
                raise KeyError(f"unknown configuration key {k!r}")
            out[k] = v
    return out


def get_config() -> dict:
    global _ACTIVE
    if _ACTIVE is None:
        _ACTIVE = load_defaults()
    return _ACTIVE


def set_config(overrides: dict | None = None, path: str | Path | None = None) -> dict:
    """Merge overrides (and/or a JSON file) on top of the packaged defaults."""
    global _ACTIVE
    cfg = load_defaults()
    if path is not None:
        cfg = _merge(cfg, json.loads(Path(path).read_text()))
    if overrides:
        cfg = _merge(cfg, overrides)
    _ACTIVE = cfg
    return cfg


def reset_config() -> None:
    global _ACTIVE
    _ACTIVE = None
