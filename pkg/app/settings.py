from __future__ import annotations

import json
import os
from copy import deepcopy
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

SETTINGS_FILENAME = "calderon_settings.json"
SETTINGS_ENV = "CALDERON_SETTINGS_PATH"

DEFAULT_SETTINGS: dict[str, Any] = {
    "geometry": {
        "shape": "circle",
        "radius": 1.0,
        "n_boundary": 128,
        "target_h": 0.05,
    },
    "physics": {
        "kappa": 1.0,
        "r0": 1.0,
        "kappa_grid": {
            "start": 2.0,
            "stop": 2.8,
            "step": 0.01,
        },
        "material": {
            "kind": "constant",
            "value": 1.0,
            "core_value": 1.0,
            "core_radius": 0.0,
        },
        "incident": {
            "direction": [1.0, 0.0],
            "amplitude": 1.0,
        },
        "point_source": [0.2, 0.1],
    },
    "quadrature": {
        "gauss_points": 8,
        "log_points": 8,
        "duffy_points": 8,
    },
    "spectral": {
        "which": ["V", "W", "coupled"],
        "null_ratio": 0.1,
        "floor_offsets": [-0.3, -0.15, 0.15, 0.3],
        "eigen_count": 12,
        "trace_modes": 2,
    },
    "solver": {
        "rcond": 1e-10,
        "resonance_tol": 5e-3,
    },
    "probes": {
        "radius": 3.0,
        "count": 8,
    },
    "output": {
        "directory": "output",
        "matrix_format": None,
    },
    "parallel": {
        "threads": None,
    },
    "verify": {
        "checks": None,
    },
}


def settings_path(root: Path) -> Path:
    override = os.getenv(SETTINGS_ENV)
    if override:
        return Path(override).expanduser().resolve()
    return root / SETTINGS_FILENAME


def load_settings(root: Path) -> dict[str, Any]:
    """Repository-level defaults; a missing or broken file falls back to DEFAULT_SETTINGS."""
    path = settings_path(root)
    if not path.exists():
        return deepcopy(DEFAULT_SETTINGS)

    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return deepcopy(DEFAULT_SETTINGS)

    if not isinstance(payload, Mapping):
        return deepcopy(DEFAULT_SETTINGS)
    return _deep_merge(DEFAULT_SETTINGS, payload)


def load_run_document(path: Path, base: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """Strict loader for a run document given on the command line."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(payload, Mapping):
        raise ConfigError(f"config {path} must hold a JSON object")
    return _deep_merge(base if base is not None else DEFAULT_SETTINGS, payload)


def get_setting(settings: Mapping[str, Any], dotted_key: str, default: Any = None) -> Any:
    current: Any = settings
    for part in dotted_key.split("."):
        if not isinstance(current, Mapping) or part not in current:
            return default
        current = current[part]
    return current


def get_int_setting(settings: Mapping[str, Any], dotted_key: str, default: int | None) -> int | None:
    value = get_setting(settings, dotted_key, default)
    if value is None:
        return default
    if isinstance(value, bool):
        raise ConfigError(f"{dotted_key} must be an integer, got {value!r}")
    if isinstance(value, float) and not value.is_integer():
        raise ConfigError(f"{dotted_key} must be an integer, got {value!r}")
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{dotted_key} must be an integer, got {value!r}") from exc


def get_float_setting(settings: Mapping[str, Any], dotted_key: str, default: float) -> float:
    value = get_setting(settings, dotted_key, default)
    if isinstance(value, bool):
        raise ConfigError(f"{dotted_key} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{dotted_key} must be a number, got {value!r}") from exc


def get_str_setting(settings: Mapping[str, Any], dotted_key: str, default: str) -> str:
    value = get_setting(settings, dotted_key, default)
    if not isinstance(value, str) or not value.strip():
        return default
    return value


def get_float_list_setting(
    settings: Mapping[str, Any], dotted_key: str, default: list[float]
) -> list[float]:
    value = get_setting(settings, dotted_key, default)
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{dotted_key} must be a list of numbers, got {value!r}")
    try:
        return [float(item) for item in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{dotted_key} must be a list of numbers, got {value!r}") from exc


def resolve_path_setting(settings: Mapping[str, Any], dotted_key: str, root: Path) -> Path | None:
    value = get_setting(settings, dotted_key)
    if not isinstance(value, str) or not value.strip():
        return None
    path = Path(value).expanduser()
    if not path.is_absolute():
        path = (root / path).resolve()
    else:
        path = path.resolve()
    return path


def _deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    merged: dict[str, Any] = deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = deepcopy(value)
    return merged
