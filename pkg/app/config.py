from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Mapping

from .errors import ConfigError
from .quadrature import QuadratureError, QuadratureSpec
from .settings import (
    DEFAULT_SETTINGS,
    _deep_merge,
    get_float_list_setting,
    get_float_setting,
    get_int_setting,
    get_setting,
    get_str_setting,
    resolve_path_setting,
)

ShapeKind = Literal["circle", "kite"]
OperatorKind = Literal["V", "W", "coupled"]

SHAPES: tuple[str, ...] = ("circle", "kite")
SWEEP_OPERATORS: tuple[str, ...] = ("V", "W", "coupled")
MATERIAL_KINDS: tuple[str, ...] = ("constant", "layered")
MATRIX_FORMATS: tuple[str, ...] = ("bin", "csv")
# Bessel 評価の保証範囲 (kappa * sqrt(r0) * diam)
MAX_BESSEL_ARGUMENT = 50.0
KITE_DIAMETER = 3.0


@dataclass(frozen=True)
class AppPaths:
    """Centralized paths used across the toolkit."""

    root: Path = field(default_factory=lambda: Path(__file__).resolve().parent.parent)

    def output_dir(self, configured: Path | None = None) -> Path:
        env_override = os.getenv("CALDERON_OUTPUT_DIR")
        if env_override:
            path = Path(env_override).expanduser().resolve()
        elif configured is not None:
            path = configured
        else:
            path = (self.root / "output").resolve()
        # 出力先は存在しなければ作る
        path.mkdir(parents=True, exist_ok=True)
        return path


@dataclass(frozen=True)
class RunConfig:
    """Immutable, validated run parameters parsed from one JSON document."""

    settings: Mapping[str, Any] = field(default_factory=dict, repr=False)
    paths: AppPaths = field(default_factory=AppPaths, repr=False)

    shape: str = "circle"
    radius: float = 1.0
    n_boundary: int = 128
    target_h: float = 0.05
    kappa: float = 1.0
    r0: float = 1.0
    kappa_grid: tuple[float, ...] = field(init=False)
    material_kind: str = "constant"
    material_value: float = 1.0
    core_value: float = 1.0
    core_radius: float = 0.0
    incident_direction: tuple[float, float] = (1.0, 0.0)
    incident_amplitude: float = 1.0
    point_source: tuple[float, float] = (0.2, 0.1)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    which: tuple[str, ...] = SWEEP_OPERATORS
    null_ratio: float = 0.1
    floor_offsets: tuple[float, ...] = (-0.3, -0.15, 0.15, 0.3)
    eigen_count: int = 12
    trace_modes: int = 2
    rcond: float = 1e-10
    resonance_tol: float = 5e-3
    probe_radius: float = 3.0
    probe_count: int = 8
    output_dir: Path = field(init=False)
    matrix_format: str | None = None
    threads: int | None = None
    checks: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        settings = _deep_merge(DEFAULT_SETTINGS, self.settings)
        object.__setattr__(self, "settings", settings)

        object.__setattr__(self, "shape", get_str_setting(settings, "geometry.shape", self.shape))
        object.__setattr__(self, "radius", get_float_setting(settings, "geometry.radius", self.radius))
        object.__setattr__(
            self, "n_boundary", get_int_setting(settings, "geometry.n_boundary", self.n_boundary)
        )
        object.__setattr__(self, "target_h", get_float_setting(settings, "geometry.target_h", self.target_h))
        object.__setattr__(self, "kappa", get_float_setting(settings, "physics.kappa", self.kappa))
        object.__setattr__(self, "r0", get_float_setting(settings, "physics.r0", self.r0))
        object.__setattr__(self, "kappa_grid", self._build_kappa_grid(settings))

        object.__setattr__(
            self, "material_kind", get_str_setting(settings, "physics.material.kind", self.material_kind)
        )
        object.__setattr__(
            self, "material_value", get_float_setting(settings, "physics.material.value", self.material_value)
        )
        object.__setattr__(
            self, "core_value", get_float_setting(settings, "physics.material.core_value", self.core_value)
        )
        object.__setattr__(
            self, "core_radius", get_float_setting(settings, "physics.material.core_radius", self.core_radius)
        )
        object.__setattr__(
            self,
            "incident_direction",
            self._point(settings, "physics.incident.direction", self.incident_direction),
        )
        object.__setattr__(
            self,
            "incident_amplitude",
            get_float_setting(settings, "physics.incident.amplitude", self.incident_amplitude),
        )
        object.__setattr__(
            self, "point_source", self._point(settings, "physics.point_source", self.point_source)
        )
        try:
            quadrature = QuadratureSpec(
                gauss_points=get_int_setting(settings, "quadrature.gauss_points", 8) or 8,
                log_points=get_int_setting(settings, "quadrature.log_points", 8) or 8,
                duffy_points=get_int_setting(settings, "quadrature.duffy_points", 8) or 8,
            )
        except QuadratureError as exc:
            raise ConfigError(f"quadrature: {exc}") from exc
        object.__setattr__(self, "quadrature", quadrature)
        which = get_setting(settings, "spectral.which", list(self.which))
        if isinstance(which, str):
            which = [which]
        if not isinstance(which, (list, tuple)):
            raise ConfigError(f"spectral.which must be a list, got {which!r}")
        object.__setattr__(self, "which", tuple(str(item) for item in which))
        object.__setattr__(self, "null_ratio", get_float_setting(settings, "spectral.null_ratio", self.null_ratio))
        object.__setattr__(
            self,
            "floor_offsets",
            tuple(get_float_list_setting(settings, "spectral.floor_offsets", list(self.floor_offsets))),
        )
        object.__setattr__(
            self, "eigen_count", get_int_setting(settings, "spectral.eigen_count", self.eigen_count)
        )
        object.__setattr__(
            self, "trace_modes", get_int_setting(settings, "spectral.trace_modes", self.trace_modes)
        )
        object.__setattr__(self, "rcond", get_float_setting(settings, "solver.rcond", self.rcond))
        object.__setattr__(
            self, "resonance_tol", get_float_setting(settings, "solver.resonance_tol", self.resonance_tol)
        )
        object.__setattr__(self, "probe_radius", get_float_setting(settings, "probes.radius", self.probe_radius))
        object.__setattr__(self, "probe_count", get_int_setting(settings, "probes.count", self.probe_count))

        env_threads = os.getenv("CALDERON_THREADS")
        threads = get_int_setting(settings, "parallel.threads", self.threads)
        if env_threads:
            try:
                threads = int(env_threads)
            except ValueError as exc:
                raise ConfigError(f"CALDERON_THREADS must be an integer, got {env_threads!r}") from exc
        object.__setattr__(self, "threads", threads)
        checks = get_setting(settings, "verify.checks")
        if isinstance(checks, str):
            checks = [checks]
        if checks is not None and not isinstance(checks, (list, tuple)):
            raise ConfigError(f"verify.checks must be a list of check names or null, got {checks!r}")
        object.__setattr__(self, "checks", None if checks is None else tuple(str(item) for item in checks))

        configured = resolve_path_setting(settings, "output.directory", self.paths.root)
        object.__setattr__(self, "output_dir", configured or (self.paths.root / "output").resolve())
        object.__setattr__(
            self, "matrix_format", get_str_setting(settings, "output.matrix_format", self.matrix_format)
        )
        self._validate()

    # Derived values -----------------------------------------------------
    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.settings, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius if self.shape == "circle" else KITE_DIAMETER

    def ensure_output_dir(self) -> Path:
        return self.paths.output_dir(self.output_dir)

    # Internal helpers ---------------------------------------------------
    @staticmethod
    def _point(settings: Mapping[str, Any], key: str, default: tuple[float, float]) -> tuple[float, float]:
        values = get_float_list_setting(settings, key, list(default))
        if len(values) != 2:
            raise ConfigError(f"{key} must hold exactly two numbers, got {values!r}")
        return (values[0], values[1])

    @staticmethod
    def _build_kappa_grid(settings: Mapping[str, Any]) -> tuple[float, ...]:
        explicit = get_setting(settings, "physics.kappa_grid.values")
        if explicit is not None:
            grid = tuple(get_float_list_setting(settings, "physics.kappa_grid.values", []))
        else:
            start = get_float_setting(settings, "physics.kappa_grid.start", 2.0)
            stop = get_float_setting(settings, "physics.kappa_grid.stop", 2.8)
            step = get_float_setting(settings, "physics.kappa_grid.step", 0.01)
            if not step > 0.0:
                raise ConfigError(f"physics.kappa_grid.step must be positive, got {step}")
            if stop < start:
                return ()
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            grid = tuple(round(start + i * step, 12) for i in range(count))
        return grid

    def _validate(self) -> None:
        if self.shape not in SHAPES:
            raise ConfigError(f"geometry.shape must be one of {SHAPES}, got {self.shape!r}")
        _require_positive("geometry.radius", self.radius)
        _require_positive("geometry.target_h", self.target_h)
        minimum = 3 if self.shape == "circle" else 8
        if self.n_boundary is None or self.n_boundary < minimum:
            raise ConfigError(f"geometry.n_boundary must be >= {minimum} for {self.shape}")
        _require_positive("physics.kappa", self.kappa)
        _require_positive("physics.r0", self.r0)
        if not self.kappa_grid:
            raise ConfigError("physics.kappa_grid is empty")
        if any(not math.isfinite(value) or value <= 0.0 for value in self.kappa_grid):
            raise ConfigError("physics.kappa_grid must contain positive finite values")
        if any(b <= a for a, b in zip(self.kappa_grid, self.kappa_grid[1:])):
            raise ConfigError("physics.kappa_grid must be strictly ascending")
        reach = max(max(self.kappa_grid), self.kappa) * math.sqrt(self.r0) * self.diameter
        if reach > MAX_BESSEL_ARGUMENT:
            raise ConfigError(
                f"kappa * sqrt(r0) * diameter = {reach:.3f} exceeds the supported range {MAX_BESSEL_ARGUMENT}"
            )
        if self.material_kind not in MATERIAL_KINDS:
            raise ConfigError(f"physics.material.kind must be one of {MATERIAL_KINDS}")
        _require_positive("physics.material.value", self.material_value)
        _require_positive("physics.material.core_value", self.core_value)
        if not (math.isfinite(self.core_radius) and self.core_radius >= 0.0):
            raise ConfigError("physics.material.core_radius must be >= 0")
        dx, dy = self.incident_direction
        if abs(math.hypot(dx, dy) - 1.0) > 1e-9:
            raise ConfigError("physics.incident.direction must be a unit vector")
        if not math.isfinite(self.incident_amplitude):
            raise ConfigError("physics.incident.amplitude must be finite")
        unknown = [name for name in self.which if name not in SWEEP_OPERATORS]
        if unknown or not self.which:
            raise ConfigError(f"spectral.which must be a non-empty subset of {SWEEP_OPERATORS}")
        if not 0.0 < self.null_ratio < 1.0:
            raise ConfigError("spectral.null_ratio must lie in (0, 1)")
        if not self.floor_offsets or any(offset == 0.0 for offset in self.floor_offsets):
            raise ConfigError("spectral.floor_offsets must be non-empty and non-zero")
        if self.eigen_count is None or not 1 <= self.eigen_count <= 20:
            raise ConfigError("spectral.eigen_count must lie in [1, 20]")
        if self.trace_modes is None or self.trace_modes < 0:
            raise ConfigError("spectral.trace_modes must be >= 0")
        _require_positive("solver.rcond", self.rcond)
        _require_positive("solver.resonance_tol", self.resonance_tol)
        _require_positive("probes.radius", self.probe_radius)
        if self.probe_count is None or self.probe_count < 1:
            raise ConfigError("probes.count must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("parallel.threads must be >= 1")
        if self.matrix_format is not None and self.matrix_format not in MATRIX_FORMATS:
            raise ConfigError(f"output.matrix_format must be one of {MATRIX_FORMATS} or null")


def _require_positive(key: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0.0):
        raise ConfigError(f"{key} must be a positive finite number, got {value!r}")
