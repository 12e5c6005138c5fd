from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

OperatorName = Literal["V", "W", "KadjHalf", "KHalf", "coupled"]
SideTag = Literal["interior", "exterior"]

SWEEP_CSV_FIELDS = (
    "kappa",
    "sigma_min_v",
    "sigma_min_w",
    "sigma_min_coupled",
    "angle_v",
    "angle_coupled",
    "cond_v",
    "cond_w",
    "cond_coupled",
)


@dataclass(frozen=True, eq=False)
class TracePair:
    """Dirichlet coefficients on nodal hats and Neumann coefficients on segments."""

    dirichlet: np.ndarray
    neumann: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.dirichlet, dtype=complex)
        eta = np.asarray(self.neumann, dtype=complex)
        if g.ndim != 1 or eta.shape != g.shape:
            raise ValueError(f"trace parts must be vectors of equal length, got {g.shape} and {eta.shape}")
        if not (np.isfinite(g).all() and np.isfinite(eta).all()):
            raise ValueError("trace pair has non-finite entries")
        object.__setattr__(self, "dirichlet", g)
        object.__setattr__(self, "neumann", eta)

    @property
    def n(self) -> int:
        return int(self.dirichlet.size)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.dirichlet, self.neumann])


@dataclass
class SweepRecord:
    """Diagnostics at one wavenumber; NaN marks operators not requested."""

    kappa: float
    sigma_min_v: float = math.nan
    sigma_min_w: float = math.nan
    sigma_min_coupled: float = math.nan
    angle_v: float = math.nan
    angle_coupled: float = math.nan
    cond_v: float = math.nan
    cond_w: float = math.nan
    cond_coupled: float = math.nan

    def to_row(self) -> list[str]:
        return [repr(float(getattr(self, name))) for name in SWEEP_CSV_FIELDS]

@dataclass
class KernelReport:
    """Near-null space of one operator at kappa_star compared with FEM eigentraces.

    null_vectors holds one column per near-null vector (unit norm in the
    trace L2 norm); for the coupled operator the columns are the xi-parts.
    """

    kappa_star: float
    operator: OperatorName
    resonant: bool
    null_vectors: np.ndarray
    reference_space: np.ndarray
    principal_angles: list[float] = field(default_factory=list)
    singular_values: list[float] = field(default_factory=list)
    floor: float = math.nan
    threshold: float = math.nan
    reference_eigenvalues: list[float] = field(default_factory=list)
    target_eigenvalue: float = math.nan
    interior_ratio: list[float] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return int(self.null_vectors.shape[1]) if self.null_vectors.ndim == 2 else 0

    @property
    def reference_dimension(self) -> int:
        return int(self.reference_space.shape[1]) if self.reference_space.ndim == 2 else 0

    @property
    def dimension_match(self) -> bool:
        return self.dimension == self.reference_dimension

    @property
    def max_angle(self) -> float:
        return max(self.principal_angles) if self.principal_angles else math.nan

    def to_dict(self) -> dict:
        return {
            "kappa_star": self.kappa_star,
            "operator": self.operator,
            "resonant": self.resonant,
            "dimension": self.dimension,
            "reference_dimension": self.reference_dimension,
            "dimension_match": self.dimension_match,
            "principal_angles": list(self.principal_angles),
            "singular_values": list(self.singular_values),
            "floor": self.floor,
            "threshold": self.threshold,
            "reference_eigenvalues": list(self.reference_eigenvalues),
            "target_eigenvalue": self.target_eigenvalue,
            "interior_ratio": list(self.interior_ratio),
        }

@dataclass(frozen=True, eq=False)
class FieldSample:
    points: np.ndarray
    sides: tuple[SideTag, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        values = np.asarray(self.values, dtype=complex).reshape(-1)
        if points.shape[0] != values.size or len(self.sides) != values.size:
            raise ValueError("points, sides and values must have the same length")
        if not np.isfinite(values).all():
            raise ValueError("field sample has non-finite values")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sides", tuple(self.sides))

    def __add__(self, other: "FieldSample") -> "FieldSample":
        if not np.array_equal(self.points, other.points):
            raise ValueError("field samples live on different points")
        return FieldSample(self.points, self.sides, self.values + other.values)

    def scaled(self, factor: complex) -> "FieldSample":
        return FieldSample(self.points, self.sides, factor * self.values)

    def to_rows(self) -> list[list[str]]:
        return [
            [repr(float(x)), repr(float(y)), repr(float(v.real)), repr(float(v.imag)), side]
            for (x, y), v, side in zip(self.points.tolist(), self.values, self.sides)
        ]
