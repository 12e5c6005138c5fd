"""Geometry, material and wavenumber of one run, built from a RunConfig."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

from .config import RunConfig
from .fem import MaterialField
from .mesh import BoundaryMesh, InteriorMesh, circle_boundary, disk_triangulation, kite_boundary
from .quadrature import QuadratureSpec
from .specialfn import Wavenumber

logger = logging.getLogger(__name__)


def build_boundary(config: RunConfig) -> BoundaryMesh:
    if config.shape == "circle":
        return circle_boundary(config.radius, config.n_boundary)
    return kite_boundary(config.n_boundary)


def build_material(config: RunConfig, interior: InteriorMesh) -> MaterialField:
    if config.material_kind == "layered":
        return MaterialField.layered(
            interior, config.material_value, config.core_value, config.core_radius, config.r0
        )
    return MaterialField.constant(interior, config.material_value, config.r0)


@dataclass(eq=False)
class Problem:
    """Lazily built meshes and material shared by the commands of one run."""

    config: RunConfig

    @cached_property
    def boundary(self) -> BoundaryMesh:
        boundary = build_boundary(self.config)
        logger.info("boundary: %s with %d segments (h=%.4g)", self.config.shape, boundary.n_segments, boundary.h)
        return boundary

    @cached_property
    def interior(self) -> InteriorMesh:
        return disk_triangulation(self.boundary, self.config.target_h)

    @cached_property
    def material(self) -> MaterialField:
        return build_material(self.config, self.interior)

    @property
    def quad(self) -> QuadratureSpec:
        return self.config.quadrature

    @property
    def threads(self) -> int | None:
        return self.config.threads

    def wavenumber(self, kappa: float | None = None) -> Wavenumber:
        return Wavenumber(self.config.kappa if kappa is None else kappa, self.config.r0)
