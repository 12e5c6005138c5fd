"""Layer potentials off the boundary and the exterior post-processing operator.

    SL(xi)(x) = -int G(x, y) xi(y) ds_y        DL(g)(x) = -int dG/dn_y(x, y) g(y) ds_y

With these signs the interior jumps [.] = (interior limit) - (exterior limit) are
[T_D]SL = 0, [T_N]SL = xi, [T_D]DL = g, [T_N]DL = 0 and DL(1) = 1 inside.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .bem import DoubleLayerKernel, SingleLayerKernel
from .errors import ConfigError, NumericalError
from .fem import InteriorField, dirichlet_trace
from .mesh import BoundaryMesh
from .models import FieldSample
from .quadrature import PairKernel, QuadratureSpec, integrate_point_segments, segment_distances
from .specialfn import Wavenumber, greens_radial

logger = logging.getLogger(__name__)

NearField = Literal["reject", "subdivide"]


class NearFieldError(NumericalError):
    """Raised for evaluation points closer than h to the boundary."""

    def __init__(self, point, distance: float, h: float) -> None:
        x, y = (float(v) for v in point)
        super().__init__(f"point ({x:.6g}, {y:.6g}) is {distance:.3e} from the boundary (h = {h:.3e})")
        self.point = (x, y)
        self.distance = distance


@dataclass(frozen=True)
class _SingleLayerGradient:
    """d/dx_axis G(|x - y|)."""

    k: float
    axis: int
    log_singular: bool = False

    def evaluate(self, x, y, nx, ny) -> np.ndarray:
        diff = x - y
        r = np.linalg.norm(diff, axis=-1)
        _, dg, _ = greens_radial(self.k, r)
        return dg * diff[..., self.axis] / r

    def split(self, r):
        raise NotImplementedError


@dataclass(frozen=True)
class _DoubleLayerGradient:
    """d/dx_axis of dG/dn_y(x, y)."""

    k: float
    axis: int
    log_singular: bool = False

    def evaluate(self, x, y, nx, ny) -> np.ndarray:
        diff = x - y
        r = np.linalg.norm(diff, axis=-1)
        _, dg, d2g = greens_radial(self.k, r)
        dn = np.sum(diff * ny, axis=-1)
        # dG/dn_y = -G'(r) (x - y) . n_y / r
        return -((d2g - dg / r) * dn * diff[..., self.axis] / r**2 + dg * ny[..., self.axis] / r)

    def split(self, r):
        raise NotImplementedError


def _prepare(mesh: BoundaryMesh, points, near_field: NearField) -> tuple[np.ndarray, float]:
    if near_field not in ("reject", "subdivide"):
        raise ConfigError(f"near_field must be 'reject' or 'subdivide', got {near_field!r}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2 or not np.isfinite(pts).all():
        raise ConfigError("evaluation points must be a finite (P, 2) array")
    h = mesh.h
    if near_field == "reject" and pts.shape[0]:
        distance = segment_distances(pts, mesh).min(axis=1)
        close = np.flatnonzero(distance < h)
        if close.size:
            p = int(close[0])
            raise NearFieldError(pts[p], float(distance[p]), h)
        return pts, 0.0
    return pts, h


def _sides(mesh: BoundaryMesh, points: np.ndarray) -> tuple[str, ...]:
    inside = mesh.contains(points)
    return tuple("interior" if flag else "exterior" for flag in inside)


def _single_layer(mesh, kernel: PairKernel, xi, points, spec, near_radius) -> np.ndarray:
    table = integrate_point_segments(points, mesh, kernel, spec, near_radius)
    return -(table.sum(axis=2) @ xi)


def _double_layer(mesh, kernel: PairKernel, g, points, spec, near_radius) -> np.ndarray:
    table = integrate_point_segments(points, mesh, kernel, spec, near_radius)
    return -(table[:, :, 0] @ g[mesh.segments[:, 0]] + table[:, :, 1] @ g[mesh.segments[:, 1]])


def _density(values, n: int, label: str) -> np.ndarray:
    density = np.asarray(values, dtype=complex)
    if density.shape != (n,):
        raise ConfigError(f"{label} density must have length {n}, got shape {density.shape}")
    if not np.isfinite(density).all():
        raise ConfigError(f"{label} density has non-finite entries")
    return density


def eval_sl(
    mesh: BoundaryMesh,
    k: Wavenumber,
    density,
    points,
    near_field: NearField = "reject",
    spec: QuadratureSpec | None = None,
) -> FieldSample:
    """Single-layer potential of a segment-wise constant density."""
    xi = _density(density, mesh.n_segments, "single-layer")
    pts, radius = _prepare(mesh, points, near_field)
    values = _single_layer(mesh, SingleLayerKernel(k.k), xi, pts, spec, radius)
    return FieldSample(pts, _sides(mesh, pts), values)


def eval_dl(
    mesh: BoundaryMesh,
    k: Wavenumber,
    density,
    points,
    near_field: NearField = "reject",
    spec: QuadratureSpec | None = None,
) -> FieldSample:
    """Double-layer potential of a nodal piecewise-linear density."""
    g = _density(density, mesh.n_nodes, "double-layer")
    pts, radius = _prepare(mesh, points, near_field)
    values = _double_layer(mesh, DoubleLayerKernel(k.k), g, pts, spec, radius)
    return FieldSample(pts, _sides(mesh, pts), values)


def eval_sl_gradient(
    mesh: BoundaryMesh,
    k: Wavenumber,
    density,
    points,
    near_field: NearField = "reject",
    spec: QuadratureSpec | None = None,
) -> np.ndarray:
    """(P, 2) complex gradient of the single-layer potential."""
    xi = _density(density, mesh.n_segments, "single-layer")
    pts, radius = _prepare(mesh, points, near_field)
    return np.stack(
        [_single_layer(mesh, _SingleLayerGradient(k.k, axis), xi, pts, spec, radius) for axis in (0, 1)], axis=1
    )


def eval_dl_gradient(
    mesh: BoundaryMesh,
    k: Wavenumber,
    density,
    points,
    near_field: NearField = "reject",
    spec: QuadratureSpec | None = None,
) -> np.ndarray:
    g = _density(density, mesh.n_nodes, "double-layer")
    pts, radius = _prepare(mesh, points, near_field)
    return np.stack(
        [_double_layer(mesh, _DoubleLayerGradient(k.k, axis), g, pts, spec, radius) for axis in (0, 1)], axis=1
    )


def postprocess_exterior(
    mesh: BoundaryMesh,
    k: Wavenumber,
    g,
    field: InteriorField,
    xi,
    points,
    spec: QuadratureSpec | None = None,
) -> FieldSample:
    """Scattered field U_ext = -SL(xi) - DL(T_D U - g) at exterior points."""
    if not field.mesh.boundary.same_as(mesh):
        raise ConfigError("interior field does not belong to this boundary mesh")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(mesh.contains(pts)):
        raise ConfigError("postprocess_exterior only evaluates points outside the boundary")
    jump = dirichlet_trace(field) - _density(g, mesh.n_nodes, "dirichlet jump")
    single = eval_sl(mesh, k, xi, pts, spec=spec)
    double = eval_dl(mesh, k, jump, pts, spec=spec)
    return (single + double).scaled(-1.0)


def incident_plane_wave(points, k: Wavenumber, direction, amplitude: complex = 1.0) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    if d.shape != (2,) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ConfigError("plane-wave direction must be a unit 2-vector")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return amplitude * np.exp(1j * k.k * (pts @ d))


def probe_circle(radius: float, count: int) -> np.ndarray:
    if not radius > 0.0 or count < 1:
        raise ConfigError("probe circle needs a positive radius and at least one point")
    theta = 2.0 * math.pi * np.arange(count) / count
    return radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)


def jump_defects(
    mesh: BoundaryMesh,
    k: Wavenumber,
    dirichlet_density,
    neumann_density,
    eps: float,
    spec: QuadratureSpec | None = None,
) -> dict[str, float]:
    """Deviation of the four interior-minus-exterior jumps at segment midpoints.

    Each value is max |jump - expected| relative to the max density magnitude;
    the potentials are sampled at midpoint -/+ eps n with sub-panelled quadrature.
    """
    if not 0.0 < eps < mesh.h:
        raise ConfigError(f"eps must lie in (0, h = {mesh.h:.3e}), got {eps}")
    g = _density(dirichlet_density, mesh.n_nodes, "double-layer")
    xi = _density(neumann_density, mesh.n_segments, "single-layer")
    inner = mesh.midpoints - eps * mesh.normals
    outer = mesh.midpoints + eps * mesh.normals
    normals = mesh.normals

    def sl(points):
        return eval_sl(mesh, k, xi, points, "subdivide", spec).values

    def dl(points):
        return eval_dl(mesh, k, g, points, "subdivide", spec).values

    def neumann(gradient):
        return -np.sum(normals * gradient, axis=1)

    g_mid = 0.5 * (g[mesh.segments[:, 0]] + g[mesh.segments[:, 1]])
    sl_n_jump = neumann(eval_sl_gradient(mesh, k, xi, inner, "subdivide", spec)) - neumann(
        eval_sl_gradient(mesh, k, xi, outer, "subdivide", spec)
    )
    dl_n_jump = neumann(eval_dl_gradient(mesh, k, g, inner, "subdivide", spec)) - neumann(
        eval_dl_gradient(mesh, k, g, outer, "subdivide", spec)
    )
    xi_scale = max(float(np.abs(xi).max()), 1e-300)
    g_scale = max(float(np.abs(g).max()), 1e-300)
    defects = {
        "sl_dirichlet": float(np.abs(sl(inner) - sl(outer)).max() / xi_scale),
        "sl_neumann": float(np.abs(sl_n_jump - xi).max() / xi_scale),
        "dl_dirichlet": float(np.abs(dl(inner) - dl(outer) - g_mid).max() / g_scale),
        "dl_neumann": float(np.abs(dl_n_jump).max() / g_scale),
    }
    logger.debug("jump defects at eps=%.2e: %s", eps, defects)
    return defects
