"""P1 finite elements on InteriorMesh: the interior form Phi, eigenproblems and variational traces."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NumericalError
from .linalg import sym_generalized_eig
from .mesh import MIN_TRIANGLE_AREA, BoundaryMesh, InteriorMesh
from .specialfn import Wavenumber

logger = logging.getLogger(__name__)

BoundaryCondition = Literal["dirichlet", "neumann"]
MAX_EIGEN_COUNT = 20
_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


class FemError(NumericalError):
    """Raised for invalid finite element inputs or failed eigen solves."""


@dataclass(frozen=True, eq=False)
class MaterialField:
    """Refractive index r(x) per triangle and the exterior value r0."""

    refractive_index: np.ndarray
    exterior: float = 1.0

    def __post_init__(self) -> None:
        values = np.asarray(self.refractive_index, dtype=float)
        if values.ndim != 1 or not np.isfinite(values).all() or np.any(values <= 0.0):
            raise FemError("refractive index must be a vector of positive finite values")
        if not self.exterior > 0.0:
            raise FemError("exterior coefficient must be positive")
        object.__setattr__(self, "refractive_index", values)

    @classmethod
    def constant(cls, mesh: InteriorMesh, value: float = 1.0, r0: float = 1.0) -> "MaterialField":
        return cls(np.full(mesh.n_triangles, float(value)), float(r0))

    @classmethod
    def layered(
        cls, mesh: InteriorMesh, value: float, core_value: float, core_radius: float, r0: float = 1.0
    ) -> "MaterialField":
        """core_value inside |x| < core_radius (by triangle centroid), value elsewhere."""
        radius = np.linalg.norm(mesh.centroids, axis=1)
        return cls(np.where(radius < core_radius, float(core_value), float(value)), float(r0))

    def is_homogeneous(self) -> bool:
        return bool(np.all(self.refractive_index == self.exterior))


@dataclass(frozen=True, eq=False)
class InteriorField:
    mesh: InteriorMesh
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.coefficients, dtype=complex)
        if values.shape != (self.mesh.n_vertices,):
            raise FemError(f"field needs {self.mesh.n_vertices} coefficients, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise FemError("field has non-finite coefficients")
        object.__setattr__(self, "coefficients", values)


@dataclass(frozen=True, eq=False)
class EigenMode:
    eigenvalue: float
    field: InteriorField
    bc: BoundaryCondition


# Local element matrices ------------------------------------------------------------
def _corners(mesh: InteriorMesh) -> np.ndarray:
    return mesh.vertices[mesh.triangles]


def local_stiffness(corners: np.ndarray) -> np.ndarray:
    """Element stiffness matrices for corners of shape (T, 3, 2)."""
    x = corners[..., 0]
    y = corners[..., 1]
    b = np.roll(y, -1, axis=-1) - np.roll(y, -2, axis=-1)
    c = np.roll(x, -2, axis=-1) - np.roll(x, -1, axis=-1)
    area = 0.5 * (b[..., 0] * c[..., 1] - b[..., 1] * c[..., 0])
    if np.any(area < MIN_TRIANGLE_AREA):
        raise FemError("degenerate triangle (area < 1e-14)")
    return (b[..., :, None] * b[..., None, :] + c[..., :, None] * c[..., None, :]) / (4.0 * area[..., None, None])


def local_mass(areas: np.ndarray) -> np.ndarray:
    return areas[:, None, None] * _LOCAL_MASS[None, :, :]


def _scatter(mesh: InteriorMesh, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_stiffness(mesh: InteriorMesh) -> sp.csr_matrix:
    return _scatter(mesh, local_stiffness(_corners(mesh)))


def assemble_mass(mesh: InteriorMesh, weights: np.ndarray | None = None) -> sp.csr_matrix:
    areas = mesh.areas
    if np.any(areas < MIN_TRIANGLE_AREA):
        raise FemError("degenerate triangle (area < 1e-14)")
    scale = areas if weights is None else areas * np.asarray(weights, dtype=float)
    return _scatter(mesh, local_mass(scale))


def assemble_phi(mesh: InteriorMesh, mat: MaterialField, k: Wavenumber) -> sp.csr_matrix:
    """Phi(U, V) = int grad U . grad V - kappa^2 r U V (plain transpose symmetric)."""
    if mat.refractive_index.size != mesh.n_triangles:
        raise FemError("material does not match the mesh")
    stiffness = assemble_stiffness(mesh)
    mass = assemble_mass(mesh, mat.refractive_index)
    return (stiffness - (k.kappa**2) * mass).astype(complex).tocsr()


def load_vector(mesh: InteriorMesh, f: np.ndarray) -> np.ndarray:
    """int f V for a P1 source f and every hat V."""
    values = np.asarray(f, dtype=complex)
    if values.shape != (mesh.n_vertices,):
        raise FemError("source must have one value per vertex")
    return assemble_mass(mesh) @ values


def boundary_restriction(mesh: InteriorMesh) -> sp.csr_matrix:
    """Injection T: interior-mesh coefficients to boundary nodal coefficients."""
    n_b = mesh.boundary_trace_map.size
    data = np.ones(n_b)
    return sp.csr_matrix((data, (np.arange(n_b), mesh.boundary_trace_map)), shape=(n_b, mesh.n_vertices))


def dirichlet_trace(field: InteriorField) -> np.ndarray:
    return field.coefficients[field.mesh.boundary_trace_map]


def interpolate(mesh: InteriorMesh, func) -> np.ndarray:
    return np.asarray(func(mesh.vertices), dtype=complex)


# Eigenproblems -------------------------------------------------------------------
def interior_eigenpairs(mesh: InteriorMesh, bc: BoundaryCondition, count: int) -> list[EigenMode]:
    """Smallest eigenpairs of -Delta with homogeneous Dirichlet or Neumann conditions."""
    if bc not in ("dirichlet", "neumann"):
        raise ConfigError(f"bc must be 'dirichlet' or 'neumann', got {bc!r}")
    if not 1 <= count <= MAX_EIGEN_COUNT:
        raise ConfigError(f"count must lie in [1, {MAX_EIGEN_COUNT}], got {count}")
    stiffness = assemble_stiffness(mesh)
    mass = assemble_mass(mesh)
    if bc == "dirichlet":
        # 境界の行と列を消去する
        keep = mesh.interior_vertices()
        stiffness = stiffness[keep][:, keep]
        mass = mass[keep][:, keep]
    else:
        keep = np.arange(mesh.n_vertices)
    if count >= keep.size:
        raise FemError(f"mesh has only {keep.size} free vertices for {count} eigenpairs")

    values, vectors = sym_generalized_eig(stiffness, mass, count)
    modes = []
    for value, vector in zip(values, vectors.T):
        full = np.zeros(mesh.n_vertices)
        full[keep] = vector
        # 符号を揃える (最大成分を正に)
        pivot = np.argmax(np.abs(full))
        if full[pivot] < 0.0:
            full = -full
        modes.append(EigenMode(float(max(value, 0.0) if abs(value) < 1e-10 else value), InteriorField(mesh, full), bc))
    logger.debug("%s eigenvalues: %s", bc, ", ".join(f"{m.eigenvalue:.5f}" for m in modes))
    return modes


def _check_boundary(mode: EigenMode, boundary: BoundaryMesh) -> None:
    if not mode.field.mesh.boundary.same_as(boundary):
        raise FemError("mode is not associated with the given boundary mesh")


def neumann_trace_of_mode(mode: EigenMode, boundary: BoundaryMesh) -> np.ndarray:
    """Segment coefficients of gamma_n U for a Dirichlet eigenmode.

    Solves <eta, v> = -Phi_lam(U, E v) for every boundary hat v (Green's first
    formula with -Delta U = lam U), then averages the nodal result onto segments.
    """
    if mode.bc != "dirichlet":
        raise FemError("Neumann traces are defined for Dirichlet eigenmodes only")
    if not mode.eigenvalue > 0.0:
        raise FemError("eigenvalue must be positive")
    _check_boundary(mode, boundary)
    mesh = mode.field.mesh
    phi = assemble_stiffness(mesh) - mode.eigenvalue * assemble_mass(mesh)
    residual = (phi @ mode.field.coefficients)[mesh.boundary_trace_map]
    nodal = -np.linalg.solve(boundary.mass_dd(), residual)
    return 0.5 * (nodal[boundary.segments[:, 0]] + nodal[boundary.segments[:, 1]])


def dirichlet_trace_of_mode(mode: EigenMode, boundary: BoundaryMesh) -> np.ndarray:
    if mode.bc != "neumann":
        raise FemError("Dirichlet traces of reference modes come from Neumann eigenmodes")
    _check_boundary(mode, boundary)
    return dirichlet_trace(mode.field)


def _smooth_tests(vertices: np.ndarray) -> np.ndarray:
    x = vertices[:, 0]
    y = vertices[:, 1]
    return np.stack([np.ones_like(x), x, y, x * y, x * x - y * y], axis=1)


def green_first_formula_defect(
    mesh: InteriorMesh,
    k: Wavenumber,
    mat: MaterialField,
    field_values,
    operator_values,
    neumann_values,
) -> float:
    """max_V |int (L U) V - Phi(U, V) - <T_N U, T_D V>| / (||U||_H1 ||V||_H1).

    V runs over interpolants of 1, x, y, xy, x^2 - y^2.  field_values and
    operator_values are callables on (P, 2) points returning U and L U;
    neumann_values takes boundary midpoints and normals and returns -n . grad U.
    """
    u = interpolate(mesh, field_values)
    lu = interpolate(mesh, operator_values)
    boundary = mesh.boundary
    eta = np.asarray(neumann_values(boundary.midpoints, boundary.normals), dtype=complex)
    boundary_term = np.zeros(mesh.n_vertices, dtype=complex)
    boundary_term[mesh.boundary_trace_map] = boundary.mass_dn() @ eta
    defect = load_vector(mesh, lu) - assemble_phi(mesh, mat, k) @ u - boundary_term

    h1 = assemble_stiffness(mesh) + assemble_mass(mesh)
    tests = _smooth_tests(mesh.vertices)
    u_norm = math.sqrt(abs(np.vdot(u, h1 @ u)))
    ratios = [
        abs(np.dot(defect, v)) / (u_norm * math.sqrt(float(v @ (h1 @ v)))) for v in tests.T
    ]
    return float(max(ratios))
