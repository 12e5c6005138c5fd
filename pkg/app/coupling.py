"""Symmetric FEM-BEM coupling of an interior Helmholtz problem with the exterior.

Unknowns are the interior vertex coefficients U and the exterior Neumann
data xi on the boundary segments.  The system matrix is

    [[Phi - T^T W T,        T^T (-K_adj + 1/2 M)],
     [(K + 1/2 M^T) T,      V                   ]]

with T the nodal injection from interior vertices to boundary nodes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bem import BoundaryOperatorSet, cauchy_data_plane_wave, check_resonance, resonance_indicator
from .errors import ConfigError, NumericalError
from .fem import InteriorField, MaterialField, assemble_mass, assemble_phi, assemble_stiffness, boundary_restriction
from .linalg import (
    LinearAlgebraError,
    cholesky_lower,
    lu_factor,
    null_space_basis,
    svd,
    truncated_lstsq,
    unwhiten,
    whiten,
)
from .mesh import InteriorMesh
from .specialfn import Wavenumber

logger = logging.getLogger(__name__)


class CouplingError(NumericalError):
    """Raised when the coupled system cannot be solved."""


class DimensionMismatchError(ConfigError):
    """Raised when meshes, materials, operators or data do not fit together."""


@dataclass(frozen=True, eq=False)
class TransmissionData:
    """Jump data g, eta on the boundary and an interior source f."""

    g: np.ndarray
    eta: np.ndarray
    f: np.ndarray
    direction: tuple[float, float] | None = None
    amplitude: complex = 1.0

    def __post_init__(self) -> None:
        for name in ("g", "eta", "f"):
            values = np.asarray(getattr(self, name), dtype=complex)
            if values.ndim != 1 or not np.isfinite(values).all():
                raise ConfigError(f"transmission datum {name} must be a finite vector")
            object.__setattr__(self, name, values)
        if self.g.shape != self.eta.shape:
            raise DimensionMismatchError("g and eta must have the same length")

    @classmethod
    def zeros(cls, interior: InteriorMesh) -> "TransmissionData":
        n = interior.boundary.n_nodes
        return cls(np.zeros(n), np.zeros(n), np.zeros(interior.n_vertices))

    @classmethod
    def from_incident(
        cls, interior: InteriorMesh, k: Wavenumber, direction, amplitude: complex = 1.0
    ) -> "TransmissionData":
        """(g, eta) = traces of the incident plane wave, no interior source."""
        traces = cauchy_data_plane_wave(interior.boundary, k, direction, amplitude)
        d = tuple(float(v) for v in direction)
        return cls(traces.dirichlet, traces.neumann, np.zeros(interior.n_vertices), d, amplitude)


@dataclass(frozen=True, eq=False)
class CoupledSystem:
    matrix: np.ndarray
    ops: BoundaryOperatorSet
    mesh: InteriorMesh
    material: MaterialField
    restriction: sp.csr_matrix
    phi: sp.csr_matrix

    @property
    def n_interior(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_boundary(self) -> int:
        return self.ops.n

    @property
    def k(self) -> Wavenumber:
        return self.ops.k

    def energy_chol(self) -> np.ndarray:
        """Cholesky factor of blockdiag(S + M, energy_minus), the H^1 x H^{-1/2} Gram."""
        h1 = (assemble_stiffness(self.mesh) + assemble_mass(self.mesh)).toarray()
        n_u = self.n_interior
        chol = np.zeros_like(self.matrix, dtype=float)
        chol[:n_u, :n_u] = cholesky_lower(h1)
        chol[n_u:, n_u:] = cholesky_lower(self.ops.energy_minus)
        return chol


@dataclass(frozen=True, eq=False)
class CoupledSolution:
    field: InteriorField
    xi: np.ndarray
    rank_deficient: bool
    rcond: float
    indicator: float
    null_u: np.ndarray | None = None
    null_xi: np.ndarray | None = None

    @property
    def null_dimension(self) -> int:
        return 0 if self.null_xi is None else int(self.null_xi.shape[1])

    def to_dict(self) -> dict:
        return {
            "n_interior": int(self.field.coefficients.size),
            "n_boundary": int(self.xi.size),
            "rank_deficient": self.rank_deficient,
            "rcond": self.rcond,
            "resonance_indicator": self.indicator,
            "null_dimension": self.null_dimension,
        }


def build_coupled(interior: InteriorMesh, mat: MaterialField, k: Wavenumber, ops: BoundaryOperatorSet) -> CoupledSystem:
    if not interior.boundary.same_as(ops.mesh):
        raise DimensionMismatchError("interior mesh and boundary operators live on different boundary meshes")
    if mat.refractive_index.size != interior.n_triangles:
        raise DimensionMismatchError(
            f"material has {mat.refractive_index.size} values for {interior.n_triangles} triangles"
        )
    if not math.isclose(k.kappa, ops.k.kappa) or not math.isclose(k.exterior_coefficient, ops.k.exterior_coefficient):
        raise DimensionMismatchError("boundary operators were assembled at a different wavenumber")
    if not math.isclose(mat.exterior, k.exterior_coefficient):
        raise DimensionMismatchError("material exterior value differs from the wavenumber's r0")

    phi = assemble_phi(interior, mat, k)
    t = boundary_restriction(interior)
    dense_t = t.toarray()
    block11 = phi.toarray() - dense_t.T @ ops.w_mat @ dense_t
    block12 = dense_t.T @ (-ops.kadj_mat + 0.5 * ops.mass_dn)
    block21 = (ops.k_mat + 0.5 * ops.mass_dn.T) @ dense_t
    matrix = np.block([[block11, block12], [block21, ops.v_mat]])
    logger.debug("coupled system: %d interior + %d boundary unknowns", interior.n_vertices, ops.n)
    return CoupledSystem(matrix=matrix, ops=ops, mesh=interior, material=mat, restriction=t, phi=phi)


def build_rhs(system: CoupledSystem, data: TransmissionData) -> np.ndarray:
    """R_V(V) = int f V - <eta, V> - <W g, V> and R_T(zeta) = <(K + 1/2) g, zeta>."""
    ops = system.ops
    if data.g.size != ops.n:
        raise DimensionMismatchError(f"boundary data has length {data.g.size}, system expects {ops.n}")
    if data.f.size != system.n_interior:
        raise DimensionMismatchError(f"source has length {data.f.size}, system expects {system.n_interior}")
    tt = system.restriction.T
    r_v = assemble_mass(system.mesh) @ data.f - tt @ (ops.mass_dn @ data.eta) - tt @ (ops.w_mat @ data.g)
    r_t = (ops.k_mat + 0.5 * ops.mass_dn.T) @ data.g
    return np.concatenate([r_v, r_t])


def solve(
    system: CoupledSystem,
    rhs: np.ndarray,
    rcond: float = 1e-10,
    resonance_tol: float = 5e-3,
) -> CoupledSolution:
    """LU off resonance; truncated SVD in H^1 x H^{-1/2} coordinates otherwise.

    U is unique in both cases; at a Dirichlet resonance xi is determined only
    modulo the returned near-null space.
    """
    rhs = np.asarray(rhs, dtype=complex)
    n_u = system.n_interior
    if rhs.shape != (system.matrix.shape[0],):
        raise DimensionMismatchError(f"rhs must have length {system.matrix.shape[0]}, got shape {rhs.shape}")
    if not np.isfinite(rhs).all():
        raise ConfigError("rhs has non-finite entries")

    indicator = resonance_indicator(system.ops, "dirichlet")
    try:
        factor = lu_factor(system.matrix)
        estimate = factor.rcond
    except LinearAlgebraError:
        factor = None
        estimate = 0.0

    if factor is not None and estimate >= rcond and indicator >= resonance_tol:
        x = factor.solve(rhs)
        return CoupledSolution(
            field=InteriorField(system.mesh, x[:n_u]),
            xi=x[n_u:],
            rank_deficient=False,
            rcond=estimate,
            indicator=indicator,
        )

    logger.warning(
        "coupled system is near-singular at kappa=%.6g (rcond=%.2e, V indicator=%.3e); using least squares",
        system.k.kappa,
        estimate,
        indicator,
    )
    chol = system.energy_chol()
    result = svd(whiten(system.matrix, chol))
    # 正規化座標での絶対しきい値 (V の指標と同じスケール)
    threshold = resonance_tol
    y = truncated_lstsq(result, np.linalg.solve(chol, rhs), threshold)
    x = unwhiten(y, chol)
    null = unwhiten(null_space_basis(result, threshold), chol)
    if not np.isfinite(x).all():
        raise CouplingError(f"least-squares solve produced non-finite values at kappa={system.k.kappa}")
    logger.info("least-squares solve discarded %d singular values below %.2e", null.shape[1], threshold)
    return CoupledSolution(
        field=InteriorField(system.mesh, x[:n_u]),
        xi=x[n_u:],
        rank_deficient=True,
        rcond=estimate,
        indicator=indicator,
        null_u=null[:n_u],
        null_xi=null[n_u:],
    )


def symmetry_defect(system: CoupledSystem) -> float:
    """||P - P^T||_F / ||P||_F (plain transpose)."""
    a = system.matrix
    return float(np.linalg.norm(a - a.T) / np.linalg.norm(a))


# Dirichlet-to-Neumann maps --------------------------------------------------------
@dataclass(frozen=True, eq=False)
class DtnMaps:
    """Exterior DtN maps from pl Dirichlet coefficients.

    first and second return pc Neumann coefficients; costabel returns the
    weak form (functional values against the pl hats).
    """

    first: np.ndarray
    second: np.ndarray
    costabel: np.ndarray


def dtn_maps(ops: BoundaryOperatorSet, resonance_tol: float = 5e-3) -> DtnMaps:
    check_resonance(ops, "dirichlet", "DtN1 = -V^-1 (K + 1/2)", resonance_tol)
    first = -np.linalg.solve(ops.v_mat, ops.k_mat + 0.5 * ops.mass_dn.T)
    check_resonance(ops, "neumann", "DtN2 = -(K_adj + 1/2)^-1 W", resonance_tol)
    second = -np.linalg.solve(ops.kadj_nn + 0.5 * ops.mass_nn, ops.w_nd)
    costabel = -ops.w_mat + (-ops.kadj_mat + 0.5 * ops.mass_dn) @ first
    return DtnMaps(first=first, second=second, costabel=costabel)


def dtn_consistency(maps: DtnMaps, mesh, max_mode: int = 2) -> float:
    """Relative L2 difference of DtN1 and DtN2 on smooth Dirichlet data."""
    s = 2.0 * math.pi * mesh.arclength_nodes() / mesh.perimeter
    columns = [np.ones_like(s)]
    for m in range(1, max_mode + 1):
        columns.extend([np.cos(m * s), np.sin(m * s)])
    probes = np.stack(columns, axis=1)
    upper = cholesky_lower(mesh.mass_dd()).T
    _, r = np.linalg.qr(upper @ probes)
    basis = np.linalg.solve(r.T, probes.T).T
    weight = np.sqrt(mesh.lengths)[:, None]
    difference = np.linalg.norm(weight * ((maps.first - maps.second) @ basis), 2)
    reference = np.linalg.norm(weight * (maps.first @ basis), 2)
    return float(difference / reference)
