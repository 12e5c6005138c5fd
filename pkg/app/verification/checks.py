from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from ..bem import (
    BoundaryOperatorSet,
    CalderonProjector,
    assemble_operators,
    calderon_projector,
    cauchy_data_plane_wave,
    cauchy_data_point_source,
    duality_defect,
    idempotency_defect,
    restricted_norm,
    smooth_trace_probes,
    solve_dirichlet_bie,
    solve_neumann_bie,
    trace_norm,
)
from ..coupling import TransmissionData, build_coupled, build_rhs, dtn_consistency, dtn_maps, solve, symmetry_defect
from ..fem import MaterialField, assemble_mass, green_first_formula_defect, interior_eigenpairs
from ..models import KernelReport
from ..potentials import eval_dl, eval_sl, incident_plane_wave, jump_defects, postprocess_exterior, probe_circle
from ..problem import Problem
from ..spectral import EnergyNorms, coupled_kernel_check, kernel_annihilation, kernel_overlap, kernel_report
from ..specialfn import Wavenumber, bessel_zero, greens_fn

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    value: float
    tolerance: float
    passed: bool
    message: str = ""

    @classmethod
    def measured(cls, value: float, tolerance: float) -> "CheckResult":
        passed = bool(math.isfinite(value) and value <= tolerance)
        return cls(float(value), tolerance, passed)

    @classmethod
    def failed(cls, tolerance: float, message: str) -> "CheckResult":
        return cls(math.nan, tolerance, False, message)

    def to_dict(self) -> dict:
        payload = {"value": self.value, "tolerance": self.tolerance, "pass": self.passed}
        if self.message:
            payload["message"] = self.message
        return payload


class VerificationContext:
    """Shared, lazily assembled objects for the checks of one configuration."""

    def __init__(self, problem: Problem) -> None:
        self.problem = problem
        self.config = problem.config

    # Boundary side -----------------------------------------------------
    @cached_property
    def k(self) -> Wavenumber:
        return self.problem.wavenumber()

    @cached_property
    def norms(self) -> EnergyNorms:
        return EnergyNorms.for_mesh(self.problem.boundary, self.problem.quad, self.problem.threads)

    @cached_property
    def ops(self) -> BoundaryOperatorSet:
        return assemble_operators(
            self.problem.boundary, self.k, self.problem.quad, self.problem.threads, grams=self.norms.grams
        )

    @cached_property
    def interior_projector(self) -> CalderonProjector:
        return calderon_projector(self.ops, "interior")

    @cached_property
    def exterior_projector(self) -> CalderonProjector:
        return calderon_projector(self.ops, "exterior")

    @cached_property
    def probes(self) -> np.ndarray:
        return smooth_trace_probes(self.problem.boundary, self.config.trace_modes)

    @cached_property
    def point_source(self):
        return cauchy_data_point_source(self.problem.boundary, self.k, self.config.point_source)

    @cached_property
    def probe_points(self) -> np.ndarray:
        return probe_circle(self.config.probe_radius, self.config.probe_count)

    # Disk resonance ----------------------------------------------------
    @cached_property
    def dirichlet_resonance(self) -> float:
        return bessel_zero(0, 1, "J") / (self.config.radius * math.sqrt(self.config.r0))

    def _kernel_kwargs(self) -> dict:
        return {
            "quad": self.problem.quad,
            "threads": self.problem.threads,
            "null_ratio": self.config.null_ratio,
            "floor_offsets": self.config.floor_offsets,
            "eigen_count": self.config.eigen_count,
            "norms": self.norms,
        }

    @cached_property
    def v_report(self) -> KernelReport:
        p = self.problem
        return kernel_report(p.boundary, p.interior, p.material, self.dirichlet_resonance, "V", **self._kernel_kwargs())

    @cached_property
    def kadj_report(self) -> KernelReport:
        p = self.problem
        return kernel_report(
            p.boundary, p.interior, p.material, self.dirichlet_resonance, "KadjHalf", **self._kernel_kwargs()
        )

    @cached_property
    def coupled_report(self) -> KernelReport:
        p = self.problem
        return coupled_kernel_check(
            p.boundary, p.interior, p.material, self.dirichlet_resonance, **self._kernel_kwargs()
        )

    @cached_property
    def neumann_resonance(self) -> float:
        return bessel_zero(1, 1, "Jprime") / (self.config.radius * math.sqrt(self.config.r0))

    @cached_property
    def w_report(self) -> KernelReport:
        p = self.problem
        return kernel_report(p.boundary, p.interior, p.material, self.neumann_resonance, "W", **self._kernel_kwargs())

    @cached_property
    def khalf_report(self) -> KernelReport:
        p = self.problem
        return kernel_report(
            p.boundary, p.interior, p.material, self.neumann_resonance, "KHalf", **self._kernel_kwargs()
        )

    @cached_property
    def coupled_neumann_report(self) -> KernelReport:
        p = self.problem
        return coupled_kernel_check(
            p.boundary, p.interior, p.material, self.neumann_resonance, **self._kernel_kwargs()
        )

    # Transparency ------------------------------------------------------
    @cached_property
    def transparency(self):
        p = self.problem
        # 透過性は r = r0 の一様媒質でのみ成り立つ
        homogeneous = MaterialField.constant(p.interior, self.config.r0, self.config.r0)
        system = build_coupled(p.interior, homogeneous, self.k, self.ops)
        data = TransmissionData.from_incident(
            p.interior, self.k, self.config.incident_direction, self.config.incident_amplitude
        )
        solution = solve(system, build_rhs(system, data), self.config.rcond, self.config.resonance_tol)
        return system, data, solution


# Checks ------------------------------------------------------------------------
def _relative(difference: float, reference: float) -> float:
    return difference / reference if reference > 0.0 else math.inf


def check_projector_complement(ctx: VerificationContext) -> float:
    total = ctx.interior_projector.blocks + ctx.exterior_projector.blocks
    return float(np.abs(total - np.eye(total.shape[0])).max())


def check_idempotency_interior(ctx: VerificationContext) -> float:
    return idempotency_defect(ctx.interior_projector, ctx.problem.boundary, ctx.config.trace_modes)


def check_idempotency_exterior(ctx: VerificationContext) -> float:
    return idempotency_defect(ctx.exterior_projector, ctx.problem.boundary, ctx.config.trace_modes)


def check_range_complementarity(ctx: VerificationContext) -> float:
    product = ctx.interior_projector.blocks @ ctx.exterior_projector.blocks
    return restricted_norm(product, ctx.problem.boundary, ctx.probes)


def check_plane_wave(ctx: VerificationContext) -> float:
    mesh = ctx.problem.boundary
    data = cauchy_data_plane_wave(mesh, ctx.k, ctx.config.incident_direction, ctx.config.incident_amplitude)
    residual = ctx.interior_projector.blocks @ data.stacked() - data.stacked()
    return _relative(trace_norm(mesh, residual), trace_norm(mesh, data))


def check_point_source(ctx: VerificationContext) -> float:
    mesh = ctx.problem.boundary
    data = ctx.point_source
    residual = ctx.exterior_projector.blocks @ data.stacked() - data.stacked()
    return _relative(trace_norm(mesh, residual), trace_norm(mesh, data))


def check_v_symmetry(ctx: VerificationContext) -> float:
    v = ctx.ops.v_mat
    return float(np.linalg.norm(v - v.T) / np.linalg.norm(v))


def check_w_symmetry(ctx: VerificationContext) -> float:
    w = ctx.ops.w_mat
    return float(np.linalg.norm(w - w.T) / np.linalg.norm(w))


def check_duality(ctx: VerificationContext) -> float:
    return duality_defect(ctx.ops)


def check_dirichlet_bie(ctx: VerificationContext) -> float:
    mesh = ctx.problem.boundary
    data = ctx.point_source
    xi = solve_dirichlet_bie(ctx.ops, data.dirichlet, ctx.config.resonance_tol)
    weight = np.sqrt(mesh.lengths)
    return _relative(float(np.linalg.norm(weight * (xi - data.neumann))), float(np.linalg.norm(weight * data.neumann)))


def check_neumann_bie(ctx: VerificationContext) -> float:
    mesh = ctx.problem.boundary
    data = ctx.point_source
    u = solve_neumann_bie(ctx.ops, data.neumann, ctx.config.resonance_tol)
    gram = mesh.mass_dd()
    error = u - data.dirichlet
    return _relative(
        math.sqrt(abs(np.vdot(error, gram @ error))), math.sqrt(abs(np.vdot(data.dirichlet, gram @ data.dirichlet)))
    )


def check_dtn_consistency(ctx: VerificationContext) -> float:
    maps = dtn_maps(ctx.ops, ctx.config.resonance_tol)
    return dtn_consistency(maps, ctx.problem.boundary, ctx.config.trace_modes)


def check_coupled_symmetry(ctx: VerificationContext) -> float:
    p = ctx.problem
    return symmetry_defect(build_coupled(p.interior, p.material, ctx.k, ctx.ops))


def check_transparency_interior(ctx: VerificationContext) -> float:
    system, _, solution = ctx.transparency
    mesh = system.mesh
    exact = incident_plane_wave(mesh.vertices, ctx.k, ctx.config.incident_direction, ctx.config.incident_amplitude)
    mass = assemble_mass(mesh)
    error = solution.field.coefficients - exact
    return _relative(math.sqrt(abs(np.vdot(error, mass @ error))), math.sqrt(abs(np.vdot(exact, mass @ exact))))


def check_transparency_exterior(ctx: VerificationContext) -> float:
    _, data, solution = ctx.transparency
    scattered = postprocess_exterior(
        ctx.problem.boundary, ctx.k, data.g, solution.field, solution.xi, ctx.probe_points, ctx.problem.quad
    )
    return float(np.abs(scattered.values).max() / abs(ctx.config.incident_amplitude))


def check_representation(ctx: VerificationContext) -> float:
    mesh = ctx.problem.boundary
    data = ctx.point_source
    points = ctx.probe_points
    field = (eval_sl(mesh, ctx.k, data.neumann, points) + eval_dl(mesh, ctx.k, data.dirichlet, points)).scaled(-1.0)
    exact = greens_fn(ctx.k, np.linalg.norm(points - np.asarray(ctx.config.point_source), axis=1))
    return float(np.abs(field.values - exact).max() / np.abs(exact).max())


def check_gauss_identity(ctx: VerificationContext) -> float:
    mesh = ctx.problem.boundary
    small = Wavenumber(1e-3, 1.0)
    centroid = mesh.nodes.mean(axis=0)
    points = np.vstack([centroid, ctx.probe_points])
    values = eval_dl(mesh, small, np.ones(mesh.n_nodes), points).values
    return float(max(abs(values[0] - 1.0), np.abs(values[1:]).max()))


def check_jump_relations(ctx: VerificationContext) -> float:
    mesh = ctx.problem.boundary
    s = 2.0 * math.pi * mesh.arclength_nodes() / mesh.perimeter
    s_mid = 2.0 * math.pi * mesh.arclength_midpoints() / mesh.perimeter
    g = np.cos(s) + 0.5 * np.sin(2.0 * s)
    xi = 1.0 + 0.5 * np.cos(s_mid)
    defects = jump_defects(mesh, ctx.k, g, xi, 0.1 * mesh.h, ctx.problem.quad)
    return max(defects.values())


def check_green_formula(ctx: VerificationContext) -> float:
    p = ctx.problem
    k = ctx.k
    d = np.asarray(ctx.config.incident_direction)
    homogeneous = MaterialField.constant(p.interior, ctx.config.r0, ctx.config.r0)

    def field(points):
        return np.exp(1j * k.k * (points @ d))

    def operator(points):
        return np.zeros(points.shape[0], dtype=complex)

    def neumann(points, normals):
        return -1j * k.k * (normals @ d) * field(points)

    return green_first_formula_defect(p.interior, k, homogeneous, field, operator, neumann)


def check_fem_eigenvalue(ctx: VerificationContext) -> float:
    modes = interior_eigenpairs(ctx.problem.interior, "dirichlet", 1)
    exact = (bessel_zero(0, 1, "J") / ctx.config.radius) ** 2
    return abs(modes[0].eigenvalue - exact) / exact


def _angle(report: KernelReport) -> float:
    if not report.resonant or not report.principal_angles:
        return math.inf
    if not report.dimension_match:
        logger.warning(
            "%s kernel has dimension %d, FEM traces span %d", report.operator, report.dimension, report.reference_dimension
        )
        return math.inf
    return report.max_angle


def check_v_kernel(ctx: VerificationContext) -> float:
    return _angle(ctx.v_report)


def check_kadj_overlap(ctx: VerificationContext) -> float:
    if not (ctx.v_report.resonant and ctx.kadj_report.resonant):
        return math.inf
    return kernel_overlap(ctx.v_report, ctx.kadj_report, ctx.norms)


def check_w_kernel(ctx: VerificationContext) -> float:
    return _angle(ctx.w_report)


def check_khalf_overlap(ctx: VerificationContext) -> float:
    if not (ctx.w_report.resonant and ctx.khalf_report.resonant):
        return math.inf
    return kernel_overlap(ctx.w_report, ctx.khalf_report, ctx.norms, "pl")


def check_coupled_interior_ratio(ctx: VerificationContext) -> float:
    report = ctx.coupled_report
    if not report.resonant:
        return math.inf
    return max(report.interior_ratio)


def check_coupled_angle(ctx: VerificationContext) -> float:
    return _angle(ctx.coupled_report)


def check_coupled_neumann_regular(ctx: VerificationContext) -> float:
    # Neumann 共鳴では結合系は正則のまま: floor / sigma_min が小さい
    report = ctx.coupled_neumann_report
    if report.resonant:
        return math.inf
    return float(report.floor / report.singular_values[0])


def check_kernel_annihilation(ctx: VerificationContext) -> float:
    report = ctx.v_report
    if not report.resonant:
        return math.inf
    return kernel_annihilation(report, ctx.problem.boundary, ctx.config.r0, ctx.probe_points, ctx.problem.quad)


CHECKS: dict[str, Callable[[VerificationContext], float]] = {
    "projector_complement": check_projector_complement,
    "projector_idempotency_interior": check_idempotency_interior,
    "projector_idempotency_exterior": check_idempotency_exterior,
    "range_complementarity": check_range_complementarity,
    "plane_wave_interior_cauchy": check_plane_wave,
    "point_source_exterior_cauchy": check_point_source,
    "v_symmetry": check_v_symmetry,
    "w_symmetry": check_w_symmetry,
    "duality": check_duality,
    "dirichlet_bie_point_source": check_dirichlet_bie,
    "neumann_bie_point_source": check_neumann_bie,
    "dtn_consistency": check_dtn_consistency,
    "coupled_symmetry": check_coupled_symmetry,
    "transparency_interior": check_transparency_interior,
    "transparency_exterior": check_transparency_exterior,
    "representation_formula": check_representation,
    "gauss_identity": check_gauss_identity,
    "jump_relations": check_jump_relations,
    "green_first_formula": check_green_formula,
    "fem_dirichlet_eigenvalue": check_fem_eigenvalue,
    "v_kernel": check_v_kernel,
    "kadj_kernel_overlap": check_kadj_overlap,
    "w_kernel": check_w_kernel,
    "khalf_kernel_overlap": check_khalf_overlap,
    "coupled_kernel_interior_ratio": check_coupled_interior_ratio,
    "coupled_kernel_angle": check_coupled_angle,
    "coupled_neumann_regular": check_coupled_neumann_regular,
    "kernel_annihilation": check_kernel_annihilation,
}
