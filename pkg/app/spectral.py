"""Resonance sweeps and kernel verification against FEM eigentraces.

Singular values are taken in normalized coordinates so they approximate
operator singular values in the continuous norms:

    V        H^{-1/2} Gram (energy_minus) on both sides
    W        H^{1/2} Gram (energy_plus) on both sides
    K + 1/2  L2 Gram of the nodal hats
    K_adj    L2 Gram of the segment indicators
    coupled  blockdiag(H^1 Gram, energy_minus)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .bem import BoundaryOperatorSet, Spectrum, assemble_operators, energy_grams
from .coupling import build_coupled
from .errors import ConfigError, NumericalError
from .fem import (
    MaterialField,
    assemble_mass,
    assemble_stiffness,
    dirichlet_trace_of_mode,
    interior_eigenpairs,
    neumann_trace_of_mode,
)
from .linalg import (
    cholesky_lower,
    largest_singular,
    principal_angles,
    smallest_singular,
    svd,
    unwhiten,
    whiten,
)
from .mesh import BoundaryMesh, InteriorMesh
from .models import SWEEP_CSV_FIELDS, KernelReport, OperatorName, SweepRecord
from .potentials import eval_sl
from .quadrature import QuadratureSpec
from .specialfn import MAX_INDEX, MAX_ORDER, Wavenumber, bessel_zero
from .workers import parallel_map

logger = logging.getLogger(__name__)

# FEM 固有値と kappa^2 r0 の照合許容 (相対)
MATCH_TOLERANCE = 0.02
# 縮退ペアをまとめる相対幅
CLUSTER_TOLERANCE = 0.01
# kappa_star 周りの探索半幅
DIP_WINDOW = 0.02


class SweepError(NumericalError):
    """Raised when one sweep point fails; carries the wavenumber."""

    def __init__(self, kappa: float, cause: BaseException) -> None:
        super().__init__(f"sweep failed at kappa={kappa:.10g}: {cause}")
        self.kappa = kappa
        self.cause = cause


@dataclass(frozen=True, eq=False)
class EnergyNorms:
    """Cholesky factors of the Gram matrices used for normalization."""

    minus: np.ndarray
    plus: np.ndarray
    mass_dd: np.ndarray
    sqrt_lengths: np.ndarray
    grams: tuple[np.ndarray, np.ndarray]

    @classmethod
    def for_mesh(cls, mesh: BoundaryMesh, quad: QuadratureSpec | None = None, threads: int | None = None) -> "EnergyNorms":
        grams = energy_grams(mesh, quad, threads)
        return cls(
            minus=cholesky_lower(grams[0]),
            plus=cholesky_lower(grams[1]),
            mass_dd=cholesky_lower(mesh.mass_dd()),
            sqrt_lengths=np.sqrt(mesh.lengths),
            grams=grams,
        )

    def l2_weight(self, vectors: np.ndarray, space: str) -> np.ndarray:
        """Coordinates whose Euclidean inner product is the L2(Gamma) one."""
        vectors = np.asarray(vectors)
        if space == "pc":
            return self.sqrt_lengths.reshape((-1,) + (1,) * (vectors.ndim - 1)) * vectors
        return self.mass_dd.T @ vectors


# Reference eigentraces ---------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ReferenceTraces:
    """FEM eigentraces whose eigenvalue matches lambda = kappa^2 r0."""

    target: float
    eigenvalues: tuple[float, ...]
    traces: np.ndarray
    space: str

    @property
    def dimension(self) -> int:
        return int(self.traces.shape[1])


def _spectrum_traces(interior: InteriorMesh, spectrum: Spectrum, count: int) -> tuple[np.ndarray, np.ndarray, str]:
    boundary = interior.boundary
    modes = interior_eigenpairs(interior, spectrum, count)
    values = np.array([mode.eigenvalue for mode in modes])
    if spectrum == "dirichlet":
        traces = np.stack([neumann_trace_of_mode(mode, boundary) for mode in modes], axis=1)
        return values, traces, "pc"
    keep = values > 1e-8
    traces = np.stack([dirichlet_trace_of_mode(mode, boundary) for mode, flag in zip(modes, keep) if flag], axis=1)
    return values[keep], traces, "pl"


def _select_cluster(values: np.ndarray, traces: np.ndarray, target: float, tolerance: float) -> tuple[np.ndarray, np.ndarray]:
    if values.size == 0:
        return values, traces[:, :0]
    nearest = values[np.argmin(np.abs(values - target))]
    if abs(nearest - target) > tolerance * target:
        return values[:0], traces[:, :0]
    chosen = np.abs(values - nearest) <= CLUSTER_TOLERANCE * nearest
    return values[chosen], traces[:, chosen]


def reference_traces(
    interior: InteriorMesh,
    boundary: BoundaryMesh,
    kappa: float,
    spectrum: Spectrum,
    r0: float = 1.0,
    count: int = 12,
    tolerance: float = MATCH_TOLERANCE,
) -> ReferenceTraces:
    """Neumann traces of Dirichlet modes, or Dirichlet traces of non-constant Neumann modes."""
    if spectrum not in ("dirichlet", "neumann"):
        raise ConfigError(f"unknown spectrum {spectrum!r}")
    if not interior.boundary.same_as(boundary):
        raise ConfigError("interior mesh does not match the boundary mesh")
    target = kappa * kappa * r0
    values, traces, space = _spectrum_traces(interior, spectrum, count)
    chosen_values, chosen = _select_cluster(values, traces, target, tolerance)
    if chosen.shape[1] == 0:
        logger.info(
            "no %s eigenvalue within %.0f%% of lambda=%.6g (computed: %s)",
            spectrum,
            100 * tolerance,
            target,
            ", ".join(f"{v:.5g}" for v in values),
        )
    return ReferenceTraces(target, tuple(float(v) for v in chosen_values), chosen, space)


# Normalized operators -----------------------------------------------------------------
_KERNEL_SPECTRUM: dict[str, Spectrum] = {
    "V": "dirichlet",
    "KadjHalf": "dirichlet",
    "coupled": "dirichlet",
    "W": "neumann",
    "KHalf": "neumann",
}


def _normalized(ops: BoundaryOperatorSet, operator: str, norms: EnergyNorms) -> tuple[np.ndarray, np.ndarray, str]:
    """(whitened matrix, Cholesky factor for back-transformation, trial space)."""
    if operator == "V":
        return whiten(ops.v_mat, norms.minus), norms.minus, "pc"
    if operator == "W":
        return whiten(ops.w_mat, norms.plus), norms.plus, "pl"
    if operator == "KadjHalf":
        chol = np.diag(norms.sqrt_lengths)
        return whiten(-ops.kadj_nn + 0.5 * ops.mass_nn, chol), chol, "pc"
    if operator == "KHalf":
        return whiten(-ops.k_dd + 0.5 * ops.mass_dd, norms.mass_dd), norms.mass_dd, "pl"
    raise ConfigError(f"unknown operator {operator!r}")


def _padded_angles(vectors: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Principal angles, with pi/2 for every direction one span has and the other lacks."""
    if vectors.shape[1] == 0 or reference.shape[1] == 0:
        return np.zeros(0)
    angles = principal_angles(vectors, reference)
    missing = abs(vectors.shape[1] - reference.shape[1])
    return np.concatenate([angles, np.full(missing, 0.5 * math.pi)])


def _max_angle(vectors: np.ndarray, reference: np.ndarray) -> float:
    # 1 本のベクトルが基準空間に含まれるかを見るので次元差は問わない
    if vectors.shape[1] == 0 or reference.shape[1] == 0:
        return math.nan
    return float(principal_angles(vectors, reference).max())


# Sweep -----------------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SweepContext:
    """Wavenumber-independent data shared by every sweep point."""

    boundary: BoundaryMesh
    interior: InteriorMesh
    material: MaterialField
    quad: QuadratureSpec
    norms: EnergyNorms
    h1_chol: np.ndarray
    eigenvalues: np.ndarray
    traces: np.ndarray

    @classmethod
    def prepare(
        cls,
        boundary: BoundaryMesh,
        interior: InteriorMesh,
        material: MaterialField,
        quad: QuadratureSpec | None = None,
        threads: int | None = None,
        eigen_count: int = 12,
    ) -> "SweepContext":
        if not interior.boundary.same_as(boundary):
            raise ConfigError("interior mesh does not match the boundary mesh")
        quad = quad or QuadratureSpec()
        h1 = (assemble_stiffness(interior) + assemble_mass(interior)).toarray()
        values, traces, _ = _spectrum_traces(interior, "dirichlet", eigen_count)
        return cls(
            boundary=boundary,
            interior=interior,
            material=material,
            quad=quad,
            norms=EnergyNorms.for_mesh(boundary, quad, threads),
            h1_chol=cholesky_lower(h1),
            eigenvalues=values,
            traces=traces,
        )

    def coupled_chol(self) -> np.ndarray:
        return sla.block_diag(self.h1_chol, self.norms.minus)

    def wavenumber(self, kappa: float) -> Wavenumber:
        return Wavenumber(kappa, self.material.exterior)

    def operators(self, kappa: float, threads: int | None = 1) -> BoundaryOperatorSet:
        return assemble_operators(self.boundary, self.wavenumber(kappa), self.quad, threads, grams=self.norms.grams)

    def reference_at(self, kappa: float) -> np.ndarray:
        target = kappa * kappa * self.material.exterior
        # 最も近いクラスタ (許容なし) を角度の基準にする
        _, chosen = _select_cluster(self.eigenvalues, self.traces, target, math.inf)
        return self.norms.l2_weight(chosen, "pc")


def _sweep_point(ctx: SweepContext, kappa: float, which: Sequence[str]) -> SweepRecord:
    record = SweepRecord(kappa=kappa)
    ops = ctx.operators(kappa)
    reference = ctx.reference_at(kappa) if ("V" in which or "coupled" in which) else None
    if "V" in which:
        matrix, chol, _ = _normalized(ops, "V", ctx.norms)
        result = svd(matrix)
        record.sigma_min_v = float(result.values[-1])
        record.cond_v = float(result.values[0] / result.values[-1])
        vector = unwhiten(result.right[:, -1:], chol)
        record.angle_v = _max_angle(ctx.norms.l2_weight(vector, "pc"), reference)
    if "W" in which:
        matrix, _, _ = _normalized(ops, "W", ctx.norms)
        values = svd(matrix).values
        record.sigma_min_w = float(values[-1])
        record.cond_w = float(values[0] / values[-1])
    if "coupled" in which:
        system = build_coupled(ctx.interior, ctx.material, ctx.wavenumber(kappa), ops)
        chol = ctx.coupled_chol()
        matrix = whiten(system.matrix, chol)
        sigma, vector = smallest_singular(matrix)
        record.sigma_min_coupled = sigma
        record.cond_coupled = largest_singular(matrix) / sigma if sigma > 0.0 else math.inf
        xi = unwhiten(vector[:, None], chol)[system.n_interior :]
        record.angle_coupled = _max_angle(ctx.norms.l2_weight(xi, "pc"), reference)
    return record


def sweep(
    boundary: BoundaryMesh,
    interior: InteriorMesh,
    material: MaterialField,
    kappa_grid: Iterable[float],
    which: Sequence[str] = ("V", "W", "coupled"),
    quad: QuadratureSpec | None = None,
    threads: int | None = None,
    eigen_count: int = 12,
    context: SweepContext | None = None,
) -> list[SweepRecord]:
    """One SweepRecord per wavenumber, in grid order."""
    grid = [float(value) for value in kappa_grid]
    if not grid:
        raise ConfigError("kappa grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("kappa grid must be strictly ascending")
    unknown = [name for name in which if name not in ("V", "W", "coupled")]
    if unknown or not which:
        raise ConfigError(f"unknown sweep operators {unknown}")
    ctx = context or SweepContext.prepare(boundary, interior, material, quad, threads, eigen_count)

    def run(kappa: float) -> SweepRecord:
        try:
            return _sweep_point(ctx, kappa, which)
        except SweepError:
            raise
        except (NumericalError, ValueError) as exc:
            raise SweepError(kappa, exc) from exc

    logger.info("sweeping %d wavenumbers in [%.4g, %.4g] for %s", len(grid), grid[0], grid[-1], ", ".join(which))
    return parallel_map(run, grid, threads)


@dataclass(frozen=True)
class Dip:
    kappa: float
    value: float
    ratio: float
    index: int

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "value": self.value, "ratio": self.ratio, "index": self.index}


def find_dips(records: Sequence[SweepRecord], column: str, null_ratio: float = 0.1) -> list[Dip]:
    """Strict interior local minima of a sweep column below null_ratio x column median."""
    if column not in SWEEP_CSV_FIELDS or column == "kappa":
        raise ConfigError(f"unknown sweep column {column!r}")
    values = np.array([getattr(record, column) for record in records], dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size < 3:
        return []
    median = float(np.median(finite))
    dips = []
    for i in range(1, values.size - 1):
        v = values[i]
        if not np.isfinite(v):
            continue
        if v < values[i - 1] and v < values[i + 1] and v <= null_ratio * median:
            dips.append(Dip(kappa=records[i].kappa, value=float(v), ratio=float(v / median), index=i))
    return dips


# Disk oracle ---------------------------------------------------------------------------
@dataclass(frozen=True)
class DiskResonance:
    kappa: float
    order: int
    index: int
    multiplicity: int
    spectrum: str

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "order": self.order,
            "index": self.index,
            "multiplicity": self.multiplicity,
            "spectrum": self.spectrum,
        }


def disk_resonances(radius: float, r0: float, kappa_max: float, spectrum: Spectrum) -> list[DiskResonance]:
    """Exact resonant wavenumbers of the disk: kappa = j / (radius sqrt(r0)), ascending.

    Dirichlet uses zeros of J_n, Neumann zeros of J_n' plus kappa = 0 (constant mode).
    """
    if spectrum not in ("dirichlet", "neumann"):
        raise ConfigError(f"unknown spectrum {spectrum!r}")
    if not (radius > 0.0 and r0 > 0.0):
        raise ConfigError("radius and r0 must be positive")
    scale = radius * math.sqrt(r0)
    kind = "J" if spectrum == "dirichlet" else "Jprime"
    found = [DiskResonance(0.0, 0, 0, 1, spectrum)] if spectrum == "neumann" else []
    for order in range(MAX_ORDER + 1):
        added = False
        for index in range(1, MAX_INDEX + 1):
            kappa = bessel_zero(order, index, kind) / scale
            if kappa > kappa_max:
                break
            found.append(DiskResonance(kappa, order, index, 1 if order == 0 else 2, spectrum))
            added = True
        if not added:
            break
    return sorted(found, key=lambda item: item.kappa)


# Kernel reports -------------------------------------------------------------------------
def _floor(sigma_at, kappa_star: float, offsets: Sequence[float]) -> float:
    samples = [sigma_at(kappa_star + offset) for offset in offsets if kappa_star + offset > 0.0]
    if not samples:
        raise ConfigError("no valid floor offsets around kappa_star")
    return float(np.median(samples))


def _locate(sigma_at, kappa_star: float) -> float:
    lower = max(kappa_star - DIP_WINDOW, 1e-6)
    result = minimize_scalar(sigma_at, bounds=(lower, kappa_star + DIP_WINDOW), method="bounded", options={"xatol": 1e-6})
    return float(result.x)


def _orthonormal(weighted: np.ndarray) -> np.ndarray:
    if weighted.shape[1] == 0:
        return weighted
    q, _ = np.linalg.qr(weighted)
    return q


def kernel_report(
    boundary: BoundaryMesh,
    interior: InteriorMesh,
    material: MaterialField,
    kappa_star: float,
    operator: OperatorName,
    quad: QuadratureSpec | None = None,
    threads: int | None = None,
    null_ratio: float = 0.1,
    floor_offsets: Sequence[float] = (-0.3, -0.15, 0.15, 0.3),
    eigen_count: int = 12,
    norms: EnergyNorms | None = None,
) -> KernelReport:
    """Near-null space of V, W, -K_adj + 1/2 or -K + 1/2 near kappa_star vs FEM eigentraces.

    The dip is located within +/-0.02 of kappa_star; no dip gives resonant=False.
    """
    if operator == "coupled":
        return coupled_kernel_check(
            boundary, interior, material, kappa_star, quad, threads, null_ratio, floor_offsets, eigen_count, norms
        )
    if operator not in _KERNEL_SPECTRUM:
        raise ConfigError(f"unknown operator {operator!r}")
    quad = quad or QuadratureSpec()
    norms = norms or EnergyNorms.for_mesh(boundary, quad, threads)
    r0 = material.exterior

    def normalized_at(kappa: float):
        ops = assemble_operators(boundary, Wavenumber(kappa, r0), quad, threads, grams=norms.grams)
        return _normalized(ops, operator, norms)

    def sigma_at(kappa: float) -> float:
        return float(svd(normalized_at(kappa)[0]).values[-1])

    floor = _floor(sigma_at, kappa_star, floor_offsets)
    located = _locate(sigma_at, kappa_star)
    matrix, chol, space = normalized_at(located)
    result = svd(matrix)
    threshold = null_ratio * floor
    mask = result.values <= threshold
    null = unwhiten(result.right[:, mask], chol)
    weighted = norms.l2_weight(null, space)
    if weighted.shape[1]:
        scale = np.linalg.norm(weighted, axis=0)
        null = null / scale
        weighted = weighted / scale

    spectrum = _KERNEL_SPECTRUM[operator]
    reference = reference_traces(interior, boundary, located, spectrum, r0, eigen_count)
    ref_weighted = _orthonormal(norms.l2_weight(reference.traces, reference.space))
    angles = _padded_angles(weighted, ref_weighted)
    logger.info(
        "%s at kappa=%.6f: sigma_min=%.3e floor=%.3e -> %d near-null vector(s)",
        operator,
        located,
        result.values[-1],
        floor,
        int(mask.sum()),
    )
    return KernelReport(
        kappa_star=located,
        operator=operator,
        resonant=bool(mask.any()),
        null_vectors=null,
        reference_space=ref_weighted,
        principal_angles=[float(a) for a in angles],
        singular_values=[float(v) for v in result.values[-4:][::-1]],
        floor=floor,
        threshold=threshold,
        reference_eigenvalues=list(reference.eigenvalues),
        target_eigenvalue=reference.target,
    )


def coupled_kernel_check(
    boundary: BoundaryMesh,
    interior: InteriorMesh,
    material: MaterialField,
    kappa_star: float,
    quad: QuadratureSpec | None = None,
    threads: int | None = None,
    null_ratio: float = 0.1,
    floor_offsets: Sequence[float] = (-0.3, -0.15, 0.15, 0.3),
    eigen_count: int = 12,
    norms: EnergyNorms | None = None,
) -> KernelReport:
    """Near-null vectors of the coupled matrix split into U- and xi-parts.

    null_vectors holds the xi-parts; interior_ratio is ||U||_H1 / ||xi||_H-1/2 per vector.
    """
    quad = quad or QuadratureSpec()
    ctx = SweepContext(
        boundary=boundary,
        interior=interior,
        material=material,
        quad=quad,
        norms=norms or EnergyNorms.for_mesh(boundary, quad, threads),
        h1_chol=cholesky_lower((assemble_stiffness(interior) + assemble_mass(interior)).toarray()),
        eigenvalues=np.zeros(0),
        traces=np.zeros((boundary.n_segments, 0)),
    )
    chol = ctx.coupled_chol()

    def coupled_at(kappa: float) -> np.ndarray:
        ops = ctx.operators(kappa, threads)
        return whiten(build_coupled(interior, material, ctx.wavenumber(kappa), ops).matrix, chol)

    def sigma_v(kappa: float) -> float:
        matrix, _, _ = _normalized(ctx.operators(kappa, threads), "V", ctx.norms)
        return float(svd(matrix).values[-1])

    floor = _floor(lambda kappa: smallest_singular(coupled_at(kappa))[0], kappa_star, floor_offsets)
    # 結合系の核は {0} x ker V なので V の極小で位置を決める
    located = _locate(sigma_v, kappa_star)
    result = svd(coupled_at(located))
    threshold = null_ratio * floor
    mask = result.values <= threshold
    whitened = result.right[:, mask]
    n_u = interior.n_vertices
    ratios = [
        float(np.linalg.norm(col[:n_u]) / max(np.linalg.norm(col[n_u:]), 1e-300)) for col in whitened.T
    ]
    xi = unwhiten(whitened, chol)[n_u:]
    weighted = ctx.norms.l2_weight(xi, "pc")
    if weighted.shape[1]:
        scale = np.linalg.norm(weighted, axis=0)
        xi = xi / scale
        weighted = weighted / scale

    reference = reference_traces(interior, boundary, located, "dirichlet", material.exterior, eigen_count)
    ref_weighted = _orthonormal(ctx.norms.l2_weight(reference.traces, "pc"))
    angles = _padded_angles(weighted, ref_weighted)
    logger.info(
        "coupled at kappa=%.6f: sigma_min=%.3e floor=%.3e -> %d near-null vector(s)",
        located,
        result.values[-1],
        floor,
        int(mask.sum()),
    )
    return KernelReport(
        kappa_star=located,
        operator="coupled",
        resonant=bool(mask.any()),
        null_vectors=xi,
        reference_space=ref_weighted,
        principal_angles=[float(a) for a in angles],
        singular_values=[float(v) for v in result.values[-4:][::-1]],
        floor=floor,
        threshold=threshold,
        reference_eigenvalues=list(reference.eigenvalues),
        target_eigenvalue=reference.target,
        interior_ratio=ratios,
    )


def kernel_overlap(first: KernelReport, second: KernelReport, norms: EnergyNorms, space: str = "pc") -> float:
    """Largest principal angle between two near-null spaces in the same trace space (pi/2 when the dimensions differ, NaN if either is empty)."""
    a = norms.l2_weight(first.null_vectors, space)
    b = norms.l2_weight(second.null_vectors, space)
    angles = _padded_angles(a, b)
    return float(angles.max()) if angles.size else math.nan



def kernel_annihilation(
    report: KernelReport, boundary: BoundaryMesh, r0: float, points: np.ndarray, quad: QuadratureSpec | None = None
) -> float:
    """Exterior single layer of the first near-null density over that of a constant of equal L2 norm."""
    if not report.resonant:
        raise ConfigError(f"{report.operator} has no near-null density at kappa={report.kappa_star:.6g}")
    k = Wavenumber(report.kappa_star, r0)
    spurious = report.null_vectors[:, 0]
    weight = np.sqrt(boundary.lengths)
    generic = np.ones(boundary.n_segments) * np.linalg.norm(weight * spurious) / np.linalg.norm(weight)
    spur_field = np.abs(eval_sl(boundary, k, spurious, points, spec=quad).values).max()
    generic_field = np.abs(eval_sl(boundary, k, generic, points, spec=quad).values).max()
    return float(spur_field / generic_field)
