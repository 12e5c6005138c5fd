"""Galerkin boundary integral operators and discrete Calderon projectors.

Sign conventions (gamma_n = -n . grad, outward n):

    SL(xi)(x) = -int G(x, y) xi(y) ds_y        DL(g)(x) = -int dG/dn_y g(y) ds_y

which give, in terms of the usual positive-kernel operators,

    V = -V_std   K = -K_std   K_adj = +K'_std   W = -D_std

so the interior projector is [[K + 1/2, V], [W, K_adj + 1/2]] and the
adjoint double layer matrix is the negative transpose of the double layer
matrix.  Dirichlet data live on nodal hats ("pl"), Neumann data on segment
indicators ("pc").
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import ConfigError, NumericalError
from .linalg import cholesky_lower, lu_solve, normalized_svd, svd
from .mesh import BoundaryMesh
from .models import TracePair
from .quadrature import (
    QuadratureSpec,
    integrate_node_segments,
    integrate_segment_pairs,
    scatter_tables,
)
from .specialfn import Wavenumber, greens_fn, greens_fn_grad, greens_log_split, hankel1_01

logger = logging.getLogger(__name__)

Side = Literal["interior", "exterior"]
Spectrum = Literal["dirichlet", "neumann"]
# Laplace 基準作用素の対数容量シフト (正定値性のため直径の 2 倍)
CAPACITY_FACTOR = 2.0
# 第一種方程式の相対残差の上限
RESIDUAL_BOUND = 1e-10


class AssemblyError(NumericalError):
    """Raised when boundary operators cannot be assembled."""


class ResonanceError(NumericalError):
    """Raised when an operator is singular to tolerance at a resonant wavenumber."""

    def __init__(self, kappa: float, spectrum: Spectrum, operator: str, indicator: float) -> None:
        super().__init__(
            f"{operator} is singular to tolerance at kappa={kappa:.10g} "
            f"({spectrum} resonance, normalized sigma_min={indicator:.3e})"
        )
        self.kappa = kappa
        self.spectrum = spectrum
        self.operator = operator
        self.indicator = indicator


# Kernels -----------------------------------------------------------------------
@dataclass(frozen=True)
class SingleLayerKernel:
    """G(x, y) = (i/4) H0(k |x - y|)."""

    k: float
    log_singular: bool = True

    def evaluate(self, x, y, nx, ny) -> np.ndarray:
        r = np.linalg.norm(x - y, axis=-1)
        h0, _ = hankel1_01(self.k * r)
        return 0.25j * h0

    def split(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return greens_log_split(self.k, r)


@dataclass(frozen=True)
class DoubleLayerKernel:
    """dG/dn_y = -(i k / 4) H1(k r) (y - x) . n_y / r."""

    k: float
    log_singular: bool = False

    def evaluate(self, x, y, nx, ny) -> np.ndarray:
        diff = x - y
        r = np.linalg.norm(diff, axis=-1)
        _, h1 = hankel1_01(self.k * r)
        return 0.25j * self.k * h1 * np.sum(diff * ny, axis=-1) / r

    def split(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True)
class AdjointDoubleLayerKernel:
    """dG/dn_x = -(i k / 4) H1(k r) (x - y) . n_x / r."""

    k: float
    log_singular: bool = False

    def evaluate(self, x, y, nx, ny) -> np.ndarray:
        diff = x - y
        r = np.linalg.norm(diff, axis=-1)
        _, h1 = hankel1_01(self.k * r)
        return -0.25j * self.k * h1 * np.sum(diff * nx, axis=-1) / r

    def split(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True)
class LaplaceKernel:
    """-(1/2pi) ln(r / scale); positive definite single layer when scale exceeds the capacity."""

    scale: float
    log_singular: bool = True

    def evaluate(self, x, y, nx, ny) -> np.ndarray:
        r = np.linalg.norm(x - y, axis=-1)
        return -(np.log(r) - math.log(self.scale)) / (2.0 * math.pi)

    def split(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r = np.asarray(r, dtype=float)
        a = np.full(r.shape, -1.0 / (2.0 * math.pi))
        b = np.full(r.shape, math.log(self.scale) / (2.0 * math.pi))
        return a, b


# Operator set ---------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class BoundaryOperatorSet:
    """Galerkin matrices of V, K, K_adj, W at one wavenumber.

    Duality pairings (rows = test space):
      v_mat pc/pc, k_mat pc x pl, kadj_mat pl x pc, w_mat pl/pl, mass_dn pl x pc.
    Same-space variants for L2-strong forms:
      v_dn pl x pc, k_dd pl/pl, kadj_nn pc/pc, w_nd pc x pl.
    """

    mesh: BoundaryMesh
    k: Wavenumber
    v_mat: np.ndarray
    k_mat: np.ndarray
    kadj_mat: np.ndarray
    w_mat: np.ndarray
    mass_dn: np.ndarray
    v_dn: np.ndarray
    k_dd: np.ndarray
    kadj_nn: np.ndarray
    w_nd: np.ndarray
    mass_dd: np.ndarray
    mass_nn: np.ndarray
    energy_minus: np.ndarray
    energy_plus: np.ndarray
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    def zeroed(self, *names: str) -> "BoundaryOperatorSet":
        """Copy with the named matrices replaced by zeros (structural tests)."""
        return replace(self, **{name: np.zeros_like(getattr(self, name)) for name in names})


def energy_grams(mesh: BoundaryMesh, quad: QuadratureSpec | None = None, threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Wavenumber-independent Gram matrices of H^{-1/2} (pc) and H^{1/2} (pl)."""
    tables = integrate_segment_pairs(mesh, LaplaceKernel(CAPACITY_FACTOR * mesh.diameter), quad, threads).real
    minus = scatter_tables(tables, mesh, trial="pc", test="pc")
    minus = 0.5 * (minus + minus.T)
    d = mesh.derivative_matrix()
    plus = d.T @ minus @ d + mesh.mass_dd()
    return minus, 0.5 * (plus + plus.T)


def assemble_operators(
    mesh: BoundaryMesh,
    k: Wavenumber,
    quad: QuadratureSpec | None = None,
    threads: int | None = None,
    grams: tuple[np.ndarray, np.ndarray] | None = None,
) -> BoundaryOperatorSet:
    quad = quad or QuadratureSpec()
    if not isinstance(k, Wavenumber):
        raise ConfigError("assemble_operators needs a Wavenumber")
    reach = k.k * mesh.diameter
    if reach > 50.0:
        raise ConfigError(f"kappa * sqrt(r0) * diam = {reach:.3f} is outside the supported range (<= 50)")

    single = integrate_segment_pairs(mesh, SingleLayerKernel(k.k), quad, threads)
    double = integrate_segment_pairs(mesh, DoubleLayerKernel(k.k), quad, threads)
    adjoint = integrate_segment_pairs(mesh, AdjointDoubleLayerKernel(k.k), quad, threads)

    v_std = scatter_tables(single, mesh, trial="pc", test="pc")
    v_mat = -v_std
    v_dn = -scatter_tables(single, mesh, trial="pc", test="pl")
    k_mat = -scatter_tables(double, mesh, trial="pl", test="pc")
    k_dd = -scatter_tables(double, mesh, trial="pl", test="pl")
    kadj_mat = scatter_tables(adjoint, mesh, trial="pc", test="pl")
    kadj_nn = scatter_tables(adjoint, mesh, trial="pc", test="pc")

    # Maue: <D u, v> = int int G u' v' - k^2 int int G (n_x . n_y) u v
    d = mesh.derivative_matrix()
    nn = mesh.normals @ mesh.normals.T
    weighted = single * nn[:, :, None, None]
    lam = k.lam
    w_mat = -(d.T @ v_std @ d) + lam * scatter_tables(weighted, mesh, trial="pl", test="pl")

    # 区分定数テスト版: 節点で評価した S(u') の差分 + k^2 項
    node_tables = integrate_node_segments(mesh, SingleLayerKernel(k.k), quad)
    z = node_tables.sum(axis=2)
    zd = z @ d
    starts = mesh.segments[:, 0]
    ends = mesh.segments[:, 1]
    w_nd = zd[ends] - zd[starts] + lam * scatter_tables(weighted, mesh, trial="pl", test="pc")

    minus, plus = grams if grams is not None else energy_grams(mesh, quad, threads)
    ops = BoundaryOperatorSet(
        mesh=mesh,
        k=k,
        v_mat=v_mat,
        k_mat=k_mat,
        kadj_mat=kadj_mat,
        w_mat=w_mat,
        mass_dn=mesh.mass_dn(),
        v_dn=v_dn,
        k_dd=k_dd,
        kadj_nn=kadj_nn,
        w_nd=w_nd,
        mass_dd=mesh.mass_dd(),
        mass_nn=mesh.mass_nn(),
        energy_minus=minus,
        energy_plus=plus,
        quad=quad,
    )
    for name in ("v_mat", "k_mat", "kadj_mat", "w_mat", "v_dn", "k_dd", "kadj_nn", "w_nd"):
        if not np.isfinite(getattr(ops, name)).all():
            raise AssemblyError(f"{name} has non-finite entries at kappa={k.kappa}")
    logger.debug("assembled boundary operators: N=%d kappa=%.6g", mesh.n_nodes, k.kappa)
    return ops


# Calderon projectors ---------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CalderonProjector:
    """Strong-form 2N x 2N projector acting on [dirichlet; neumann] coefficients."""

    side: Side
    blocks: np.ndarray
    n: int

    def apply(self, data: TracePair) -> TracePair:
        out = self.blocks @ data.stacked()
        return TracePair(out[: self.n], out[self.n :])


def calderon_projector(ops: BoundaryOperatorSet, side: Side) -> CalderonProjector:
    if side not in ("interior", "exterior"):
        raise ConfigError(f"side must be 'interior' or 'exterior', got {side!r}")
    n = ops.n
    try:
        top_left = np.linalg.solve(ops.mass_dd, ops.k_dd) + 0.5 * np.eye(n)
        top_right = np.linalg.solve(ops.mass_dd, ops.v_dn)
        bottom_left = ops.w_nd / np.diag(ops.mass_nn)[:, None]
        bottom_right = ops.kadj_nn / np.diag(ops.mass_nn)[:, None] + 0.5 * np.eye(n)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"boundary mass matrix is singular: {exc}") from exc
    interior = np.block([[top_left, top_right], [bottom_left, bottom_right]])
    if side == "interior":
        return CalderonProjector(side="interior", blocks=interior, n=n)
    return CalderonProjector(side="exterior", blocks=np.eye(2 * n) - interior, n=n)


def trace_weight(mesh: BoundaryMesh) -> np.ndarray:
    """W with ||W [g; eta]||_2 equal to the L2(Gamma) norm of the trace pair."""
    upper = cholesky_lower(mesh.mass_dd()).T
    n = mesh.n_nodes
    weight = np.zeros((2 * n, 2 * n))
    weight[:n, :n] = upper
    weight[n:, n:] = np.diag(np.sqrt(mesh.lengths))
    return weight


def trace_norm(mesh: BoundaryMesh, data: TracePair | np.ndarray) -> float:
    vector = data.stacked() if isinstance(data, TracePair) else np.asarray(data)
    return float(np.linalg.norm(trace_weight(mesh) @ vector))


def smooth_trace_probes(mesh: BoundaryMesh, max_mode: int) -> np.ndarray:
    """Fourier modes in arclength up to max_mode, as separate Dirichlet and Neumann columns."""
    perimeter = mesh.perimeter
    s_nodes = 2.0 * math.pi * mesh.arclength_nodes() / perimeter
    s_mid = 2.0 * math.pi * mesh.arclength_midpoints() / perimeter
    n = mesh.n_nodes
    columns = []
    for m in range(max_mode + 1):
        funcs = [np.cos] if m == 0 else [np.cos, np.sin]
        for func in funcs:
            dirichlet = np.zeros(2 * n, dtype=complex)
            dirichlet[:n] = func(m * s_nodes)
            neumann = np.zeros(2 * n, dtype=complex)
            neumann[n:] = func(m * s_mid)
            columns.extend([dirichlet, neumann])
    return np.stack(columns, axis=1)


def restricted_norm(operator: np.ndarray, mesh: BoundaryMesh, probes: np.ndarray) -> float:
    """||W A Z||_2 where Z spans the probes and W Z has orthonormal columns."""
    weight = trace_weight(mesh)
    q, r = np.linalg.qr(weight @ probes)
    basis = np.linalg.solve(r.T, probes.T).T
    return float(np.linalg.norm(weight @ operator @ basis, 2))


def idempotency_defect(projector: CalderonProjector, mesh: BoundaryMesh, max_mode: int = 2) -> float:
    """|| P^2 - P || measured on smooth trace data in the L2 trace norm."""
    p = projector.blocks
    return restricted_norm(p @ p - p, mesh, smooth_trace_probes(mesh, max_mode))


def duality_defect(ops: BoundaryOperatorSet) -> float:
    """Relative size of K_adj + K^T (zero for an exact discretization)."""
    return float(np.linalg.norm(ops.kadj_mat + ops.k_mat.T) / np.linalg.norm(ops.k_mat))


# Manufactured Cauchy data -------------------------------------------------------------
def cauchy_data_plane_wave(
    mesh: BoundaryMesh, k: Wavenumber, direction, amplitude: complex = 1.0
) -> TracePair:
    d = np.asarray(direction, dtype=float)
    if d.shape != (2,) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ConfigError("plane-wave direction must be a unit 2-vector")
    g = amplitude * np.exp(1j * k.k * (mesh.nodes @ d))
    u_mid = amplitude * np.exp(1j * k.k * (mesh.midpoints @ d))
    eta = -1j * k.k * (mesh.normals @ d) * u_mid
    return TracePair(g, eta)


def cauchy_data_point_source(mesh: BoundaryMesh, k: Wavenumber, source) -> TracePair:
    y0 = np.asarray(source, dtype=float)
    if not mesh.contains(y0[None, :])[0]:
        raise ConfigError(f"point source {tuple(y0)} is not inside the boundary")
    if mesh.distance(y0[None, :])[0] < mesh.h:
        raise ConfigError(f"point source {tuple(y0)} is closer than h to the boundary")
    g = greens_fn(k, np.linalg.norm(mesh.nodes - y0, axis=1))
    grad = greens_fn_grad(k, mesh.midpoints, y0)
    eta = -np.sum(mesh.normals * grad, axis=1)
    return TracePair(np.asarray(g, dtype=complex), eta)


# Resonance checks and first-kind equations ------------------------------------------------
def resonance_indicator(ops: BoundaryOperatorSet, spectrum: Spectrum) -> float:
    """Normalized smallest singular value of V (dirichlet) or K_adj + 1/2 (neumann)."""
    if spectrum == "dirichlet":
        chol = cholesky_lower(ops.energy_minus)
        return float(normalized_svd(ops.v_mat, chol).values[-1])
    if spectrum == "neumann":
        scale = 1.0 / np.sqrt(ops.mesh.lengths)
        matrix = scale[:, None] * (ops.kadj_nn + 0.5 * ops.mass_nn) * scale[None, :]
        return float(svd(matrix).values[-1])
    raise ConfigError(f"unknown spectrum {spectrum!r}")


def check_resonance(ops: BoundaryOperatorSet, spectrum: Spectrum, operator: str, tolerance: float) -> float:
    indicator = resonance_indicator(ops, spectrum)
    if indicator < tolerance:
        raise ResonanceError(ops.k.kappa, spectrum, operator, indicator)
    if indicator < 10.0 * tolerance:
        logger.warning(
            "%s is close to a %s resonance at kappa=%.6g (normalized sigma_min=%.3e)",
            operator,
            spectrum,
            ops.k.kappa,
            indicator,
        )
    return indicator


def solve_dirichlet_bie(
    ops: BoundaryOperatorSet, g: np.ndarray, resonance_tol: float = 5e-3, full_output: bool = False
) -> np.ndarray | tuple[np.ndarray, float]:
    """xi with <V xi, zeta> = -<(K + 1/2) g, zeta> for all pc zeta.

    With full_output the relative residual ||V xi - rhs|| / ||rhs|| is returned as well.
    """
    g = _checked(g, ops.n, "dirichlet data")
    check_resonance(ops, "dirichlet", "V", resonance_tol)
    rhs = -(ops.k_mat + 0.5 * ops.mass_dn.T) @ g
    xi = lu_solve(ops.v_mat, rhs)
    residual = _check_residual(ops.v_mat, xi, rhs, "V")
    return (xi, residual) if full_output else xi


def solve_neumann_bie(
    ops: BoundaryOperatorSet, eta: np.ndarray, resonance_tol: float = 5e-3, full_output: bool = False
) -> np.ndarray | tuple[np.ndarray, float]:
    """Dirichlet coefficients with <W u, v> = -<(K_adj + 1/2) eta, v> for all pl v."""
    eta = _checked(eta, ops.n, "neumann data")
    check_resonance(ops, "neumann", "W", resonance_tol)
    rhs = -(ops.kadj_mat + 0.5 * ops.mass_dn) @ eta
    u = lu_solve(ops.w_mat, rhs)
    residual = _check_residual(ops.w_mat, u, rhs, "W")
    return (u, residual) if full_output else u


def _checked(vector, n: int, label: str) -> np.ndarray:
    values = np.asarray(vector, dtype=complex)
    if values.shape != (n,):
        raise ConfigError(f"{label} must have length {n}, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise ConfigError(f"{label} has non-finite entries")
    return values


def _check_residual(matrix: np.ndarray, x: np.ndarray, rhs: np.ndarray, label: str) -> float:
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        return 0.0
    residual = float(np.linalg.norm(matrix @ x - rhs) / scale)
    if residual > RESIDUAL_BOUND:
        logger.warning("%s solve residual %.2e exceeds %.0e", label, residual, RESIDUAL_BOUND)
    return residual


# Export -----------------------------------------------------------------------------
def export_matrix(path: Path, matrix: np.ndarray, fmt: Literal["bin", "csv"] = "bin", config_hash: str | None = None) -> Path:
    """Binary: row-major little-endian (re, im) float64 pairs plus a JSON sidecar; CSV: row,col,re,im."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(matrix, dtype=complex)
    if fmt == "bin":
        pairs = np.empty(values.shape + (2,), dtype="<f8")
        pairs[..., 0] = values.real
        pairs[..., 1] = values.imag
        path.write_bytes(np.ascontiguousarray(pairs).tobytes(order="C"))
        sidecar = {"rows": values.shape[0], "cols": values.shape[1], "dtype": "<f8 pairs", "order": "row-major"}
        if config_hash:
            sidecar["config_hash"] = config_hash
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
        return path
    if fmt == "csv":
        rows, cols = np.indices(values.shape)
        lines = [f"# config_hash={config_hash}"] if config_hash else []
        lines.append("row,col,re,im")
        lines.extend(
            f"{i},{j},{re!r},{im!r}"
            for i, j, re, im in zip(rows.ravel(), cols.ravel(), values.real.ravel().tolist(), values.imag.ravel().tolist())
        )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path
    raise ConfigError(f"unknown matrix export format {fmt!r}")


def read_matrix(path: Path) -> np.ndarray:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
    raw = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(sidecar["rows"], sidecar["cols"], 2)
    return raw[..., 0] + 1j * raw[..., 1]
