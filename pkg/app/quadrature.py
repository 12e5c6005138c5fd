"""Quadrature rules and element-pair integration for piecewise-linear boundary elements.

Every boundary integral in the toolkit reduces to local tables

    I[e, f, a, b] = int_e int_f k(x, y) psi_a(s) psi_b(t) L_e L_f ds dt

with psi_0 = 1 - s, psi_1 = s on the parameter interval [0, 1].  Self pairs
of logarithmic kernels are integrated in the difference variable
u = |s - t| with a log-weighted Gauss rule, adjacent pairs with a Duffy
transform at the shared corner, everything else with tensor Gauss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NumericalError

logger = logging.getLogger(__name__)

MIN_POINTS = 2
MAX_POINTS = 64
# 行ブロック単位で並列化する (メモリ上限の目安)
POINTS_PER_CHUNK = 400_000


class QuadratureError(NumericalError):
    """Raised when a local integral is not finite."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None) -> None:
        super().__init__(message if pair is None else f"{message} (element pair {pair})")
        self.pair = pair


@dataclass(frozen=True)
class QuadratureSpec:
    """Point counts of the three rule families."""

    gauss_points: int = 8
    log_points: int = 8
    duffy_points: int = 8

    def __post_init__(self) -> None:
        for name in ("gauss_points", "log_points", "duffy_points"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise QuadratureError(f"{name} must be an integer, got {value!r}")
            if not MIN_POINTS <= value <= MAX_POINTS:
                raise QuadratureError(f"{name} must lie in [{MIN_POINTS}, {MAX_POINTS}], got {value}")

    def to_dict(self) -> dict[str, int]:
        return {
            "gauss_points": self.gauss_points,
            "log_points": self.log_points,
            "duffy_points": self.duffy_points,
        }


class PairKernel(Protocol):
    """A kernel k(x, y) that may carry a logarithmic singularity k = a(r) ln r + b(r)."""

    log_singular: bool

    def evaluate(self, x: np.ndarray, y: np.ndarray, nx: np.ndarray, ny: np.ndarray) -> np.ndarray: ...

    def split(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


# Rules ----------------------------------------------------------------------
def _readonly(*arrays: np.ndarray) -> tuple[np.ndarray, ...]:
    for array in arrays:
        array.setflags(write=False)
    return arrays


@lru_cache(maxsize=None)
def gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return _readonly(0.5 * (nodes + 1.0), 0.5 * weights)


@lru_cache(maxsize=None)
def log_gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for int_0^1 -ln(u) f(u) du.

    The recurrence coefficients come from a discretized Stieltjes procedure on
    a dyadically graded composite Gauss rule; nodes and weights then follow
    from the Jacobi matrix (Golub-Welsch).
    """
    base_x, base_w = np.polynomial.legendre.leggauss(24)
    xs = []
    ws = []
    for level in range(60):
        lo, hi = 2.0 ** (-level - 1), 2.0 ** (-level)
        x = lo + 0.5 * (base_x + 1.0) * (hi - lo)
        xs.append(x)
        ws.append(0.5 * (hi - lo) * base_w * -np.log(x))
    x = np.concatenate(xs)
    w = np.concatenate(ws)

    alpha = np.zeros(n)
    beta = np.zeros(n)
    p_prev = np.zeros_like(x)
    p_curr = np.ones_like(x)
    norm_prev = 1.0
    for k in range(n):
        norm = float(np.sum(w * p_curr * p_curr))
        alpha[k] = float(np.sum(w * x * p_curr * p_curr)) / norm
        beta[k] = norm if k == 0 else norm / norm_prev
        p_next = (x - alpha[k]) * p_curr - (beta[k] if k > 0 else 0.0) * p_prev
        p_prev, p_curr = p_curr, p_next
        norm_prev = norm

    nodes, vectors = eigh_tridiagonal(alpha, np.sqrt(beta[1:]))
    weights = beta[0] * vectors[0, :] ** 2
    return _readonly(nodes, weights)


def shape_values(s: np.ndarray) -> np.ndarray:
    """Local linear shape functions (1 - s, s) stacked on the last axis."""
    s = np.asarray(s, dtype=float)
    return np.stack([1.0 - s, s], axis=-1)


@lru_cache(maxsize=None)
def _self_overlap(log_points: int) -> np.ndarray:
    """P_ab(u) = int_0^{1-u} psi_a(t+u) psi_b(t) + psi_a(t) psi_b(t+u) dt at the log nodes."""
    u, _ = log_gauss01(log_points)
    g, gw = gauss_legendre01(3)
    span = 1.0 - u
    t = span[:, None] * g[None, :]
    first = shape_values(t + u[:, None])
    second = shape_values(t)
    table = np.einsum("q,qia,qib->qab", span, first * gw[None, :, None], second)
    table = table + np.einsum("q,qia,qib->qab", span, second * gw[None, :, None], first)
    return _readonly(table)[0]


# Pair classification ------------------------------------------------------------
def adjacent_pairs(mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(e, f, corner parameter on e, corner parameter on f) for every ordered adjacent pair."""
    n = mesh.n_segments
    e = np.arange(n)
    nxt = mesh.next_segment
    prv = mesh.prev_segment
    first = np.concatenate([e, e])
    second = np.concatenate([nxt, prv])
    corner_e = np.concatenate([np.ones(n), np.zeros(n)])
    corner_f = np.concatenate([np.zeros(n), np.ones(n)])
    return first, second, corner_e, corner_f


def _regular_mask(mesh, rows: np.ndarray) -> np.ndarray:
    n = mesh.n_segments
    mask = np.ones((rows.size, n), dtype=bool)
    local = np.arange(rows.size)
    mask[local, rows] = False
    mask[local, mesh.next_segment[rows]] = False
    mask[local, mesh.prev_segment[rows]] = False
    return mask


# Pair tables -----------------------------------------------------------------------
def _segment_points(mesh, seg: np.ndarray, s: np.ndarray) -> np.ndarray:
    start = mesh.starts[seg]
    delta = mesh.ends[seg] - start
    return start[..., None, :] + s[..., None] * delta[..., None, :]


def _regular_block(mesh, kernel: PairKernel, spec: QuadratureSpec, e: np.ndarray, f: np.ndarray) -> np.ndarray:
    s, w = gauss_legendre01(spec.gauss_points)
    weighted = shape_values(s) * w[:, None]
    x = _segment_points(mesh, e, np.broadcast_to(s, (e.size, s.size)))
    y = _segment_points(mesh, f, np.broadcast_to(s, (f.size, s.size)))
    values = kernel.evaluate(
        x[:, :, None, :],
        y[:, None, :, :],
        mesh.normals[e][:, None, None, :],
        mesh.normals[f][:, None, None, :],
    )
    scale = mesh.lengths[e] * mesh.lengths[f]
    return np.einsum("pij,ia,jb->pab", values, weighted, weighted) * scale[:, None, None]


def _self_block(mesh, kernel: PairKernel, spec: QuadratureSpec, e: np.ndarray) -> np.ndarray:
    length = mesh.lengths[e]
    s, w = gauss_legendre01(spec.gauss_points)
    weighted = shape_values(s) * w[:, None]
    gap = np.abs(s[:, None] - s[None, :])
    r = length[:, None, None] * gap[None, :, :]
    a, b = kernel.split(r)
    smooth = a * np.log(length)[:, None, None] + b
    table = np.einsum("pij,ia,jb->pab", smooth, weighted, weighted)

    u, wl = log_gauss01(spec.log_points)
    a_log, _ = kernel.split(length[:, None] * u[None, :])
    overlap = _self_overlap(spec.log_points)
    table = table - np.einsum("pq,q,qab->pab", a_log, wl, overlap)
    return table * (length * length)[:, None, None]


def _adjacent_block(
    mesh,
    kernel: PairKernel,
    spec: QuadratureSpec,
    e: np.ndarray,
    f: np.ndarray,
    corner_e: np.ndarray,
    corner_f: np.ndarray,
) -> np.ndarray:
    """Duffy transform at the shared corner; the ln(rho) factor goes to the log rule."""
    le = mesh.lengths[e]
    lf = mesh.lengths[f]
    corner = np.where(corner_e[:, None] > 0.5, mesh.ends[e], mesh.starts[e])
    dir_e = np.where(corner_e[:, None] > 0.5, -mesh.tangents[e], mesh.tangents[e])
    dir_f = np.where(corner_f[:, None] > 0.5, -mesh.tangents[f], mesh.tangents[f])
    ne = mesh.normals[e][:, None, :]
    nf = mesh.normals[f][:, None, :]

    g, gw = gauss_legendre01(spec.duffy_points)
    rho_g, v_g = np.meshgrid(g, g, indexing="ij")
    w_g = np.outer(gw, gw)
    rules = [(rho_g.ravel(), v_g.ravel(), w_g.ravel(), False)]
    if kernel.log_singular:
        ql, wl = log_gauss01(spec.log_points)
        rho_l, v_l = np.meshgrid(ql, g, indexing="ij")
        rules.append((rho_l.ravel(), v_l.ravel(), np.outer(wl, gw).ravel(), True))

    table = np.zeros((e.size, 2, 2), dtype=complex)
    for rho, v, weight, log_part in rules:
        for alpha, beta in ((rho, rho * v), (rho * v, rho)):
            x = corner[:, None, :] + (alpha[None, :, None] * le[:, None, None]) * dir_e[:, None, :]
            y = corner[:, None, :] + (beta[None, :, None] * lf[:, None, None]) * dir_f[:, None, :]
            s = corner_e[:, None] + (1.0 - 2.0 * corner_e[:, None]) * alpha[None, :]
            t = corner_f[:, None] + (1.0 - 2.0 * corner_f[:, None]) * beta[None, :]
            if kernel.log_singular:
                r = np.linalg.norm(x - y, axis=-1)
                a, b = kernel.split(r)
                if log_part:
                    integrand = -a
                else:
                    integrand = a * np.log(r / rho[None, :]) + b
            else:
                integrand = kernel.evaluate(x, y, ne, nf)
            integrand = integrand * (weight * rho)[None, :]
            table += np.einsum("pq,pqa,pqb->pab", integrand, shape_values(s), shape_values(t))
    return table * (le * lf)[:, None, None]


def integrate_segment_pairs(
    mesh,
    kernel: PairKernel,
    spec: QuadratureSpec | None = None,
    threads: int | None = None,
) -> np.ndarray:
    """Local tables I[e, f, a, b] for every ordered segment pair.

    Regular pairs are integrated in row chunks on the worker pool; each chunk
    writes a disjoint tile and tiles are scattered in chunk order, so the
    result does not depend on the thread count.
    """
    from .workers import parallel_map

    spec = spec or QuadratureSpec()
    n = mesh.n_segments
    tables = np.zeros((n, n, 2, 2), dtype=complex)

    rows_per_chunk = max(1, POINTS_PER_CHUNK // max(1, n * spec.gauss_points**2))
    chunks = [np.arange(lo, min(n, lo + rows_per_chunk)) for lo in range(0, n, rows_per_chunk)]

    def regular_chunk(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        local, cols = np.nonzero(_regular_mask(mesh, rows))
        e = rows[local]
        return e, cols, _regular_block(mesh, kernel, spec, e, cols)

    for e, f, block in parallel_map(regular_chunk, chunks, threads=threads):
        tables[e, f] = block

    if kernel.log_singular:
        diag = np.arange(n)
        tables[diag, diag] = _self_block(mesh, kernel, spec, diag)

    e, f, ce, cf = adjacent_pairs(mesh)
    tables[e, f] = _adjacent_block(mesh, kernel, spec, e, f, ce, cf)

    bad = ~np.isfinite(tables).all(axis=(2, 3))
    if bad.any():
        first = tuple(int(i) for i in np.argwhere(bad)[0])
        raise QuadratureError("non-finite local integral", pair=(first[0], first[1]))
    return tables


# Point to segment integrals -----------------------------------------------------------
def integrate_point_segments(
    points: np.ndarray,
    mesh,
    kernel: PairKernel,
    spec: QuadratureSpec | None = None,
    near_radius: float = 0.0,
) -> np.ndarray:
    """J[p, f, b] = int_f k(x_p, y) psi_b(t) L_f dt for off-boundary targets.

    Pairs closer than near_radius are recomputed with uniform sub-panels of
    length at most half the distance.
    """
    spec = spec or QuadratureSpec()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = mesh.n_segments
    s, w = gauss_legendre01(spec.gauss_points)
    weighted = shape_values(s) * w[:, None]
    segs = np.arange(n)
    y = _segment_points(mesh, segs, np.broadcast_to(s, (n, s.size)))
    zeros = np.zeros(2)
    out = np.empty((points.shape[0], n, 2), dtype=complex)

    block = max(1, POINTS_PER_CHUNK // max(1, n * spec.gauss_points))
    for lo in range(0, points.shape[0], block):
        x = points[lo : lo + block]
        values = kernel.evaluate(
            x[:, None, None, :], y[None, :, :, :], zeros, mesh.normals[None, :, None, :]
        )
        out[lo : lo + block] = np.einsum("pfi,ia->pfa", values, weighted) * mesh.lengths[None, :, None]

    if near_radius > 0.0:
        distance = segment_distances(points, mesh)
        for p, f in zip(*np.nonzero(distance < near_radius)):
            out[p, f] = _subdivided(points[p], mesh, int(f), kernel, spec, float(distance[p, f]))
    return out


def _subdivided(point: np.ndarray, mesh, f: int, kernel: PairKernel, spec: QuadratureSpec, distance: float) -> np.ndarray:
    length = float(mesh.lengths[f])
    panels = int(min(1024, max(1, np.ceil(2.0 * length / max(distance, 1e-12)))))
    s, w = gauss_legendre01(spec.gauss_points)
    offsets = np.arange(panels)[:, None]
    t = ((offsets + s[None, :]) / panels).ravel()
    weights = np.broadcast_to(w / panels, (panels, s.size)).ravel()
    y = mesh.starts[f] + t[:, None] * (mesh.ends[f] - mesh.starts[f])
    values = kernel.evaluate(point[None, :], y, np.zeros(2), mesh.normals[f][None, :])
    return np.einsum("i,ia->a", values * weights, shape_values(t)) * length


def integrate_node_segments(mesh, kernel: PairKernel, spec: QuadratureSpec | None = None) -> np.ndarray:
    """J[p, f, b] with the targets at the mesh nodes; endpoint singularities use the log rule."""
    if not kernel.log_singular:
        raise QuadratureError("node targets require a kernel with a logarithmic split")
    spec = spec or QuadratureSpec()
    n = mesh.n_segments
    starts_idx = mesh.segments[:, 0]
    ends_idx = mesh.segments[:, 1]
    nodes = mesh.nodes
    out = np.zeros((nodes.shape[0], n, 2), dtype=complex)

    s, w = gauss_legendre01(spec.gauss_points)
    weighted = shape_values(s) * w[:, None]
    y = _segment_points(mesh, np.arange(n), np.broadcast_to(s, (n, s.size)))
    r = np.linalg.norm(nodes[:, None, None, :] - y[None, :, :, :], axis=-1)
    touching = np.zeros((nodes.shape[0], n), dtype=bool)
    touching[starts_idx, np.arange(n)] = True
    touching[ends_idx, np.arange(n)] = True
    r_safe = np.where(touching[:, :, None], 1.0, r)
    a, b = kernel.split(r_safe)
    values = a * np.log(r_safe) + b
    out[:] = np.einsum("pfi,ia->pfa", values, weighted) * mesh.lengths[None, :, None]

    length = mesh.lengths
    u, wl = log_gauss01(spec.log_points)
    a_s, b_s = kernel.split(length[:, None] * s[None, :])
    a_l, _ = kernel.split(length[:, None] * u[None, :])
    # 端点から測った距離 u での積分 (psi は端点側で入れ替わる)
    near = np.einsum("fi,ia->fa", a_s * np.log(length)[:, None] + b_s, weighted)
    near -= np.einsum("fq,q,qa->fa", a_l, wl, shape_values(u))
    near *= length[:, None]
    segs = np.arange(n)
    out[starts_idx, segs] = near
    out[ends_idx, segs] = near[:, ::-1]
    if not np.isfinite(out).all():
        raise QuadratureError("non-finite node-to-segment integral")
    return out


def segment_distances(points: np.ndarray, mesh) -> np.ndarray:
    """Euclidean distance from every point to every segment, shape (P, N)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    start = mesh.starts[None, :, :]
    delta = (mesh.ends - mesh.starts)[None, :, :]
    rel = points[:, None, :] - start
    t = np.clip(np.einsum("pfk,pfk->pf", rel, np.broadcast_to(delta, rel.shape)) / (mesh.lengths**2)[None, :], 0.0, 1.0)
    closest = start + t[..., None] * delta
    return np.linalg.norm(points[:, None, :] - closest, axis=-1)


def scatter_tables(
    tables: np.ndarray,
    mesh,
    trial: str,
    test: str,
) -> np.ndarray:
    """Assemble a global Galerkin matrix from local tables.

    test / trial are "pc" (one unknown per segment) or "pl" (nodal hats).
    Rows follow the test space, columns the trial space.
    """
    n = mesh.n_segments
    nodes = mesh.segments
    e_idx, f_idx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    if test == "pc" and trial == "pc":
        return tables.sum(axis=(2, 3))
    if test == "pc" and trial == "pl":
        out = np.zeros((n, mesh.n_nodes), dtype=tables.dtype)
        values = tables.sum(axis=2)
        for b in range(2):
            np.add.at(out, (e_idx, nodes[f_idx, b]), values[:, :, b])
        return out
    if test == "pl" and trial == "pc":
        out = np.zeros((mesh.n_nodes, n), dtype=tables.dtype)
        values = tables.sum(axis=3)
        for a in range(2):
            np.add.at(out, (nodes[e_idx, a], f_idx), values[:, :, a])
        return out
    if test == "pl" and trial == "pl":
        out = np.zeros((mesh.n_nodes, mesh.n_nodes), dtype=tables.dtype)
        for a in range(2):
            for b in range(2):
                np.add.at(out, (nodes[e_idx, a], nodes[f_idx, b]), tables[:, :, a, b])
        return out
    raise QuadratureError(f"unknown space pairing test={test!r} trial={trial!r}")
