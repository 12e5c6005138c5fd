"""Boundary loops and conforming triangulations of 2D domains.

Conventions: boundary loops run counterclockwise and the outward normal is
the tangent rotated clockwise, n = (t_y, -t_x).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.path import Path as PolygonPath
from scipy.spatial import Delaunay

from .errors import NumericalError

logger = logging.getLogger(__name__)

GEOMETRY_TOL = 1e-12
MIN_TRIANGLE_AREA = 1e-14


class MeshError(NumericalError, ValueError):
    """Raised when a mesh violates its invariants or cannot be generated."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _shoelace(points: np.ndarray) -> float:
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Closed polygonal boundary with one segment per node."""

    nodes: np.ndarray
    segments: np.ndarray
    tangents: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    lengths: np.ndarray = field(init=False, repr=False)
    next_segment: np.ndarray = field(init=False, repr=False)
    prev_segment: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=float)
        segments = np.array(self.segments, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 3:
            raise MeshError("boundary needs at least 3 nodes given as an (N, 2) array")
        if not np.isfinite(nodes).all():
            raise MeshError("boundary nodes must be finite")
        n = nodes.shape[0]
        if segments.shape != (n, 2):
            raise MeshError(f"expected {n} segments of two node indices, got shape {segments.shape}")
        if segments.min() < 0 or segments.max() >= n:
            raise MeshError("segment refers to a missing node")

        starts = segments[:, 0]
        ends = segments[:, 1]
        if np.unique(starts).size != n or np.unique(ends).size != n:
            raise MeshError("every node must start exactly one segment and end exactly one segment")
        by_start = np.empty(n, dtype=np.int64)
        by_start[starts] = np.arange(n)
        next_segment = by_start[ends]
        by_end = np.empty(n, dtype=np.int64)
        by_end[ends] = np.arange(n)
        prev_segment = by_end[starts]

        order = [0]
        while len(order) <= n:
            following = int(next_segment[order[-1]])
            if following == 0:
                break
            order.append(following)
        if len(order) != n:
            raise MeshError("segments do not form a single closed loop")

        delta = nodes[ends] - nodes[starts]
        lengths = np.linalg.norm(delta, axis=1)
        if np.any(lengths <= GEOMETRY_TOL):
            raise MeshError("zero-length boundary segment")
        tangents = delta / lengths[:, None]
        normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)

        loop = nodes[starts[np.array(order)]]
        if _shoelace(loop) <= 0.0:
            raise MeshError("boundary loop must be counterclockwise")
        _check_simple(nodes[starts], nodes[ends], next_segment, prev_segment)

        object.__setattr__(self, "nodes", _frozen(nodes))
        object.__setattr__(self, "segments", _frozen(segments))
        object.__setattr__(self, "tangents", _frozen(tangents))
        object.__setattr__(self, "normals", _frozen(normals))
        object.__setattr__(self, "lengths", _frozen(lengths))
        object.__setattr__(self, "next_segment", _frozen(next_segment))
        object.__setattr__(self, "prev_segment", _frozen(prev_segment))

    # Geometry -----------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_segments(self) -> int:
        return int(self.segments.shape[0])

    @property
    def starts(self) -> np.ndarray:
        return self.nodes[self.segments[:, 0]]

    @property
    def ends(self) -> np.ndarray:
        return self.nodes[self.segments[:, 1]]

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.starts + self.ends)

    @property
    def h(self) -> float:
        return float(self.lengths.max())

    @property
    def perimeter(self) -> float:
        return float(self.lengths.sum())

    @property
    def signed_area(self) -> float:
        return _shoelace(self.nodes[self.segments[self.loop_order(), 0]])

    @property
    def diameter(self) -> float:
        diff = self.nodes[:, None, :] - self.nodes[None, :, :]
        return float(np.sqrt((diff**2).sum(axis=-1)).max())

    def loop_order(self) -> np.ndarray:
        """Segment indices in traversal order starting from segment 0."""
        order = np.empty(self.n_segments, dtype=np.int64)
        current = 0
        for i in range(self.n_segments):
            order[i] = current
            current = int(self.next_segment[current])
        return order

    def arclength_nodes(self) -> np.ndarray:
        """Arclength position of every node, measured along the loop from the start of segment 0."""
        order = self.loop_order()
        positions = np.empty(self.n_nodes)
        cumulative = np.concatenate([[0.0], np.cumsum(self.lengths[order])[:-1]])
        positions[self.segments[order, 0]] = cumulative
        return positions

    def arclength_midpoints(self) -> np.ndarray:
        return self.arclength_nodes()[self.segments[:, 0]] + 0.5 * self.lengths

    def contains(self, points: np.ndarray) -> np.ndarray:
        polygon = PolygonPath(self.nodes[self.segments[self.loop_order(), 0]])
        return polygon.contains_points(np.atleast_2d(points))

    def distance(self, points: np.ndarray) -> np.ndarray:
        from .quadrature import segment_distances

        return segment_distances(points, self).min(axis=1)

    def mass_dd(self) -> np.ndarray:
        """Gram matrix of the nodal hat functions."""
        mass = np.zeros((self.n_nodes, self.n_nodes))
        local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        for a in range(2):
            for b in range(2):
                np.add.at(mass, (self.segments[:, a], self.segments[:, b]), local[a, b] * self.lengths)
        return mass

    def mass_dn(self) -> np.ndarray:
        """Pairing of segment indicators (columns) with nodal hats (rows)."""
        mass = np.zeros((self.n_nodes, self.n_segments))
        segs = np.arange(self.n_segments)
        for a in range(2):
            np.add.at(mass, (self.segments[:, a], segs), 0.5 * self.lengths)
        return mass

    def mass_nn(self) -> np.ndarray:
        return np.diag(self.lengths)

    def derivative_matrix(self) -> np.ndarray:
        """Arclength derivative of nodal hats: D[f, j] = d phi_j / ds on segment f."""
        d = np.zeros((self.n_segments, self.n_nodes))
        segs = np.arange(self.n_segments)
        d[segs, self.segments[:, 0]] -= 1.0 / self.lengths
        d[segs, self.segments[:, 1]] += 1.0 / self.lengths
        return d

    def same_as(self, other: "BoundaryMesh") -> bool:
        return (
            self.nodes.shape == other.nodes.shape
            and np.array_equal(self.segments, other.segments)
            and np.allclose(self.nodes, other.nodes, rtol=0.0, atol=GEOMETRY_TOL)
        )


def _check_simple(p: np.ndarray, q: np.ndarray, nxt: np.ndarray, prv: np.ndarray) -> None:
    """Reject loops in which two non-adjacent segments intersect."""
    n = p.shape[0]
    if n <= 3:
        return
    block = max(1, 2_000_000 // n)
    for lo in range(0, n, block):
        rows = np.arange(lo, min(n, lo + block))
        a = p[rows][:, None, :]
        b = q[rows][:, None, :]
        c = p[None, :, :]
        d = q[None, :, :]

        def orient(u, v, w):
            return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

        o1 = orient(a, b, c)
        o2 = orient(a, b, d)
        o3 = orient(c, d, a)
        o4 = orient(c, d, b)
        crossing = (o1 * o2 < 0.0) & (o3 * o4 < 0.0)
        local = np.arange(rows.size)
        crossing[local, rows] = False
        crossing[local, nxt[rows]] = False
        crossing[local, prv[rows]] = False
        if crossing.any():
            i, j = np.argwhere(crossing)[0]
            raise MeshError(f"boundary is not simple: segments {rows[i]} and {j} intersect")


def _closed_loop(points: np.ndarray) -> BoundaryMesh:
    n = points.shape[0]
    segments = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    return BoundaryMesh(points, segments)


def circle_boundary(radius: float, n_segments: int) -> BoundaryMesh:
    if not (math.isfinite(radius) and radius > 0.0):
        raise MeshError(f"radius must be positive and finite, got {radius!r}")
    if n_segments < 3:
        raise MeshError(f"a circle needs at least 3 segments, got {n_segments}")
    t = 2.0 * math.pi * np.arange(n_segments) / n_segments
    return _closed_loop(radius * np.stack([np.cos(t), np.sin(t)], axis=1))


def kite_boundary(n_segments: int) -> BoundaryMesh:
    """Kite curve (cos t + 0.65 cos 2t - 0.65, 1.5 sin t) sampled uniformly in t."""
    if n_segments < 8:
        raise MeshError(f"the kite needs at least 8 segments, got {n_segments}")
    t = 2.0 * math.pi * np.arange(n_segments) / n_segments
    x = np.cos(t) + 0.65 * np.cos(2.0 * t) - 0.65
    y = 1.5 * np.sin(t)
    return _closed_loop(np.stack([x, y], axis=1))


@dataclass(frozen=True, eq=False)
class InteriorMesh:
    """Conforming P1 triangulation whose boundary edges are the segments of a BoundaryMesh.

    boundary_trace_map[i] is the vertex index of boundary node i;
    boundary_segments holds the boundary loop in boundary-node indices.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_trace_map: np.ndarray
    boundary_segments: np.ndarray | None = None
    boundary: BoundaryMesh = field(init=False, repr=False)

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=float)
        triangles = np.array(self.triangles, dtype=np.int64)
        trace = np.array(self.boundary_trace_map, dtype=np.int64)
        n_b = trace.size
        if self.boundary_segments is None:
            segments = np.stack([np.arange(n_b), (np.arange(n_b) + 1) % n_b], axis=1)
        else:
            segments = np.array(self.boundary_segments, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (V, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] == 0:
            raise MeshError("triangles must be a non-empty (T, 3) array")
        if triangles.min() < 0 or triangles.max() >= vertices.shape[0]:
            raise MeshError("triangle refers to a missing vertex")
        if trace.min() < 0 or trace.max() >= vertices.shape[0] or np.unique(trace).size != n_b:
            raise MeshError("boundary_trace_map must be an injection into the vertices")

        areas = _signed_areas(vertices, triangles)
        if np.any(areas <= MIN_TRIANGLE_AREA):
            bad = int(np.flatnonzero(areas <= MIN_TRIANGLE_AREA)[0])
            raise MeshError(f"triangle {bad} is degenerate or negatively oriented (area {areas[bad]:.3e})")

        edges, counts = _edge_counts(triangles)
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        boundary_edges = {tuple(edge) for edge in edges[counts == 1]}
        expected = {tuple(sorted((int(trace[a]), int(trace[b])))) for a, b in segments}
        if boundary_edges != expected:
            raise MeshError(
                f"triangulation boundary ({len(boundary_edges)} edges) does not match the boundary loop "
                f"({len(expected)} segments)"
            )

        boundary = BoundaryMesh(vertices[trace], segments)
        object.__setattr__(self, "vertices", _frozen(vertices))
        object.__setattr__(self, "triangles", _frozen(triangles))
        object.__setattr__(self, "boundary_trace_map", _frozen(trace))
        object.__setattr__(self, "boundary_segments", _frozen(segments))
        object.__setattr__(self, "boundary", boundary)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def diameters(self) -> np.ndarray:
        corners = self.vertices[self.triangles]
        sides = corners - np.roll(corners, -1, axis=1)
        return np.linalg.norm(sides, axis=2).max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_trace_map] = False
        return np.flatnonzero(mask)


def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _edge_counts(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    edges.sort(axis=1)
    return np.unique(edges, axis=0, return_counts=True)


def disk_triangulation(boundary: BoundaryMesh, target_h: float) -> InteriorMesh:
    """Triangulate the polygon bounded by ``boundary`` with interior spacing about target_h.

    Interior points sit on a hexagonal lattice and are kept away from the
    boundary by more than half the longest segment, so every boundary segment
    is a Delaunay edge.
    """
    if not (math.isfinite(target_h) and target_h > 0.0):
        raise MeshError(f"target_h must be positive and finite, got {target_h!r}")
    longest = boundary.h
    if longest > 2.0 * target_h:
        logger.warning(
            "boundary segments (%.4f) are longer than 2 * target_h (%.4f); triangle sizes follow the boundary",
            longest,
            2.0 * target_h,
        )
    margin = max(0.55 * longest, 0.5 * target_h)

    lo = boundary.nodes.min(axis=0)
    hi = boundary.nodes.max(axis=0)
    dy = target_h * math.sqrt(3.0) / 2.0
    rows = np.arange(int(math.ceil((hi[1] - lo[1]) / dy)) + 1)
    cols = np.arange(int(math.ceil((hi[0] - lo[0]) / target_h)) + 2)
    jj, ii = np.meshgrid(rows, cols, indexing="ij")
    lattice = np.stack(
        [lo[0] + target_h * (ii + 0.5 * (jj % 2)), lo[1] + dy * jj], axis=-1
    ).reshape(-1, 2)
    inside = boundary.contains(lattice)
    lattice = lattice[inside]
    if lattice.size:
        lattice = lattice[boundary.distance(lattice) >= margin]

    points = np.vstack([boundary.nodes, lattice]) if lattice.size else boundary.nodes.copy()
    try:
        triangulation = Delaunay(points)
    except Exception as exc:
        raise MeshError(f"Delaunay triangulation failed: {exc}") from exc

    simplices = triangulation.simplices.astype(np.int64)
    centroids = points[simplices].mean(axis=1)
    simplices = simplices[boundary.contains(centroids)]
    areas = _signed_areas(points, simplices)
    flip = areas < 0.0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    simplices = simplices[np.abs(areas) > MIN_TRIANGLE_AREA]

    used = np.zeros(points.shape[0], dtype=bool)
    used[simplices.ravel()] = True
    if not used[: boundary.n_nodes].all():
        raise MeshError("mesh generation could not conform to the boundary loop (isolated boundary node)")
    remap = -np.ones(points.shape[0], dtype=np.int64)
    remap[used] = np.arange(int(used.sum()))

    try:
        mesh = InteriorMesh(
            vertices=points[used],
            triangles=remap[simplices],
            boundary_trace_map=remap[: boundary.n_nodes],
            boundary_segments=boundary.segments,
        )
    except MeshError as exc:
        raise MeshError(f"mesh generation could not conform to the boundary loop: {exc}") from exc
    if longest <= 2.0 * target_h and mesh.h > 3.0 * target_h:
        raise MeshError(f"triangle diameter {mesh.h:.4f} exceeds 3 * target_h")
    logger.info("triangulated %d vertices / %d triangles", mesh.n_vertices, mesh.n_triangles)
    return mesh


def refine(mesh: InteriorMesh) -> InteriorMesh:
    """Uniform red refinement: every triangle is split into four by its edge midpoints."""
    tris = mesh.triangles
    local_edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    local_edges.sort(axis=1)
    edges, inverse = np.unique(local_edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(3, -1)
    n_v = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    m01 = n_v + inverse[0]
    m12 = n_v + inverse[1]
    m20 = n_v + inverse[2]
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    triangles = np.concatenate(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([m01, b, m12], axis=1),
            np.stack([m20, m12, c], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )

    edge_index = {(int(p), int(q)): i for i, (p, q) in enumerate(edges)}
    boundary = mesh.boundary
    trace = mesh.boundary_trace_map
    new_trace = []
    for seg in boundary.loop_order():
        start = int(trace[boundary.segments[seg, 0]])
        end = int(trace[boundary.segments[seg, 1]])
        new_trace.append(start)
        new_trace.append(n_v + edge_index[(min(start, end), max(start, end))])
    return InteriorMesh(vertices, triangles, np.array(new_trace, dtype=np.int64))


# Text format -------------------------------------------------------------------
def write_mesh(path: Path, mesh: InteriorMesh | BoundaryMesh) -> Path:
    """Write ``nodes N triangles M segments K`` followed by coordinates and connectivity."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(mesh, InteriorMesh):
        coords = mesh.vertices
        triangles = mesh.triangles
        order = mesh.boundary.loop_order()
        segments = mesh.boundary_trace_map[mesh.boundary_segments[order]]
    else:
        coords = mesh.nodes
        triangles = np.zeros((0, 3), dtype=np.int64)
        segments = mesh.segments[mesh.loop_order()]
    lines = [f"nodes {coords.shape[0]} triangles {triangles.shape[0]} segments {segments.shape[0]}"]
    lines.extend(f"{x!r} {y!r}" for x, y in coords.tolist())
    lines.extend(f"{a} {b} {c}" for a, b, c in triangles.tolist())
    lines.extend(f"{a} {b}" for a, b in segments.tolist())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_mesh(path: Path) -> InteriorMesh | BoundaryMesh:
    lines = [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise MeshError(f"{path} is empty")
    header = lines[0]
    if len(header) != 6 or header[0::2] != ["nodes", "triangles", "segments"]:
        raise MeshError(f"{path}: malformed header {' '.join(header)!r}")
    try:
        n, m, k = (int(value) for value in header[1::2])
        body = lines[1:]
        if len(body) != n + m + k:
            raise MeshError(f"{path}: expected {n + m + k} body lines, found {len(body)}")
        coords = np.array([[float(v) for v in row] for row in body[:n]])
        triangles = np.array([[int(v) for v in row] for row in body[n : n + m]], dtype=np.int64)
        segments = np.array([[int(v) for v in row] for row in body[n + m :]], dtype=np.int64)
    except ValueError as exc:
        raise MeshError(f"{path}: {exc}") from exc
    if m == 0:
        return BoundaryMesh(coords, segments)
    if np.any(segments[:, 1] != np.roll(segments[:, 0], -1)):
        raise MeshError(f"{path}: boundary segments must be listed in loop order")
    return InteriorMesh(coords, triangles, segments[:, 0])
