"""Conforming triangle meshes with newest-vertex-bisection refinement."""

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from matplotlib.tri import Triangulation, TrapezoidMapTriFinder
from numpy.typing import ArrayLike, NDArray
from scipy import sparse

from afem.core.constants import BoundaryLabel, RefinementMode, Segment, Tolerances
from afem.core.geometry import SEGMENT_ORDER, classify_points
from afem.exceptions import MeshError, PointLocationError, ValidationError
from afem.models.problem import BoundaryPartition

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]

INTERIOR = BoundaryLabel.INTERIOR.code


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with an explicit edge table.

    Local edge ``i`` of a triangle is the edge opposite its local vertex ``i``;
    ``ref_edges`` holds the local index of each triangle's refinement edge.
    """

    vertices: FloatArray
    triangles: IntArray
    ref_edges: IntArray
    sigma: FloatArray
    edges: IntArray
    edge_triangles: IntArray
    triangle_edges: IntArray
    edge_labels: IntArray
    edge_segments: IntArray
    generation: int = 0
    parent_vertex_count: int | None = None
    vertex_parents: IntArray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def signed_areas(self) -> FloatArray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self) -> FloatArray:
        return np.abs(self.signed_areas)

    @cached_property
    def h(self) -> FloatArray:
        """Element size h_T = |T|^(1/2)."""
        return np.sqrt(self.areas)

    @cached_property
    def edge_lengths(self) -> FloatArray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def gradients(self) -> FloatArray:
        """Gradients of the barycentric basis, shape (nt, 3, 2)."""
        p = self.vertices[self.triangles]
        twice_area = 2.0 * self.signed_areas
        grads = np.empty((self.n_triangles, 3, 2))
        for i in range(3):
            a = p[:, (i + 1) % 3]
            b = p[:, (i + 2) % 3]
            grads[:, i, 0] = (a[:, 1] - b[:, 1]) / twice_area
            grads[:, i, 1] = (b[:, 0] - a[:, 0]) / twice_area
        return grads

    @property
    def boundary_edges(self) -> IntArray:
        return np.flatnonzero(self.edge_triangles[:, 1] < 0)

    def edges_with_label(self, label: BoundaryLabel) -> IntArray:
        return np.flatnonzero(self.edge_labels == label.code)

    @cached_property
    def vertex_triangles(self) -> sparse.csr_matrix:
        """Vertex-to-triangle incidence, rows sorted by triangle id."""
        nt = self.n_triangles
        rows = self.triangles.ravel()
        cols = np.repeat(np.arange(nt), 3)
        incidence = sparse.csr_matrix(
            (np.ones(3 * nt, dtype=np.int8), (rows, cols)), shape=(self.n_vertices, nt)
        )
        incidence.sort_indices()
        return incidence

    @cached_property
    def trifinder(self) -> TrapezoidMapTriFinder:
        triangulation = Triangulation(self.vertices[:, 0], self.vertices[:, 1], self.triangles)
        return TrapezoidMapTriFinder(triangulation)

    @classmethod
    def from_arrays(
        cls,
        vertices: ArrayLike,
        triangles: ArrayLike,
        ref_edges: ArrayLike | None = None,
        sigma: ArrayLike | float = 1.0,
        boundary_labels: dict[tuple[int, int], BoundaryLabel] | None = None,
        partition: BoundaryPartition | None = None,
        generation: int = 0,
    ) -> "Mesh":
        """Build a mesh and its edge table from raw arrays.

        Boundary edges take their label from ``boundary_labels`` (keyed by sorted vertex pair),
        else from ``partition`` applied to the L-shape segment they lie on, else Gamma0.
        Without ``ref_edges`` the longest edge of every triangle becomes its refinement edge.
        """
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(vertices)):
            raise MeshError("Vertex coordinates must be finite")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError("Triangle references a missing vertex")

        if ref_edges is None:
            ref_edges = _longest_edges(vertices, triangles)
        ref_edges = np.asarray(ref_edges, dtype=np.int64).reshape(-1)
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (len(triangles),)).copy()

        edges, edge_triangles, triangle_edges = _edge_table(triangles, len(vertices))
        labels, segments = _label_edges(vertices, edges, edge_triangles, boundary_labels, partition)
        return cls(
            vertices=vertices,
            triangles=triangles,
            ref_edges=ref_edges,
            sigma=sigma,
            edges=edges,
            edge_triangles=edge_triangles,
            triangle_edges=triangle_edges,
            edge_labels=labels,
            edge_segments=segments,
            generation=generation,
        )


def _longest_edges(vertices: FloatArray, triangles: IntArray) -> IntArray:
    p = vertices[triangles]
    lengths = np.stack(
        [np.linalg.norm(p[:, (i + 2) % 3] - p[:, (i + 1) % 3], axis=1) for i in range(3)],
        axis=1,
    )
    return np.argmax(lengths, axis=1).astype(np.int64)


def _edge_keys(pairs: IntArray, n_vertices: int) -> IntArray:
    lo = np.minimum(pairs[..., 0], pairs[..., 1])
    hi = np.maximum(pairs[..., 0], pairs[..., 1])
    return lo * n_vertices + hi


def _edge_table(triangles: IntArray, n_vertices: int) -> tuple[IntArray, IntArray, IntArray]:
    nt = len(triangles)
    local = np.stack([triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1)
    keys = _edge_keys(local.reshape(-1, 2), n_vertices)
    unique_keys, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).reshape(-1)

    edges = np.stack([unique_keys // n_vertices, unique_keys % n_vertices], axis=1)
    owner = np.repeat(np.arange(nt, dtype=np.int64), 3)
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_triangles[:, 0] = owner[order[starts]]
    shared = counts >= 2
    edge_triangles[shared, 1] = owner[order[starts[shared] + 1]]
    if np.any(counts > 2):
        logger.warning(f"{int(np.sum(counts > 2))} edges are shared by more than two triangles")

    return edges, edge_triangles, inverse.reshape(nt, 3).astype(np.int64)


def _label_edges(
    vertices: FloatArray,
    edges: IntArray,
    edge_triangles: IntArray,
    boundary_labels: dict[tuple[int, int], BoundaryLabel] | None,
    partition: BoundaryPartition | None,
) -> tuple[IntArray, IntArray]:
    labels = np.full(len(edges), INTERIOR, dtype=np.int64)
    segments = np.full(len(edges), -1, dtype=np.int64)
    boundary = np.flatnonzero(edge_triangles[:, 1] < 0)
    if boundary.size == 0:
        return labels, segments

    midpoints = 0.5 * (vertices[edges[boundary, 0]] + vertices[edges[boundary, 1]])
    segments[boundary] = classify_points(midpoints)
    labels[boundary] = BoundaryLabel.GAMMA0.code
    if partition is not None:
        for code, segment in enumerate(SEGMENT_ORDER):
            labels[boundary[segments[boundary] == code]] = partition.label_for(segment).code
    if boundary_labels:
        for e in boundary:
            label = boundary_labels.get((int(edges[e, 0]), int(edges[e, 1])))
            if label is not None:
                labels[e] = label.code
    return labels, segments


def build_lshape_initial(
    h: float,
    partition: BoundaryPartition | None = None,
    sigma: float = 1.0,
) -> Mesh:
    """Uniform right-triangle mesh of the L-shaped domain.

    Every h x h square is cut along its (lower-left, upper-right) diagonal, which is
    the refinement edge of both halves.

    Args:
        h: Mesh size; 1/h must be an integer
        partition: Boundary partition for the edge labels (defaults to cathode on the left side)
        sigma: Conductivity on every element

    Returns:
        Generation-0 mesh

    Raises:
        ValidationError: If h does not divide 1
    """
    if not h > 0:
        raise ValidationError("h", h, "Mesh size must be positive")
    n = round(1.0 / h)
    if n < 1 or abs(n * h - 1.0) > 1e-9:
        raise ValidationError("h", h, f"Mesh size {h} does not divide 1 evenly")

    if partition is None:
        partition = BoundaryPartition(gamma_c=frozenset({Segment.LEFT}))

    m = 2 * n + 1
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="xy")
    keep = ~((i > n) & (j < n))
    index = np.full((m, m), -1, dtype=np.int64)  # index[j, i]
    index[keep] = np.arange(int(keep.sum()))
    coords = np.linspace(-1.0, 1.0, m)
    vertices = np.stack([coords[i[keep]], coords[j[keep]]], axis=1)

    si, sj = np.meshgrid(np.arange(m - 1), np.arange(m - 1), indexing="xy")
    square = ~((si >= n) & (sj < n))
    si, sj = si[square], sj[square]
    ll = index[sj, si]
    lr = index[sj, si + 1]
    ur = index[sj + 1, si + 1]
    ul = index[sj + 1, si]

    triangles = np.empty((2 * len(ll), 3), dtype=np.int64)
    triangles[0::2] = np.stack([ll, lr, ur], axis=1)
    triangles[1::2] = np.stack([ll, ur, ul], axis=1)
    ref_edges = np.tile(np.array([1, 2], dtype=np.int64), len(ll))

    mesh = Mesh.from_arrays(vertices, triangles, ref_edges=ref_edges, sigma=sigma, partition=partition)
    logger.info(f"Built L-shape mesh h={h}: {mesh.n_triangles} triangles, {mesh.n_vertices} vertices")
    return mesh


def refine(
    mesh: Mesh,
    marked: Iterable[int] | IntArray,
    mode: RefinementMode = RefinementMode.ALL_EDGES,
) -> Mesh:
    """Newest-vertex bisection of the marked triangles plus conforming closure.

    Args:
        mesh: Mesh to refine
        marked: Triangle ids to refine
        mode: Bisect all three edges (4 children) or the refinement edge only

    Returns:
        Refined mesh one generation newer; the input itself when nothing is marked
    """
    if isinstance(marked, np.ndarray):
        marked = np.unique(marked.astype(np.int64))
    else:
        marked = np.unique(np.fromiter(marked, dtype=np.int64))
    if marked.size == 0:
        return mesh
    if marked[0] < 0 or marked[-1] >= mesh.n_triangles:
        raise MeshError("Marked set contains ids outside the mesh", {"n_triangles": mesh.n_triangles})

    nt = mesh.n_triangles
    rows = np.arange(nt)
    ref_edge_ids = mesh.triangle_edges[rows, mesh.ref_edges]

    edge_marks = np.zeros(mesh.n_edges, dtype=bool)
    if mode == RefinementMode.ALL_EDGES:
        edge_marks[mesh.triangle_edges[marked].ravel()] = True
    else:
        edge_marks[ref_edge_ids[marked]] = True

    closure_rounds = 0
    while True:
        pending = edge_marks[mesh.triangle_edges].any(axis=1) & ~edge_marks[ref_edge_ids]
        if not pending.any():
            break
        edge_marks[ref_edge_ids[pending]] = True
        closure_rounds += 1

    split_edges = np.flatnonzero(edge_marks)
    nv = mesh.n_vertices
    midpoint = np.full(mesh.n_edges, -1, dtype=np.int64)
    midpoint[split_edges] = nv + np.arange(len(split_edges))
    vertex_parents = mesh.edges[split_edges]
    midpoints = 0.5 * (mesh.vertices[vertex_parents[:, 0]] + mesh.vertices[vertex_parents[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    # Rotate every triangle to (apex, p, q) with refinement edge p-q
    r = mesh.ref_edges
    apex = mesh.triangles[rows, r]
    p = mesh.triangles[rows, (r + 1) % 3]
    q = mesh.triangles[rows, (r + 2) % 3]
    e_pq = ref_edge_ids
    e_qa = mesh.triangle_edges[rows, (r + 1) % 3]
    e_ap = mesh.triangle_edges[rows, (r + 2) % 3]

    bisected = edge_marks[e_pq]
    m = midpoint[e_pq]
    split_ap = bisected & edge_marks[e_ap]
    split_qa = bisected & edge_marks[e_qa]
    m1 = midpoint[e_ap]
    m2 = midpoint[e_qa]

    kept = ~bisected
    pieces: list[tuple[IntArray, IntArray, IntArray]] = []  # (parent ids, slot, vertex triples)

    def add(select: NDArray[np.bool_], slot: int, a: IntArray, b: IntArray, c: IntArray) -> None:
        ids = np.flatnonzero(select)
        pieces.append((ids, np.full(len(ids), slot), np.stack([a[ids], b[ids], c[ids]], axis=1)))

    kept_ids = np.flatnonzero(kept)
    pieces.append((kept_ids, np.zeros(len(kept_ids), dtype=np.int64), mesh.triangles[kept_ids]))
    add(bisected & ~split_ap, 0, m, apex, p)
    add(split_ap, 0, m1, m, apex)
    add(split_ap, 1, m1, p, m)
    add(bisected & ~split_qa, 2, m, q, apex)
    add(split_qa, 2, m2, m, q)
    add(split_qa, 3, m2, apex, m)

    parents = np.concatenate([piece[0] for piece in pieces])
    slots = np.concatenate([piece[1] for piece in pieces])
    children = np.concatenate([piece[2] for piece in pieces])
    child_ref = np.zeros(len(children), dtype=np.int64)
    child_ref[: len(kept_ids)] = mesh.ref_edges[kept_ids]

    order = np.lexsort((slots, parents))
    triangles = children[order]
    ref_edges = child_ref[order]
    sigma = mesh.sigma[parents[order]]

    edges, edge_triangles, triangle_edges = _edge_table(triangles, len(vertices))
    labels, segments = _inherit_labels(mesh, edges, edge_triangles, nv, vertex_parents)

    logger.debug(
        f"Refined generation {mesh.generation}: {len(marked)} marked, {int(bisected.sum())} bisected, "
        f"{closure_rounds} closure rounds, {nt} -> {len(triangles)} triangles"
    )
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        ref_edges=ref_edges,
        sigma=sigma,
        edges=edges,
        edge_triangles=edge_triangles,
        triangle_edges=triangle_edges,
        edge_labels=labels,
        edge_segments=segments,
        generation=mesh.generation + 1,
        parent_vertex_count=nv,
        vertex_parents=vertex_parents,
    )


def _inherit_labels(
    parent: Mesh,
    edges: IntArray,
    edge_triangles: IntArray,
    n_old: int,
    vertex_parents: IntArray,
) -> tuple[IntArray, IntArray]:
    """Boundary edges of the child mesh take the label of the parent edge they lie in."""
    labels = np.full(len(edges), INTERIOR, dtype=np.int64)
    segments = np.full(len(edges), -1, dtype=np.int64)
    boundary = np.flatnonzero(edge_triangles[:, 1] < 0)
    if boundary.size == 0:
        return labels, segments

    a = edges[boundary, 0].copy()
    b = edges[boundary, 1].copy()
    # edges are sorted pairs, so a new midpoint vertex can only sit in the second slot
    b_new = b >= n_old
    origin = vertex_parents[b[b_new] - n_old]
    a[b_new] = origin[:, 0]
    b[b_new] = origin[:, 1]

    parent_keys = _edge_keys(parent.edges, parent.n_vertices)
    keys = _edge_keys(np.stack([a, b], axis=1), parent.n_vertices)
    pos = np.searchsorted(parent_keys, keys)
    pos = np.clip(pos, 0, len(parent_keys) - 1)
    if np.any(parent_keys[pos] != keys):
        raise MeshError("Boundary edge has no parent edge; refinement produced an inconsistent boundary")
    labels[boundary] = parent.edge_labels[pos]
    segments[boundary] = parent.edge_segments[pos]
    return labels, segments


@dataclass(frozen=True)
class ConformityReport:
    """Result of a conformity check."""

    ok: bool
    diagnostic: str = "conforming"

    def __bool__(self) -> bool:
        return self.ok


def validate_conformity(mesh: Mesh, tol: float = Tolerances.GEOMETRY) -> ConformityReport:
    """Check positive orientation, edge sharing, adjacency consistency, labels and hanging nodes.

    Returns:
        Report holding the first violation found
    """
    if mesh.n_triangles == 0:
        return ConformityReport(False, "mesh has no triangles")

    bad_area = np.flatnonzero(mesh.signed_areas <= 0)
    if bad_area.size:
        t = int(bad_area[0])
        return ConformityReport(False, f"triangle {t} has non-positive signed area {mesh.signed_areas[t]:.3e}")

    keys = _edge_keys(
        np.stack([mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]], mesh.triangles[:, [0, 1]]], axis=1).reshape(
            -1, 2
        ),
        mesh.n_vertices,
    )
    unique_keys, counts = np.unique(keys, return_counts=True)
    if np.any(counts > 2):
        key = int(unique_keys[np.argmax(counts > 2)])
        return ConformityReport(
            False, f"edge ({key // mesh.n_vertices}, {key % mesh.n_vertices}) is shared by more than two triangles"
        )
    if len(unique_keys) != mesh.n_edges:
        return ConformityReport(False, "edge table does not match the triangles")

    rows = np.repeat(np.arange(mesh.n_triangles), 3)
    te = mesh.triangle_edges.ravel()
    back = (mesh.edge_triangles[te, 0] == rows) | (mesh.edge_triangles[te, 1] == rows)
    if not back.all():
        t = int(rows[np.argmin(back)])
        return ConformityReport(False, f"triangle {t} is not listed by one of its edges")

    boundary = mesh.edge_triangles[:, 1] < 0
    if np.any(mesh.edge_labels[boundary] == INTERIOR):
        e = int(np.flatnonzero(boundary & (mesh.edge_labels == INTERIOR))[0])
        return ConformityReport(False, f"boundary edge {e} carries the Interior label")
    if np.any(mesh.edge_labels[~boundary] != INTERIOR):
        e = int(np.flatnonzero(~boundary & (mesh.edge_labels != INTERIOR))[0])
        return ConformityReport(False, f"interior edge {e} carries a boundary label")

    hanging = _find_hanging_node(mesh, tol)
    if hanging is not None:
        v, e = hanging
        a, b = mesh.edges[e]
        return ConformityReport(False, f"hanging node: vertex {v} lies inside edge ({a}, {b})")
    return ConformityReport(True)


def _find_hanging_node(mesh: Mesh, tol: float, chunk: int = 256) -> tuple[int, int] | None:
    """A hanging node is a vertex strictly inside a boundary edge of the edge graph."""
    boundary = mesh.boundary_edges
    candidates = np.unique(mesh.edges[boundary].ravel())
    points = mesh.vertices[candidates]
    for start in range(0, len(boundary), chunk):
        block = boundary[start : start + chunk]
        a = mesh.vertices[mesh.edges[block, 0]]
        d = mesh.vertices[mesh.edges[block, 1]] - a
        length_sq = np.einsum("ij,ij->i", d, d)
        rel = points[None, :, :] - a[:, None, :]
        cross = rel[..., 0] * d[:, None, 1] - rel[..., 1] * d[:, None, 0]
        t = np.einsum("ekj,ej->ek", rel, d) / length_sq[:, None]
        inside = (np.abs(cross) <= tol * length_sq[:, None]) & (t > tol) & (t < 1 - tol)
        if inside.any():
            e_local, v_local = np.argwhere(inside)[0]
            return int(candidates[v_local]), int(block[e_local])
    return None


def shape_regularity(mesh: Mesh) -> float:
    """Largest ratio h_T / rho_T with h_T = |T|^(1/2) and rho_T the inscribed-circle diameter."""
    p = mesh.vertices[mesh.triangles]
    perimeter = sum(np.linalg.norm(p[:, (i + 1) % 3] - p[:, i], axis=1) for i in range(3))
    rho = 4.0 * mesh.areas / perimeter
    return float(np.max(mesh.h / rho))


def barycentric(mesh: Mesh, triangle_ids: IntArray, points: FloatArray) -> FloatArray:
    """Barycentric coordinates of points with respect to the given triangles."""
    p = mesh.vertices[mesh.triangles[triangle_ids]]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    rel = points - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    l1 = (rel[:, 0] * d2[:, 1] - rel[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * rel[:, 1] - d1[:, 1] * rel[:, 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def _lowest_containing(mesh: Mesh, point: FloatArray, seed: int, tol: float) -> tuple[int, FloatArray] | None:
    """Lowest-id triangle containing the point among the vertex patch of ``seed``."""
    patch = np.unique(mesh.vertex_triangles[mesh.triangles[seed]].indices)
    bary = barycentric(mesh, patch, np.broadcast_to(point, (len(patch), 2)))
    inside = np.flatnonzero(bary.min(axis=1) >= -tol)
    if inside.size == 0:
        return None
    best = inside[0]
    return int(patch[best]), bary[best]


def _scan(mesh: Mesh, point: FloatArray, tol: float) -> int:
    everything = np.arange(mesh.n_triangles)
    bary = barycentric(mesh, everything, np.broadcast_to(point, (mesh.n_triangles, 2)))
    inside = np.flatnonzero(bary.min(axis=1) >= -tol)
    return int(inside[0]) if inside.size else -1


def locate_point(mesh: Mesh, point: ArrayLike, tol: float = Tolerances.GEOMETRY) -> tuple[int, FloatArray]:
    """Containing triangle and barycentric coordinates; ties go to the lowest triangle id.

    Raises:
        PointLocationError: If the point lies outside the mesh
    """
    point = np.asarray(point, dtype=float).reshape(2)
    seed = int(mesh.trifinder(np.array([point[0]]), np.array([point[1]]))[0])
    if seed < 0:
        seed = _scan(mesh, point, tol)
    if seed < 0:
        raise PointLocationError((float(point[0]), float(point[1])))
    found = _lowest_containing(mesh, point, seed, tol)
    if found is None:
        raise PointLocationError((float(point[0]), float(point[1])))
    return found


def locate_points(
    mesh: Mesh, points: FloatArray, tol: float = Tolerances.GEOMETRY
) -> tuple[IntArray, FloatArray]:
    """Vectorized ``locate_point`` for many points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    ids = np.asarray(mesh.trifinder(points[:, 0], points[:, 1]), dtype=np.int64)
    bary = np.zeros((len(points), 3))
    found = ids >= 0
    if found.any():
        bary[found] = barycentric(mesh, ids[found], points[found])

    # points on edges/vertices or missed by the trapezoid map get the exact tie rule
    ambiguous = np.flatnonzero(~found | (bary.min(axis=1) <= tol))
    for k in ambiguous:
        ids[k], bary[k] = locate_point(mesh, points[k], tol)
    return ids, bary


def total_area(mesh: Mesh) -> float:
    return math.fsum(mesh.areas)
