"""Text serialization of meshes and finite element functions, plus legacy VTK export."""

import logging
from collections.abc import Iterator, Mapping
from pathlib import Path

import numpy as np

from afem.core.assembly import FeFunction, FloatArray
from afem.core.constants import FUNCTION_HEADER, MESH_HEADER, BoundaryLabel
from afem.core.mesh import Mesh
from afem.exceptions import ExportError, MeshFormatError

logger = logging.getLogger(__name__)


def format_mesh(mesh: Mesh) -> str:
    lines = [MESH_HEADER, str(mesh.n_vertices)]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(str(mesh.n_triangles))
    lines += [
        f"{a} {b} {c} {r} {s!r}"
        for (a, b, c), r, s in zip(mesh.triangles.tolist(), mesh.ref_edges.tolist(), mesh.sigma.tolist(), strict=True)
    ]
    boundary = mesh.boundary_edges
    lines.append(str(len(boundary)))
    lines += [
        f"{mesh.edges[e, 0]} {mesh.edges[e, 1]} {BoundaryLabel.from_code(int(mesh.edge_labels[e]))}" for e in boundary
    ]
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_mesh(mesh), encoding="utf-8")
    except OSError as e:
        raise ExportError("afem-mesh", f"Failed to write mesh to {path}: {e}", {"path": str(path)}) from e
    logger.info(f"Wrote mesh with {mesh.n_triangles} triangles to {path}")


class _Lines:
    """Cursor over the non-empty lines of a text file."""

    def __init__(self, text: str, source: str) -> None:
        self._lines: Iterator[tuple[int, str]] = (
            (number, line.strip()) for number, line in enumerate(text.splitlines(), start=1) if line.strip()
        )
        self.source = source
        self.number = 0

    def next(self, what: str) -> list[str]:
        try:
            self.number, line = next(self._lines)
        except StopIteration:
            raise MeshFormatError(f"{self.source}: unexpected end of file while reading {what}") from None
        return line.split()

    def count(self, what: str) -> int:
        fields = self.next(f"{what} count")
        if len(fields) != 1 or not fields[0].isdigit():
            raise self.error(f"expected a {what} count")
        return int(fields[0])

    def error(self, message: str) -> MeshFormatError:
        return MeshFormatError(f"{self.source}:{self.number}: {message}", {"line": self.number})


def parse_mesh(text: str, source: str = "<mesh>", generation: int = 0) -> Mesh:
    """Parse an ``afem-mesh v1`` document.

    Raises:
        MeshFormatError: On a wrong header, malformed counts or records, or an unknown label
    """
    lines = _Lines(text, source)
    if " ".join(lines.next("header")) != MESH_HEADER:
        raise lines.error(f"expected header '{MESH_HEADER}'")

    try:
        n_vertices = lines.count("vertex")
        vertices = [[float(v) for v in _fields(lines, 2, "vertex")] for _ in range(n_vertices)]
        n_triangles = lines.count("triangle")
        triangles: list[list[int]] = []
        ref_edges: list[int] = []
        sigma: list[float] = []
        for _ in range(n_triangles):
            a, b, c, r, s = _fields(lines, 5, "triangle")
            triangles.append([int(a), int(b), int(c)])
            ref_edges.append(int(r))
            sigma.append(float(s))
        n_boundary = lines.count("boundary edge")
        labels: dict[tuple[int, int], BoundaryLabel] = {}
        for _ in range(n_boundary):
            a, b, name = _fields(lines, 3, "boundary edge")
            if name not in {label.value for label in BoundaryLabel}:
                raise lines.error(f"unknown boundary label '{name}'")
            i, j = sorted((int(a), int(b)))
            labels[(i, j)] = BoundaryLabel(name)
    except ValueError as e:
        raise lines.error(f"malformed number: {e}") from e

    if any(r not in (0, 1, 2) for r in ref_edges):
        raise MeshFormatError(f"{source}: reference edge index outside 0..2")
    return Mesh.from_arrays(
        vertices, triangles, ref_edges=ref_edges, sigma=sigma, boundary_labels=labels, generation=generation
    )


def _fields(lines: _Lines, n: int, what: str) -> list[str]:
    fields = lines.next(what)
    if len(fields) != n:
        raise lines.error(f"expected {n} fields for a {what}, got {len(fields)}")
    return fields


def read_mesh(path: Path, generation: int = 0) -> Mesh:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MeshFormatError(f"Cannot read mesh file {path}: {e}", {"path": str(path)}) from e
    return parse_mesh(text, str(path), generation)


def write_function(u: FeFunction, path: Path) -> None:
    lines = [FUNCTION_HEADER, f"generation {u.mesh_generation}", str(len(u))]
    lines += [repr(v) for v in u.coeffs.tolist()]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise ExportError("afem-fn", f"Failed to write function to {path}: {e}", {"path": str(path)}) from e


def read_function(path: Path, mesh: Mesh | None = None) -> FeFunction:
    """Read an ``afem-fn v1`` file, rebinding it to ``mesh`` when given.

    Raises:
        MeshFormatError: On malformed content or a length that does not match ``mesh``
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MeshFormatError(f"Cannot read function file {path}: {e}", {"path": str(path)}) from e

    lines = _Lines(text, str(path))
    if " ".join(lines.next("header")) != FUNCTION_HEADER:
        raise lines.error(f"expected header '{FUNCTION_HEADER}'")
    tag = lines.next("generation")
    if len(tag) != 2 or tag[0] != "generation" or not tag[1].isdigit():
        raise lines.error("expected 'generation N'")
    count = lines.count("value")
    try:
        values = np.array([float(_fields(lines, 1, "value")[0]) for _ in range(count)])
    except ValueError as e:
        raise lines.error(f"malformed number: {e}") from e

    if mesh is None:
        return FeFunction(int(tag[1]), values)
    if count != mesh.n_vertices:
        raise MeshFormatError(
            f"{path}: {count} values do not match a mesh with {mesh.n_vertices} vertices",
            {"values": count, "vertices": mesh.n_vertices},
        )
    return FeFunction(mesh.generation, values)


def write_vtk(
    mesh: Mesh,
    path: Path,
    point_data: Mapping[str, FloatArray] | None = None,
    cell_data: Mapping[str, FloatArray] | None = None,
    title: str = "afem mesh",
) -> None:
    """Legacy ASCII VTK unstructured grid with optional scalar fields."""
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines += ["5"] * mesh.n_triangles

    for section, size, data in (
        ("POINT_DATA", mesh.n_vertices, point_data),
        ("CELL_DATA", mesh.n_triangles, cell_data),
    ):
        if not data:
            continue
        lines.append(f"{section} {size}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float).reshape(-1)
            if len(values) != size:
                raise ExportError("vtk", f"Field '{name}' has {len(values)} values, expected {size}")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [repr(v) for v in values.tolist()]

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise ExportError("vtk", f"Failed to write VTK file {path}: {e}", {"path": str(path)}) from e
    logger.info(f"Wrote VTK mesh to {path}")
