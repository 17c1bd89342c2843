"""Triangle meshes: construction, validation, primitives, and surface sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import rotation_matrix


class MeshError(ValueError):
    """Raised for structurally invalid meshes."""


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle mesh. Vertices (V,3) float64, faces (F,3) int64."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if not np.all(np.isfinite(v)):
            raise MeshError("mesh has non-finite vertex coordinates")
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError("face index out of range")
        if len(f) and (
            np.any(f[:, 0] == f[:, 1]) or np.any(f[:, 1] == f[:, 2]) or np.any(f[:, 0] == f[:, 2])
        ):
            raise MeshError("face references the same vertex twice")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangle_corners(self) -> np.ndarray:
        """(F,3,3) array of face corner positions."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangle_corners()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def face_normals(self) -> np.ndarray:
        tri = self.triangle_corners()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        n = np.linalg.norm(cross, axis=1, keepdims=True)
        n[n == 0.0] = 1.0
        return cross / n

    def area(self) -> float:
        return float(self.face_areas().sum())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            raise MeshError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, matrix: np.ndarray | None = None, offset: np.ndarray | None = None) -> "TriangleMesh":
        v = self.vertices
        if matrix is not None:
            v = v @ np.asarray(matrix, dtype=np.float64).T
        if offset is not None:
            v = v + np.asarray(offset, dtype=np.float64)
        return TriangleMesh(v, self.faces)


def merge_meshes(meshes: list[TriangleMesh]) -> TriangleMesh:
    """Concatenate meshes into one, reindexing faces."""
    if not meshes:
        raise MeshError("cannot merge zero meshes")
    verts, faces, base = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + base)
        base += m.n_vertices
    return TriangleMesh(np.vstack(verts), np.vstack(faces))


def edge_face_counts(faces: np.ndarray) -> dict[tuple[int, int], int]:
    """Map undirected edge -> number of incident faces."""
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in np.asarray(faces, dtype=np.int64):
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            counts[key] = counts.get(key, 0) + 1
    return counts


def is_watertight(mesh: TriangleMesh) -> bool:
    """True when every undirected edge is shared by exactly two faces."""
    if mesh.n_faces == 0:
        return False
    return all(c == 2 for c in edge_face_counts(mesh.faces).values())


def box(size, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned box of extents `size` centered at `center`, outward-facing."""
    sx, sy, sz = (float(s) / 2.0 for s in size)
    cx, cy, cz = (float(c) for c in center)
    corners = np.array(
        [
            [cx - sx, cy - sy, cz - sz],
            [cx + sx, cy - sy, cz - sz],
            [cx + sx, cy + sy, cz - sz],
            [cx - sx, cy + sy, cz - sz],
            [cx - sx, cy - sy, cz + sz],
            [cx + sx, cy - sy, cz + sz],
            [cx + sx, cy + sy, cz + sz],
            [cx - sx, cy + sy, cz + sz],
        ]
    )
    faces = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom (z-)
            [4, 5, 6], [4, 6, 7],  # top (z+)
            [0, 1, 5], [0, 5, 4],  # front (y-)
            [2, 3, 7], [2, 7, 6],  # back (y+)
            [0, 4, 7], [0, 7, 3],  # left (x-)
            [1, 2, 6], [1, 6, 5],  # right (x+)
        ],
        dtype=np.int64,
    )
    return TriangleMesh(corners, faces)


def cylinder(radius: float, height: float, axis="z", center=(0.0, 0.0, 0.0), segments: int = 24) -> TriangleMesh:
    """Closed cylinder along a coordinate axis, capped with triangle fans."""
    if segments < 3:
        raise MeshError("cylinder needs at least 3 segments")
    h = float(height) / 2.0
    theta = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    ring = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    bottom = np.column_stack([ring, np.full(segments, -h)])
    top = np.column_stack([ring, np.full(segments, h)])
    verts = np.vstack([bottom, top, [[0.0, 0.0, -h]], [[0.0, 0.0, h]]])
    ib, it = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces.append([i, j, segments + j])
        faces.append([i, segments + j, segments + i])
        faces.append([ib, j, i])
        faces.append([it, segments + i, segments + j])
    mesh = TriangleMesh(verts, np.array(faces, dtype=np.int64))
    axis = str(axis).lower()
    if axis == "z":
        rot = np.eye(3)
    elif axis == "x":
        rot = rotation_matrix(np.array([0.0, 1.0, 0.0]), np.pi / 2.0)
    elif axis == "y":
        rot = rotation_matrix(np.array([1.0, 0.0, 0.0]), -np.pi / 2.0)
    else:
        raise MeshError(f"unknown cylinder axis {axis!r}")
    return mesh.transformed(rot, np.asarray(center, dtype=np.float64))


def sample_surface(mesh: TriangleMesh, n: int, seed: int) -> np.ndarray:
    """Sample n points area-uniformly from the mesh surface. Deterministic per seed."""
    if n <= 0:
        raise ValueError("need n > 0 sample points")
    areas = mesh.face_areas()
    total = areas.sum()
    if mesh.n_faces == 0 or total <= 0.0:
        raise MeshError("cannot sample a zero-area mesh")
    rng = np.random.default_rng(seed)
    face_idx = rng.choice(mesh.n_faces, size=n, p=areas / total)
    tri = mesh.triangle_corners()[face_idx]
    # square-root trick gives uniform barycentric sampling
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a = 1.0 - r1
    b = r1 * (1.0 - r2)
    c = r1 * r2
    return a[:, None] * tri[:, 0] + b[:, None] * tri[:, 1] + c[:, None] * tri[:, 2]
