"""Surface reconstruction: voxel feature grid, occupancy field, marching cubes.

The occupancy stand-in is a deterministic logistic distance field over the
aggregated canonical cloud: value(x) = sigmoid(beta * (tau - d(x))) with d the
nearest-point distance, iso level 0.5.  It keeps the continuous queryable
interface of a learned implicit decoder while staying training-free.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .canon import FeaturedPointCloud
from .mesh import TriangleMesh
from .mc_tables import CORNER_OFFSETS, EDGE_TABLE, TRI_TABLE

DEFAULT_GRID_RESOLUTION = 32     # feature grid R
DEFAULT_FIELD_RESOLUTION = 64    # scalar field R_f


def default_tau(field_resolution: int) -> float:
    return 1.5 / field_resolution


def default_beta(field_resolution: int) -> float:
    return 4.0 * field_resolution


@dataclass(frozen=True)
class VoxelFeatureGrid:
    """R^3 voxel cells over [0,1]^3 with per-voxel mean features.

    mean_features is defined only where counts > 0 (zeros elsewhere).
    """

    resolution: int
    counts: np.ndarray         # (R,R,R) int64
    mean_features: np.ndarray  # (R,R,R,C) f8

    @property
    def occupied(self) -> np.ndarray:
        return self.counts > 0

    @property
    def total_points(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ScalarField:
    """Scalar values on the R^3 node lattice spanning [0,1]^3 inclusive."""

    values: np.ndarray  # (R,R,R) f8 in [0,1]
    iso: float = 0.5

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 3 or len(set(v.shape)) != 1:
            raise ValueError("field values must be a cubic lattice")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("field values must lie in [0, 1]")
        if not (0.0 < self.iso < 1.0):
            raise ValueError("iso level must lie in (0,1)")

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 1.0 / (self.resolution - 1)

    def occupancy(self) -> np.ndarray:
        """Boolean lattice: value >= iso."""
        return self.values >= self.iso


def voxelize(cloud: FeaturedPointCloud, resolution: int = DEFAULT_GRID_RESOLUTION) -> VoxelFeatureGrid:
    """Per-voxel point counts and arithmetic feature means.

    Points are clamped into [0,1]^3 first; a coordinate of exactly 1.0 lands
    in the last voxel.
    """
    if resolution < 8:
        raise ValueError("feature grid resolution must be >= 8")
    if cloud.is_empty:
        raise ValueError("cannot voxelize an empty cloud")
    r = resolution
    pts = np.clip(cloud.points, 0.0, 1.0)
    idx = np.minimum((pts * r).astype(np.int64), r - 1)
    flat = (idx[:, 0] * r + idx[:, 1]) * r + idx[:, 2]

    counts = np.bincount(flat, minlength=r**3).reshape(r, r, r)
    c = cloud.feature_dim
    sums = np.zeros((r**3, c))
    np.add.at(sums, flat, cloud.features)
    means = np.zeros_like(sums)
    nonzero = counts.reshape(-1) > 0
    means[nonzero] = sums[nonzero] / counts.reshape(-1)[nonzero, None]
    return VoxelFeatureGrid(resolution=r, counts=counts, mean_features=means.reshape(r, r, r, c))


def occupancy_field(
    cloud: FeaturedPointCloud,
    field_resolution: int = DEFAULT_FIELD_RESOLUTION,
    tau: float | None = None,
    beta: float | None = None,
    seal_boundary: bool = True,
) -> ScalarField:
    """Logistic nearest-distance occupancy on the node lattice, iso = 0.5.

    Normalized shapes touch the container walls, where an isosurface would
    be clipped open; with seal_boundary the outermost lattice nodes are
    capped just below iso so marching cubes closes the surface there.
    """
    if cloud.is_empty:
        raise ValueError("cannot build an occupancy field from an empty cloud")
    if tau is None:
        tau = default_tau(field_resolution)
    if beta is None:
        beta = default_beta(field_resolution)
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    r = field_resolution
    d = nearest_distances(lattice_nodes(r), cloud.points)
    values = (1.0 / (1.0 + np.exp(-beta * (tau - d)))).reshape(r, r, r)
    if seal_boundary:
        cap = 0.5 - 1e-4
        for axis in range(3):
            for face in (0, r - 1):
                sl = [slice(None)] * 3
                sl[axis] = face
                np.minimum(values[tuple(sl)], cap, out=values[tuple(sl)])
    return ScalarField(values, iso=0.5)


def lattice_nodes(resolution: int) -> np.ndarray:
    axis = np.linspace(0.0, 1.0, resolution)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def nearest_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Distance from each query to its nearest cloud point (KD-tree backed)."""
    tree = cKDTree(np.asarray(points, dtype=np.float64))
    d, _ = tree.query(np.asarray(queries, dtype=np.float64), k=1, workers=-1)
    return d


# ---------------------------------------------------------------------------
# Marching cubes

# local edge -> (base corner offset into the cell, axis of the edge)
_EDGE_BASE = np.array(
    [
        [0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0],
        [0, 0, 1], [1, 0, 1], [0, 1, 1], [0, 0, 1],
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
    ],
    dtype=np.int64,
)
_EDGE_AXIS = np.array([0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2], dtype=np.int64)


def marching_cubes(field: ScalarField) -> TriangleMesh:
    """Standard 256-case marching cubes with linear interpolation.

    Vertices are welded by exact lattice-edge identity; triangles are wound
    with outward orientation (normals point away from values >= iso).
    """
    vals = field.values
    r = field.resolution
    iso = field.iso
    below = vals < iso
    n_cells = r - 1

    case = np.zeros((n_cells, n_cells, n_cells), dtype=np.int32)
    for bit, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        case |= below[dx : n_cells + dx, dy : n_cells + dy, dz : n_cells + dz].astype(np.int32) << bit

    active = EDGE_TABLE[case] != 0
    ci, cj, ck = np.nonzero(active)
    if len(ci) == 0:
        warnings.warn("isosurface is empty", stacklevel=2)
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    tri_rows = TRI_TABLE[case[ci, cj, ck]][:, :15].reshape(-1, 5, 3)  # (A,5,3) local edges
    valid = tri_rows[:, :, 0] >= 0                                    # (A,5)
    a_idx, t_idx = np.nonzero(valid)
    local_edges = tri_rows[a_idx, t_idx]                              # (T,3)

    cell = np.stack([ci, cj, ck], axis=1)[a_idx]                      # (T,3)
    base = cell[:, None, :] + _EDGE_BASE[local_edges]                 # (T,3,3)
    axis = _EDGE_AXIS[local_edges]                                    # (T,3)
    node_flat = (base[:, :, 0] * r + base[:, :, 1]) * r + base[:, :, 2]
    edge_gid = node_flat * 3 + axis                                   # (T,3)

    uniq, inverse = np.unique(edge_gid.ravel(), return_inverse=True)
    faces = inverse.reshape(-1, 3)

    # interpolate one vertex per unique lattice edge
    u_node = uniq // 3
    u_axis = uniq % 3
    i0 = u_node // (r * r)
    j0 = (u_node // r) % r
    k0 = u_node % r
    step = np.zeros((len(uniq), 3), dtype=np.int64)
    step[np.arange(len(uniq)), u_axis] = 1
    v0 = vals[i0, j0, k0]
    v1 = vals[i0 + step[:, 0], j0 + step[:, 1], k0 + step[:, 2]]
    t = np.clip((iso - v0) / (v1 - v0), 0.0, 1.0)
    h = field.spacing
    verts = np.stack([i0, j0, k0], axis=1).astype(np.float64) * h
    verts[np.arange(len(uniq)), u_axis] += t * h

    # drop exactly-degenerate faces (possible when a lattice value equals iso)
    ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    # table winding already yields outward normals (away from the >= iso side)
    return TriangleMesh(verts, faces[ok])
