"""Stage 3: repose canonical clouds and meshes, bind skins, build animations.

Two reposing routes: rotate the canonical cloud and re-run surfacing (smooth
at hinges, slower), or rotate mesh vertices directly through a nearest-point
part binding (fast, connectivity-stable).  Skinning is piecewise rigid.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np
import yaml
from scipy.spatial import cKDTree

from .canon import FeaturedPointCloud
from .geometry import normalize, rotation_matrix
from .mesh import TriangleMesh


@dataclass(frozen=True)
class JointFrame:
    """Rotation axis through a center point; what reposing needs of a joint."""

    center: np.ndarray
    axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(self, "axis", normalize(np.asarray(self.axis, dtype=np.float64).reshape(3)))


@dataclass(frozen=True)
class SkinBinding:
    part_ids: np.ndarray      # (V,) i4 part id per mesh vertex
    source_index: np.ndarray  # (V,) i8 nearest canonical cloud point
    distance: np.ndarray      # (V,) f8 binding distance

    def __post_init__(self):
        object.__setattr__(self, "part_ids", np.asarray(self.part_ids, dtype=np.int32).reshape(-1))
        object.__setattr__(self, "source_index", np.asarray(self.source_index, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "distance", np.asarray(self.distance, dtype=np.float64).reshape(-1))
        if not (len(self.part_ids) == len(self.source_index) == len(self.distance)):
            raise ValueError("binding arrays must share length")
        if not np.all(np.isfinite(self.distance)):
            raise ValueError("binding distances must be finite")

    @property
    def size(self) -> int:
        return len(self.part_ids)

    def to_bytes(self) -> bytes:
        return (
            b"SKIN"
            + struct.pack("<I", self.size)
            + self.part_ids.astype("<i4").tobytes()
            + self.source_index.astype("<i8").tobytes()
            + self.distance.astype("<f8").tobytes()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "SkinBinding":
        if data[:4] != b"SKIN":
            raise ValueError("not a skin binding payload")
        (n,) = struct.unpack_from("<I", data, 4)
        off = 8
        parts = np.frombuffer(data, dtype="<i4", count=n, offset=off)
        off += parts.nbytes
        src = np.frombuffer(data, dtype="<i8", count=n, offset=off)
        off += src.nbytes
        dist = np.frombuffer(data, dtype="<f8", count=n, offset=off)
        return cls(parts.copy(), src.copy(), dist.copy())


def _rotate_groups(
    points: np.ndarray,
    labels: np.ndarray,
    joints: list[JointFrame],
    part_to_joint: dict[int, int],
    angles: np.ndarray,
) -> np.ndarray:
    out = points.copy()
    for part_id, joint_id in part_to_joint.items():
        if joint_id >= len(joints) or joints[joint_id] is None:
            raise ValueError(f"missing joint frame for joint {joint_id}")
        sel = labels == part_id
        if not np.any(sel):
            continue
        frame = joints[joint_id]
        rot = rotation_matrix(frame.axis, float(angles[joint_id]))
        out[sel] = (points[sel] - frame.center) @ rot.T + frame.center
    return out


def repose_cloud(
    cloud: FeaturedPointCloud,
    joints: list[JointFrame],
    part_to_joint: dict[int, int],
    angles: np.ndarray,
) -> FeaturedPointCloud:
    """Rotate each moving part's points by its joint angle. Exact inverse of
    articulation canonicalization when both use the same joint parameters."""
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if len(angles) != len(joints):
        raise ValueError(f"got {len(angles)} angles for {len(joints)} joints")
    pts = _rotate_groups(cloud.points, cloud.part_labels, joints, part_to_joint, angles)
    return cloud.with_points(pts)


def bind_mesh(mesh: TriangleMesh, cloud: FeaturedPointCloud) -> SkinBinding:
    """Assign each vertex the part label of its nearest cloud point.

    Equidistant ties break to the lowest cloud point index.
    """
    if cloud.is_empty:
        raise ValueError("cannot bind against an empty cloud")
    tree = cKDTree(cloud.points)
    d, idx = tree.query(mesh.vertices, k=1, workers=-1)
    # deterministic tie-break: rescan candidates within the nearest distance
    candidates = tree.query_ball_point(mesh.vertices, np.asarray(d) + 1e-12)
    for vi, cand in enumerate(candidates):
        if len(cand) > 1:
            cand = np.sort(np.asarray(cand))
            dists = np.linalg.norm(cloud.points[cand] - mesh.vertices[vi], axis=1)
            keep = cand[dists <= d[vi] + 1e-12]
            if len(keep):
                idx[vi] = keep[0]
                d[vi] = np.linalg.norm(cloud.points[keep[0]] - mesh.vertices[vi])
    return SkinBinding(cloud.part_labels[idx], idx, d)


def repose_mesh(
    mesh: TriangleMesh,
    binding: SkinBinding,
    joints: list[JointFrame],
    part_to_joint: dict[int, int],
    angles: np.ndarray,
) -> TriangleMesh:
    """Piecewise-rigid skinning: rotate vertices per bound part, keep faces."""
    if binding.size != mesh.n_vertices:
        raise ValueError("binding does not match mesh vertex count")
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if len(angles) != len(joints):
        raise ValueError(f"got {len(angles)} angles for {len(joints)} joints")
    verts = _rotate_groups(mesh.vertices, binding.part_ids, joints, part_to_joint, angles)
    return TriangleMesh(verts, mesh.faces)


def animate(
    mesh: TriangleMesh,
    binding: SkinBinding,
    joints: list[JointFrame],
    part_to_joint: dict[int, int],
    keyframes: list[tuple[float, np.ndarray]],
    fps: float,
) -> tuple[list[TriangleMesh], list[np.ndarray], list[float]]:
    """Linearly interpolate keyframed joint angles and repose one mesh per frame.

    Frame count is ceil((t_end - t_start) * fps) + 1.
    Returns (frames, per-frame angles, per-frame times).
    """
    if len(keyframes) < 2:
        raise ValueError("need at least two keyframes")
    times = np.array([float(t) for t, _ in keyframes])
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("keyframe times must be strictly increasing")
    poses = np.array([np.asarray(a, dtype=np.float64).reshape(-1) for _, a in keyframes])
    if fps <= 0.0:
        raise ValueError("fps must be positive")

    span = times[-1] - times[0]
    count = math.ceil(span * fps) + 1
    frames, frame_angles, frame_times = [], [], []
    for i in range(count):
        t = min(times[0] + i / fps, times[-1])
        angles = np.array([np.interp(t, times, poses[:, j]) for j in range(poses.shape[1])])
        frames.append(repose_mesh(mesh, binding, joints, part_to_joint, angles))
        frame_angles.append(angles)
        frame_times.append(float(t))
    return frames, frame_angles, frame_times


def export_animation(
    frames: list[TriangleMesh],
    frame_angles: list[np.ndarray],
    frame_times: list[float],
    out_dir: str,
) -> list[str]:
    """Write frame_%04d.obj files plus a manifest of times and poses."""
    from .meshio import export_mesh

    os.makedirs(out_dir, exist_ok=True)
    files = []
    for i, frame in enumerate(frames):
        name = f"frame_{i:04d}.obj"
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(export_mesh(frame, "obj"))
        files.append(name)
    manifest = {
        "fps_frames": len(frames),
        "frames": [
            {"file": f, "time": t, "angles": [float(a) for a in ang]}
            for f, t, ang in zip(files, frame_times, frame_angles)
        ],
    }
    with open(os.path.join(out_dir, "animation.yaml"), "w") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
    return files
