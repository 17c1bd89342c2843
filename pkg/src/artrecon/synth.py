"""Ground-truth view synthesis: cameras, per-view map bundles, dataset generation.

Each rendered view packs everything a downstream aggregation stage consumes:
per-pixel container coordinates, foreground mask, part labels, 6D joint votes
(center + axis-angle) with confidences, and a small feature vector (surface
normal plus part one-hot).
"""

from __future__ import annotations

import hashlib
import os
import warnings
from dataclasses import dataclass, replace as dc_replace

import numpy as np
import yaml

from .geometry import normalize
from .mesh import TriangleMesh
from .model import (
    ArticulatedModel,
    CONTAINER_CENTER,
    Pose,
    normalize_to_container,
    posed_part_meshes,
    serialize_model,
)
from .raycast import first_hits

DEFAULT_FEATURE_DIM = 8
DEFAULT_IMAGE_SIZE = 64
DEFAULT_VFOV = np.deg2rad(55.0)


class PoseLimitError(ValueError):
    """Raised when a dataset pose violates joint limits (strict mode)."""


@dataclass(frozen=True)
class Camera:
    eye: np.ndarray
    target: np.ndarray
    up: np.ndarray
    vfov: float
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "eye", np.asarray(self.eye, dtype=np.float64).reshape(3))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=np.float64).reshape(3))
        object.__setattr__(self, "up", normalize(np.asarray(self.up, dtype=np.float64).reshape(3)))
        if np.allclose(self.eye, self.target):
            raise ValueError("camera eye must differ from target")
        if not (0.0 < self.vfov < np.pi):
            raise ValueError("vfov must lie in (0, pi)")
        if self.width < 8 or self.height < 8:
            raise ValueError("image must be at least 8x8")

    def ray_directions(self) -> np.ndarray:
        """(H*W, 3) unit ray directions through pixel centers, row-major."""
        forward = normalize(self.target - self.eye)
        right = normalize(np.cross(forward, self.up))
        true_up = np.cross(right, forward)
        half_h = np.tan(self.vfov / 2.0)
        half_w = half_h * self.width / self.height
        xs = (np.arange(self.width) + 0.5) / self.width * 2.0 - 1.0
        ys = (np.arange(self.height) + 0.5) / self.height * 2.0 - 1.0
        u, v = np.meshgrid(xs, ys)  # v increases downward
        dirs = (
            forward[None, :]
            + (u.ravel() * half_w)[:, None] * right[None, :]
            - (v.ravel() * half_h)[:, None] * true_up[None, :]
        )
        return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass(frozen=True)
class MapBundle:
    """Per-view rasters. Arrays use the wire dtypes (f4/u1/u2, little-endian)."""

    coords: np.ndarray        # (H,W,3) f4
    mask: np.ndarray          # (H,W)   u1
    part_labels: np.ndarray   # (H,W)   u2
    votes: np.ndarray         # (H,W,N_J,6) f4
    confidences: np.ndarray   # (H,W,N_J)   f4
    features: np.ndarray      # (H,W,C)     f4
    pose: np.ndarray          # (N_J,) f4
    n_parts: int
    view_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coords", np.ascontiguousarray(self.coords, dtype=np.float32))
        object.__setattr__(self, "mask", np.ascontiguousarray(self.mask, dtype=np.uint8))
        object.__setattr__(self, "part_labels", np.ascontiguousarray(self.part_labels, dtype=np.uint16))
        object.__setattr__(self, "votes", np.ascontiguousarray(self.votes, dtype=np.float32))
        object.__setattr__(self, "confidences", np.ascontiguousarray(self.confidences, dtype=np.float32))
        object.__setattr__(self, "features", np.ascontiguousarray(self.features, dtype=np.float32))
        object.__setattr__(self, "pose", np.ascontiguousarray(self.pose, dtype=np.float32).reshape(-1))
        h, w = self.mask.shape
        nj = len(self.pose)
        if self.coords.shape != (h, w, 3):
            raise ValueError("coords shape mismatch")
        if self.part_labels.shape != (h, w):
            raise ValueError("part_labels shape mismatch")
        if self.votes.shape != (h, w, nj, 6):
            raise ValueError("votes shape mismatch")
        if self.confidences.shape != (h, w, nj):
            raise ValueError("confidences shape mismatch")
        if self.features.shape[:2] != (h, w):
            raise ValueError("features shape mismatch")
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise ValueError("mask must be binary")
        if self.n_parts < 1 or np.any(self.part_labels[self.mask == 1] >= self.n_parts):
            raise ValueError("foreground part labels must lie in [0, n_parts)")

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def n_joints(self) -> int:
        return len(self.pose)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[2]

    @property
    def foreground_count(self) -> int:
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return self.foreground_count == 0

    def with_view_id(self, view_id: int) -> "MapBundle":
        return dc_replace(self, view_id=view_id)


@dataclass(frozen=True)
class RenderAux:
    """Ground-truth correspondences kept out of the wire format; test fodder."""

    tri_index: np.ndarray   # (H,W) int32, -1 on background
    bary_u: np.ndarray      # (H,W) f8
    bary_v: np.ndarray      # (H,W) f8
    naocs: np.ndarray       # (H,W,3) f8 rest-pose surface point via barycentrics


def make_cameras(q: int, radius_range, seed: int, width: int = DEFAULT_IMAGE_SIZE,
                 height: int = DEFAULT_IMAGE_SIZE, vfov: float = DEFAULT_VFOV) -> list[Camera]:
    """q cameras on randomized spherical shells looking at the container center."""
    r_min, r_max = float(radius_range[0]), float(radius_range[1])
    if q < 1:
        raise ValueError("need at least one camera")
    if not (0.0 < r_min <= r_max):
        raise ValueError("need 0 < r_min <= r_max")
    rng = np.random.default_rng(seed)
    cams = []
    while len(cams) < q:
        d = rng.normal(size=3)
        n = np.linalg.norm(d)
        if n < 1e-6 or abs(d[2]) / n > 0.98:  # avoid up-vector degeneracy
            continue
        r = rng.uniform(r_min, r_max)
        cams.append(
            Camera(
                eye=CONTAINER_CENTER + d / n * r,
                target=CONTAINER_CENTER.copy(),
                up=np.array([0.0, 0.0, 1.0]),
                vfov=vfov,
                width=width,
                height=height,
            )
        )
    return cams


def _check_limits(model: ArticulatedModel, pose: Pose):
    for j, angle in zip(model.joints, pose.angles):
        if not (j.limits[0] - 1e-12 <= angle <= j.limits[1] + 1e-12):
            raise PoseLimitError(
                f"angle {angle:.4f} outside limits {j.limits} for joint {j.name!r}"
            )


def render_view(
    model: ArticulatedModel,
    pose: Pose,
    camera: Camera,
    feature_dim: int = DEFAULT_FEATURE_DIM,
    view_id: int = 0,
    with_aux: bool = False,
):
    """Ray-cast one view of the posed model into a MapBundle.

    One primary ray per pixel center, first hit only.  Foreground coords are
    the hit positions inside the unit container; every pixel votes for every
    joint with the joint's static pivot and current axis-angle.
    """
    if len(pose.angles) != model.n_joints:
        raise ValueError("pose length mismatch")
    _check_limits(model, pose)
    h, w = camera.height, camera.width

    posed = posed_part_meshes(model, pose)
    tris, tri_part = [], []
    for pid, pm in sorted(posed.items()):
        tris.append(pm.triangle_corners())
        tri_part.append(np.full(pm.n_faces, pid, dtype=np.int32))
    all_tris = np.vstack(tris)
    tri_part = np.concatenate(tri_part)

    dirs = camera.ray_directions()
    origins = np.broadcast_to(camera.eye, dirs.shape).copy()
    hit_idx, hit_t, hit_u, hit_v = first_hits(origins, dirs, all_tris)

    hit = hit_idx >= 0
    mask = hit.reshape(h, w).astype(np.uint8)
    coords = np.zeros((h * w, 3))
    coords[hit] = camera.eye + hit_t[hit, None] * dirs[hit]
    np.clip(coords, 0.0, 1.0, out=coords)

    labels = np.zeros(h * w, dtype=np.uint16)
    labels[hit] = tri_part[hit_idx[hit]].astype(np.uint16)

    nj = model.n_joints
    votes = np.zeros((h * w, nj, 6), dtype=np.float64)
    for j in model.joints:
        votes[hit, j.id, :3] = j.pivot
        votes[hit, j.id, 3:] = j.axis * float(pose.angles[j.id])
    conf = np.zeros((h * w, nj))
    conf[hit] = 1.0

    feats = np.zeros((h * w, feature_dim))
    if hit.any():
        merged_normals = np.vstack([posed[pid].face_normals() for pid in sorted(posed)])
        feats[hit, :3] = merged_normals[hit_idx[hit]][:, : min(3, feature_dim)]
        onehot_cols = min(model.n_parts, feature_dim - 3)
        if onehot_cols > 0:
            lab = labels[hit].astype(np.int64)
            keep = lab < onehot_cols
            rows = np.nonzero(hit)[0][keep]
            feats[rows, 3 + lab[keep]] = 1.0

    bundle = MapBundle(
        coords=coords.reshape(h, w, 3),
        mask=mask,
        part_labels=labels.reshape(h, w),
        votes=votes.reshape(h, w, nj, 6),
        confidences=conf.reshape(h, w, nj),
        features=feats.reshape(h, w, feature_dim),
        pose=pose.angles,
        n_parts=model.n_parts,
        view_id=view_id,
    )
    if bundle.is_empty:
        warnings.warn("rendered view has empty foreground (camera sees no geometry)", stacklevel=2)
    if not with_aux:
        return bundle

    # rest-pose correspondence through triangle barycentrics
    rest_tris = np.vstack([model.part_by_id(pid).mesh.triangle_corners() for pid in sorted(posed)])
    naocs = np.zeros((h * w, 3))
    if hit.any():
        rt = rest_tris[hit_idx[hit]]
        u = hit_u[hit][:, None]
        v = hit_v[hit][:, None]
        naocs[hit] = (1.0 - u - v) * rt[:, 0] + u * rt[:, 1] + v * rt[:, 2]
    aux = RenderAux(
        tri_index=np.where(hit, hit_idx, -1).reshape(h, w).astype(np.int32),
        bary_u=hit_u.reshape(h, w),
        bary_v=hit_v.reshape(h, w),
        naocs=naocs.reshape(h, w, 3),
    )
    return bundle, aux


# ---------------------------------------------------------------------------
# Dataset generation


@dataclass(frozen=True)
class ScaleAugmentation:
    enabled: bool = True
    low: float = 0.8
    high: float = 1.25


@dataclass
class DatasetManifest:
    seed: int
    poses_per_model: int
    views_per_pose: int
    augmentation: ScaleAugmentation
    image_size: int
    feature_dim: int
    radius_range: tuple[float, float]
    models: list[dict]  # per model: category, spec file, pose records with view files

    def to_yaml(self) -> str:
        doc = {
            "seed": self.seed,
            "poses_per_model": self.poses_per_model,
            "views_per_pose": self.views_per_pose,
            "augmentation": {
                "enabled": self.augmentation.enabled,
                "low": self.augmentation.low,
                "high": self.augmentation.high,
            },
            "image_size": self.image_size,
            "feature_dim": self.feature_dim,
            "radius_range": list(self.radius_range),
            "models": self.models,
        }
        return yaml.safe_dump(doc, sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "DatasetManifest":
        doc = yaml.safe_load(text)
        aug = doc["augmentation"]
        return cls(
            seed=doc["seed"],
            poses_per_model=doc["poses_per_model"],
            views_per_pose=doc["views_per_pose"],
            augmentation=ScaleAugmentation(aug["enabled"], aug["low"], aug["high"]),
            image_size=doc["image_size"],
            feature_dim=doc["feature_dim"],
            radius_range=tuple(doc["radius_range"]),
            models=doc["models"],
        )

    def bundle_files(self) -> list[str]:
        return [v["file"] for m in self.models for p in m["poses"] for v in p["views"]]


def augment_model(model: ArticulatedModel, scale_xyz) -> ArticulatedModel:
    """Non-uniform per-axis scaling followed by re-normalization."""
    s = np.asarray(scale_xyz, dtype=np.float64).reshape(3)
    if np.any(s <= 0.0):
        raise ValueError("scale factors must be positive")
    from dataclasses import replace

    parts = tuple(
        replace(p, mesh=TriangleMesh(p.mesh.vertices * s, p.mesh.faces)) for p in model.parts
    )
    joints = tuple(
        replace(j, pivot=j.pivot * s, axis=normalize(j.axis * s)) for j in model.joints
    )
    scaled = ArticulatedModel(model.category, parts, joints)
    return normalize_to_container(scaled)


def _sample_pose(model: ArticulatedModel, rng: np.random.Generator) -> Pose:
    lo = np.array([j.limits[0] for j in model.joints])
    hi = np.array([j.limits[1] for j in model.joints])
    return Pose(rng.uniform(lo, hi))


def _atomic_write(path: str, data: bytes):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def generate_dataset(
    models: list[ArticulatedModel],
    poses_per_model: int,
    views_per_pose: int,
    augmentation: ScaleAugmentation,
    out_dir: str,
    seed: int,
    image_size: int = DEFAULT_IMAGE_SIZE,
    feature_dim: int = DEFAULT_FEATURE_DIM,
    radius_range=(1.6, 2.2),
) -> DatasetManifest:
    """Render poses_per_model x views_per_pose bundles per model into out_dir.

    Deterministic: every pose/camera/augmentation draw uses a seed derived
    from (seed, model index, pose index), so regeneration is byte-identical.
    """
    from .nmap import write_nmap

    if not models:
        raise ValueError("need at least one model")
    if poses_per_model < 1 or views_per_pose < 1:
        raise ValueError("counts must be >= 1")
    os.makedirs(out_dir, exist_ok=True)

    manifest_models = []
    for mi, base_model in enumerate(models):
        model_dir = os.path.join(out_dir, base_model.category)
        os.makedirs(model_dir, exist_ok=True)
        spec_file = os.path.join(base_model.category, "model.yaml")
        _atomic_write(os.path.join(out_dir, spec_file), serialize_model(base_model).encode())
        pose_records = []
        for pi in range(poses_per_model):
            rng = np.random.default_rng(np.random.SeedSequence([seed, mi, pi]))
            if augmentation.enabled:
                scale = rng.uniform(augmentation.low, augmentation.high, size=3)
                model = augment_model(base_model, scale)
            else:
                scale = np.ones(3)
                model = base_model
            pose = _sample_pose(model, rng)
            cam_seed = int(rng.integers(0, 2**31 - 1))
            cameras = make_cameras(
                views_per_pose, radius_range, cam_seed, width=image_size, height=image_size
            )
            views = []
            for vi, cam in enumerate(cameras):
                bundle = render_view(model, pose, cam, feature_dim=feature_dim, view_id=vi)
                rel = os.path.join(base_model.category, f"pose{pi:03d}_view{vi:02d}.nmap")
                write_nmap(os.path.join(out_dir, rel), bundle, atomic=True)
                views.append(
                    {
                        "view_id": vi,
                        "file": rel,
                        "eye": [float(x) for x in cam.eye],
                    }
                )
            pose_records.append(
                {
                    "pose_index": pi,
                    "angles": [float(a) for a in pose.angles],
                    "scale": [float(x) for x in scale],
                    "camera_seed": cam_seed,
                    "views": views,
                }
            )
        manifest_models.append(
            {"category": base_model.category, "spec": spec_file, "poses": pose_records}
        )

    manifest = DatasetManifest(
        seed=seed,
        poses_per_model=poses_per_model,
        views_per_pose=views_per_pose,
        augmentation=augmentation,
        image_size=image_size,
        feature_dim=feature_dim,
        radius_range=(float(radius_range[0]), float(radius_range[1])),
        models=manifest_models,
    )
    _atomic_write(os.path.join(out_dir, "manifest.yaml"), manifest.to_yaml().encode())
    return manifest


def dataset_digest(out_dir: str, manifest: DatasetManifest) -> str:
    """SHA-256 over all bundle files, for regeneration checks."""
    h = hashlib.sha256()
    for rel in sorted(manifest.bundle_files()):
        with open(os.path.join(out_dir, rel), "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()
