"""Lift map bundles to point clouds, aggregate joint votes, canonicalize, union.

This is the correspondence-free aggregation core: every view's cloud is
"unrotated" to the rest articulation using confidence-weighted joint votes,
after which clouds from different views and poses can simply be concatenated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import normalize, rotation_matrix_from_axis_angle, wrap_axis_angle
from .synth import MapBundle


class JointUnobservedError(ValueError):
    """Raised when no point carries confidence for a requested joint."""


@dataclass(frozen=True)
class FeaturedPointCloud:
    points: np.ndarray        # (N,3) f8
    features: np.ndarray      # (N,C) f8
    part_labels: np.ndarray   # (N,)  i4
    votes: np.ndarray         # (N,N_J,6) f8
    confidences: np.ndarray   # (N,N_J)   f8
    source_view: np.ndarray   # (N,)  i4

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=np.float64).reshape(-1, 3))
        n = len(self.points)
        feats = np.asarray(self.features, dtype=np.float64)
        c = feats.shape[-1] if feats.ndim >= 2 else (feats.size // n if n else 0)
        object.__setattr__(self, "features", feats.reshape(n, c))
        object.__setattr__(self, "part_labels", np.asarray(self.part_labels, dtype=np.int32).reshape(n))
        votes = np.asarray(self.votes, dtype=np.float64)
        nj = votes.shape[-2] if votes.ndim >= 2 else (votes.size // (6 * n) if n else 0)
        object.__setattr__(self, "votes", votes.reshape(n, nj, 6))
        object.__setattr__(
            self, "confidences", np.asarray(self.confidences, dtype=np.float64).reshape(n, nj)
        )
        object.__setattr__(self, "source_view", np.asarray(self.source_view, dtype=np.int32).reshape(n))

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    @property
    def n_joints(self) -> int:
        return self.votes.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def view_ids(self) -> np.ndarray:
        return np.unique(self.source_view)

    def from_view(self, view_id: int) -> "FeaturedPointCloud":
        sel = self.source_view == view_id
        return FeaturedPointCloud(
            self.points[sel], self.features[sel], self.part_labels[sel],
            self.votes[sel], self.confidences[sel], self.source_view[sel],
        )

    def with_points(self, points: np.ndarray) -> "FeaturedPointCloud":
        return replace(self, points=np.asarray(points, dtype=np.float64))


@dataclass(frozen=True)
class JointEstimate:
    """Aggregated joint center and axis-angle rotation for one joint."""

    center: np.ndarray
    rotation: np.ndarray        # axis-angle, wrapped to |r| <= pi
    total_weight: float
    per_view: tuple = field(default_factory=tuple)  # (view_id, center, rotation, weight)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3))
        if self.total_weight <= 0.0:
            raise JointUnobservedError("joint estimate needs positive total weight")

    @property
    def angle(self) -> float:
        return float(np.linalg.norm(self.rotation))

    def axis(self, fallback: np.ndarray | None = None) -> np.ndarray:
        """Unit rotation axis; `fallback` is used when the angle is ~0."""
        if self.angle > 1e-8:
            return self.rotation / self.angle
        if fallback is not None:
            return normalize(fallback)
        raise ValueError("rotation too small to define an axis and no fallback given")


def lift(bundle: MapBundle) -> FeaturedPointCloud:
    """One point per foreground pixel, row-major order, fields copied verbatim."""
    fg = bundle.mask.ravel().astype(bool)
    n = int(fg.sum())
    if n == 0:
        warnings.warn("lifting an all-background bundle produces an empty cloud", stacklevel=2)
    nj = bundle.n_joints
    return FeaturedPointCloud(
        points=bundle.coords.reshape(-1, 3)[fg],
        features=bundle.features.reshape(len(fg), -1)[fg],
        part_labels=bundle.part_labels.ravel()[fg].astype(np.int32),
        votes=bundle.votes.reshape(-1, nj, 6)[fg],
        confidences=bundle.confidences.reshape(-1, nj)[fg],
        source_view=np.full(n, bundle.view_id, dtype=np.int32),
    )


def aggregate_joint(
    clouds: FeaturedPointCloud | list[FeaturedPointCloud],
    joint: int,
    weighted: bool = True,
) -> JointEstimate:
    """Confidence-weighted mean of the 6D votes for one joint.

    Per-view estimates are computed first (weights normalized within a view),
    then combined weighted by each view's total confidence.  `weighted=False`
    gives every vote unit weight, for ablation.
    """
    if isinstance(clouds, FeaturedPointCloud):
        clouds = [clouds]
    per_view = []
    for cloud in clouds:
        for vid in cloud.view_ids():
            sub = cloud.from_view(int(vid))
            w = sub.confidences[:, joint] if weighted else np.ones(sub.size)
            total = float(w.sum())
            if total <= 0.0:
                continue
            wn = w / total
            center = wn @ sub.votes[:, joint, :3]
            rot = wn @ sub.votes[:, joint, 3:]
            per_view.append((int(vid), center, rot, total))
    if not per_view:
        raise JointUnobservedError(f"joint {joint} unobserved: all confidences are zero")
    weights = np.array([pv[3] for pv in per_view])
    wn = weights / weights.sum()
    center = wn @ np.array([pv[1] for pv in per_view])
    rot = wrap_axis_angle(wn @ np.array([pv[2] for pv in per_view]))
    return JointEstimate(
        center=center,
        rotation=rot,
        total_weight=float(weights.sum()),
        per_view=tuple((vid, c.copy(), r.copy(), float(t)) for vid, c, r, t in per_view),
    )


def aggregate_all_joints(
    clouds: FeaturedPointCloud | list[FeaturedPointCloud], weighted: bool = True
) -> list[JointEstimate]:
    first = clouds[0] if isinstance(clouds, list) else clouds
    return [aggregate_joint(clouds, j, weighted=weighted) for j in range(first.n_joints)]


def canonicalize_articulation(
    cloud: FeaturedPointCloud,
    estimates,
    part_to_joint: dict[int, int],
    n_parts: int | None = None,
) -> FeaturedPointCloud:
    """Unrotate each moving part by the inverse of its joint's estimated rotation.

    `estimates` indexes JointEstimate by joint id (list or dict).  Points
    labeled with a part absent from `part_to_joint` belong to the base and
    pass through unchanged; labels outside [0, n_parts) are an error.
    """
    if n_parts is not None:
        bad = (cloud.part_labels < 0) | (cloud.part_labels >= n_parts)
        if np.any(bad):
            raise ValueError(f"labels reference unknown parts: {np.unique(cloud.part_labels[bad])}")
    points = cloud.points.copy()
    for part_id, joint_id in part_to_joint.items():
        sel = cloud.part_labels == part_id
        if not np.any(sel):
            continue
        est = estimates[joint_id]
        rot = rotation_matrix_from_axis_angle(-est.rotation)
        points[sel] = (points[sel] - est.center) @ rot.T + est.center
    return cloud.with_points(points)


def union_views(clouds: list[FeaturedPointCloud]) -> FeaturedPointCloud:
    """Set union of canonical clouds: plain concatenation, views kept apart by id."""
    if not clouds:
        raise ValueError("union of zero clouds")
    if len(clouds) == 1:
        return clouds[0]
    dims = {c.feature_dim for c in clouds}
    if len(dims) > 1:
        raise ValueError(f"feature dims differ across clouds: {sorted(dims)}")
    njs = {c.n_joints for c in clouds}
    if len(njs) > 1:
        raise ValueError(f"joint counts differ across clouds: {sorted(njs)}")
    return FeaturedPointCloud(
        points=np.vstack([c.points for c in clouds]),
        features=np.vstack([c.features for c in clouds]),
        part_labels=np.concatenate([c.part_labels for c in clouds]),
        votes=np.vstack([c.votes for c in clouds]),
        confidences=np.vstack([c.confidences for c in clouds]),
        source_view=np.concatenate([c.source_view for c in clouds]),
    )
