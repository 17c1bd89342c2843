"""Prediction-noise oracle: corrupt ground-truth bundles with calibrated error.

Confidences are set to exp(-kappa * e^2) where e is the magnitude of the 6D
vote error injected at that pixel, so they anti-correlate with the error and
confidence-weighted aggregation has something real to exploit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .synth import MapBundle


@dataclass(frozen=True)
class NoiseModel:
    sigma_coord: float = 0.0      # container units
    p_mask_flip: float = 0.0
    sigma_center: float = 0.0     # container units
    sigma_rot: float = 0.0        # radians, axis-angle perturbation
    p_part_mislabel: float = 0.0
    kappa: float = 1.0            # confidence sharpness, > 0
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_coord", "sigma_center", "sigma_rot"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("p_mask_flip", "p_part_mislabel"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be > 0")

    def with_seed(self, seed: int) -> "NoiseModel":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {
            "sigma_coord": self.sigma_coord,
            "p_mask_flip": self.p_mask_flip,
            "sigma_center": self.sigma_center,
            "sigma_rot": self.sigma_rot,
            "p_part_mislabel": self.p_part_mislabel,
            "kappa": self.kappa,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        return cls(**d)


def preset(name: str, seed: int = 0) -> NoiseModel:
    if name == "clean":
        return NoiseModel(seed=seed)
    if name == "mild":
        return NoiseModel(
            sigma_coord=0.005, p_mask_flip=0.01, sigma_center=0.005,
            sigma_rot=0.02, p_part_mislabel=0.01, kappa=800.0, seed=seed,
        )
    if name == "heavy":
        return NoiseModel(
            sigma_coord=0.02, p_mask_flip=0.05, sigma_center=0.02,
            sigma_rot=0.08, p_part_mislabel=0.05, kappa=50.0, seed=seed,
        )
    raise KeyError(f"unknown noise preset {name!r} (clean|mild|heavy)")


PRESET_NAMES = ("clean", "mild", "heavy")

COORD_CLAMP = (-0.1, 1.1)


def _silhouette_boundary(mask: np.ndarray) -> np.ndarray:
    """Indices (flat) of foreground pixels 4-adjacent to background."""
    fg = mask.astype(bool)
    pad = np.pad(fg, 1, constant_values=False)
    interior = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    boundary = fg & ~interior
    return np.flatnonzero(boundary.ravel())


def corrupt(bundle: MapBundle, noise: NoiseModel) -> MapBundle:
    """Apply the noise model to a ground-truth bundle. Deterministic per seed."""
    h, w, nj = bundle.height, bundle.width, bundle.n_joints
    n_px = h * w
    fg0 = bundle.mask.ravel().astype(bool)
    if fg0.any() and not np.allclose(bundle.confidences.reshape(n_px, nj)[fg0], 1.0):
        raise ValueError("corrupt expects a ground-truth bundle (confidences 1 on foreground)")

    rng = np.random.default_rng(noise.seed)
    # fixed draw order keeps output bit-stable for a given (bundle, noise)
    coord_noise = rng.normal(0.0, 1.0, size=(n_px, 3)) * noise.sigma_coord
    center_noise = rng.normal(0.0, 1.0, size=(n_px, nj, 3)) * noise.sigma_center
    rot_noise = rng.normal(0.0, 1.0, size=(n_px, nj, 3)) * noise.sigma_rot
    flip_draw = rng.random(n_px)
    mislabel_draw = rng.random(n_px)
    mislabel_label = rng.integers(0, bundle.n_parts, size=n_px)
    boundary_pick = rng.integers(0, 2**31 - 1, size=n_px)
    boundary_jitter = rng.normal(0.0, 1.0, size=(n_px, 3)) * noise.sigma_coord
    # hallucinated-pixel votes: uniform centers, uniform-direction rotations
    garbage_center = rng.random(size=(n_px, nj, 3))
    garbage_dir = rng.normal(size=(n_px, nj, 3))
    garbage_dir /= np.maximum(np.linalg.norm(garbage_dir, axis=2, keepdims=True), 1e-12)
    garbage_rot = garbage_dir * rng.uniform(0.0, np.pi, size=(n_px, nj, 1))

    coords = bundle.coords.reshape(n_px, 3).astype(np.float64)
    votes = bundle.votes.reshape(n_px, nj, 6).astype(np.float64)
    labels = bundle.part_labels.ravel().copy()
    mask = fg0.copy()

    flip = flip_draw < noise.p_mask_flip
    flipped_off = fg0 & flip
    flipped_on = ~fg0 & flip
    boundary = _silhouette_boundary(bundle.mask)
    if len(boundary) == 0:
        flipped_on[:] = False
    mask[flipped_off] = False
    mask[flipped_on] = True

    # Flipped-on pixels are hallucinations: coords land near the silhouette
    # boundary (with label copied from it), but their votes are garbage --
    # uniform centers and rotations -- so their confidence is naturally tiny.
    features = bundle.features.reshape(n_px, -1).astype(np.float64)
    on_idx = np.flatnonzero(flipped_on)
    if len(on_idx):
        src = boundary[boundary_pick[on_idx] % len(boundary)]
        coords[on_idx] = coords[src] + boundary_jitter[on_idx]
        labels[on_idx] = labels[src]
        features[on_idx] = features[src]

    live = np.flatnonzero(mask)
    coords[live] += coord_noise[live]
    np.clip(coords, COORD_CLAMP[0], COORD_CLAMP[1], out=coords)

    gt_votes = bundle.votes.reshape(n_px, nj, 6).astype(np.float64)
    votes[live, :, :3] += center_noise[live]
    votes[live, :, 3:] += rot_noise[live]
    err_sq = (center_noise**2).sum(axis=2) + (rot_noise**2).sum(axis=2)  # (n_px, nj)
    if len(on_idx):
        votes[on_idx, :, :3] = garbage_center[on_idx]
        votes[on_idx, :, 3:] = garbage_rot[on_idx]
        diff = votes[on_idx] - gt_votes[src]
        err_sq[on_idx] = (diff**2).sum(axis=2)
    conf = np.zeros((n_px, nj))
    conf[live] = np.exp(-noise.kappa * err_sq[live])

    mislabel = mask & (mislabel_draw < noise.p_part_mislabel)
    labels[mislabel] = mislabel_label[mislabel].astype(labels.dtype)

    # dead pixels carry no payload
    dead = ~mask
    coords[dead] = 0.0
    votes[dead] = 0.0
    labels[dead] = 0
    features[dead] = 0.0

    return MapBundle(
        coords=coords.reshape(h, w, 3),
        mask=mask.reshape(h, w).astype(np.uint8),
        part_labels=labels.reshape(h, w),
        votes=votes.reshape(h, w, nj, 6),
        confidences=conf.reshape(h, w, nj),
        features=features.reshape(bundle.features.shape),
        pose=bundle.pose,
        n_parts=bundle.n_parts,
        view_id=bundle.view_id,
    )
