"""Experiment orchestration: end-to-end reconstruction, sessions, sweeps, ablations.

The reconstruction pipeline is: corrupt -> lift -> aggregate joint votes ->
canonicalize per view -> union -> occupancy field -> marching cubes -> bind.
Sessions persist every stage artifact in one inspectable directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field as dc_field

import numpy as np
import yaml

from . import model as modellib
from .canon import (
    FeaturedPointCloud,
    JointEstimate,
    aggregate_joint,
    canonicalize_articulation,
    lift,
    union_views,
)
from .mesh import TriangleMesh, sample_surface
from .meshio import cloud_from_ply, cloud_to_ply, export_mesh, parse_obj
from .metrics import EvalReport, chamfer, iou
from .model import ArticulatedModel, Pose, occupancy_lattice, parse_model, serialize_model
from .noise import NoiseModel, preset
from .recon import (
    DEFAULT_FIELD_RESOLUTION,
    ScalarField,
    VoxelFeatureGrid,
    marching_cubes,
    occupancy_field,
    voxelize,
)
from .repose import JointFrame, SkinBinding, bind_mesh
from .synth import MapBundle, make_cameras, render_view

DEFAULT_RADIUS_RANGE = (1.6, 2.2)


class HarnessError(ValueError):
    """Validation failures in harness commands."""


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Core pipeline


@dataclass
class Reconstruction:
    cloud: FeaturedPointCloud            # aggregated canonical cloud
    per_view: list[FeaturedPointCloud]   # canonical clouds per view
    estimates: list[JointEstimate]
    grid: "VoxelFeatureGrid"             # per-voxel mean features over the union
    field: ScalarField
    mesh: TriangleMesh


def reconstruct_bundles(
    bundles: list[MapBundle],
    model: ArticulatedModel,
    noise: NoiseModel | None = None,
    field_resolution: int = DEFAULT_FIELD_RESOLUTION,
    weighted: bool = True,
    combined_centers: bool = True,
) -> Reconstruction:
    """Run the full aggregation + surfacing pipeline over corresponding views.

    Canonicalization always uses each view's own aggregated rotation (views
    articulate independently, so rotations cannot be shared).  Joint centers
    are static across poses; by default each view unrotates about the
    confidence-combined center, `combined_centers=False` keeps per-view
    centers (ablation switch).
    """
    if not bundles:
        raise HarnessError("need at least one bundle")
    corrupted = []
    for i, bundle in enumerate(bundles):
        bundle = bundle.with_view_id(i)
        if noise is not None:
            from .noise import corrupt

            bundle = corrupt(bundle, noise.with_seed(_derived_seed(noise.seed, i)))
        corrupted.append(bundle)
    clouds = [lift(b) for b in corrupted if b.foreground_count > 0]
    if not clouds:
        raise HarnessError("empty foreground in all views")

    n_joints = model.n_joints
    estimates = [aggregate_joint(clouds, j, weighted=weighted) for j in range(n_joints)]
    part_to_joint = model.part_to_joint()

    canonical = []
    for cloud in clouds:
        view_est = [aggregate_joint(cloud, j, weighted=weighted) for j in range(n_joints)]
        if combined_centers:
            view_est = [
                JointEstimate(
                    center=comb.center, rotation=ve.rotation,
                    total_weight=ve.total_weight, per_view=ve.per_view,
                )
                for comb, ve in zip(estimates, view_est)
            ]
        canonical.append(
            canonicalize_articulation(cloud, view_est, part_to_joint, n_parts=model.n_parts)
        )
    merged = union_views(canonical)
    grid = voxelize(merged)
    fld = occupancy_field(merged, field_resolution)
    mesh = marching_cubes(fld)
    return Reconstruction(
        cloud=merged, per_view=canonical, estimates=estimates,
        grid=grid, field=fld, mesh=mesh,
    )


def joint_frames_from_estimates(
    estimates: list[JointEstimate], model: ArticulatedModel
) -> list[JointFrame]:
    """Repose frames from estimates; axis sign-aligned to the model's convention.

    Near-zero estimated rotations cannot define an axis, so the model's
    declared axis fills in (recorded in session provenance).
    """
    frames = []
    for est, joint in zip(estimates, model.joints):
        axis = est.axis(fallback=joint.axis)
        if float(np.dot(axis, joint.axis)) < 0.0:
            axis = -axis
        frames.append(JointFrame(center=est.center, axis=axis))
    return frames


# ---------------------------------------------------------------------------
# Sessions


@dataclass
class Session:
    session_id: str
    model: ArticulatedModel
    cloud: FeaturedPointCloud
    joint_frames: list[JointFrame]
    mesh: TriangleMesh
    binding: SkinBinding
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.binding.size != self.mesh.n_vertices:
            raise HarnessError("binding and mesh vertex counts differ")

    def save(self, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "model.spec"), "w") as fh:
            fh.write(serialize_model(self.model))
        with open(os.path.join(out_dir, "cloud.ply"), "wb") as fh:
            fh.write(cloud_to_ply(self.cloud))
        with open(os.path.join(out_dir, "mesh.obj"), "wb") as fh:
            fh.write(export_mesh(self.mesh, "obj"))
        with open(os.path.join(out_dir, "binding.bin"), "wb") as fh:
            fh.write(self.binding.to_bytes())
        meta = dict(self.meta)
        meta["session_id"] = self.session_id
        meta["joint_frames"] = [
            {"center": [float(x) for x in f.center], "axis": [float(x) for x in f.axis]}
            for f in self.joint_frames
        ]
        with open(os.path.join(out_dir, "meta.yaml"), "w") as fh:
            yaml.safe_dump(meta, fh, sort_keys=True)

    @classmethod
    def load(cls, session_dir: str) -> "Session":
        try:
            with open(os.path.join(session_dir, "meta.yaml")) as fh:
                meta = yaml.safe_load(fh)
            with open(os.path.join(session_dir, "model.spec")) as fh:
                model = parse_model(fh.read())
            with open(os.path.join(session_dir, "cloud.ply"), "rb") as fh:
                cloud = cloud_from_ply(fh.read())
            with open(os.path.join(session_dir, "mesh.obj"), "rb") as fh:
                mesh = parse_obj(fh.read())
            with open(os.path.join(session_dir, "binding.bin"), "rb") as fh:
                binding = SkinBinding.from_bytes(fh.read())
        except FileNotFoundError as exc:
            raise HarnessError(f"missing or corrupt session: {exc}") from exc
        frames = [
            JointFrame(center=f["center"], axis=f["axis"]) for f in meta.pop("joint_frames")
        ]
        session_id = meta.pop("session_id")
        return cls(
            session_id=session_id, model=model, cloud=cloud,
            joint_frames=frames, mesh=mesh, binding=binding, meta=meta,
        )


# ---------------------------------------------------------------------------
# Commands


def cmd_gen_data(config: dict, out_dir: str, seed: int):
    """Generate a dataset per a config mapping (see README for the schema)."""
    from .synth import ScaleAugmentation, generate_dataset

    names = config.get("models")
    if not names:
        raise HarnessError("config needs a non-empty models list")
    models = []
    for name in names:
        if name in modellib.BUILTIN_CATEGORIES:
            models.append(modellib.load_builtin(name))
        elif os.path.exists(name):
            with open(name) as fh:
                models.append(modellib.normalize_to_container(parse_model(fh.read())))
        else:
            raise HarnessError(f"unknown model {name!r}: not a builtin nor a spec path")
    aug_cfg = config.get("augmentation", {})
    augmentation = ScaleAugmentation(
        enabled=bool(aug_cfg.get("enabled", True)),
        low=float(aug_cfg.get("low", 0.8)),
        high=float(aug_cfg.get("high", 1.25)),
    )
    return generate_dataset(
        models,
        poses_per_model=int(config.get("poses_per_model", 20)),
        views_per_pose=int(config.get("views_per_pose", 8)),
        augmentation=augmentation,
        out_dir=out_dir,
        seed=seed,
        image_size=int(config.get("image_size", 64)),
        feature_dim=int(config.get("feature_dim", 8)),
        radius_range=tuple(config.get("radius_range", DEFAULT_RADIUS_RANGE)),
    )


def cmd_reconstruct(
    bundle_paths: list[str],
    noise_name: str,
    out_dir: str | None,
    seed: int = 0,
    model_spec_path: str | None = None,
    field_resolution: int = DEFAULT_FIELD_RESOLUTION,
) -> Session:
    """Reconstruct a session from NMAP files produced by gen-data."""
    from .nmap import read_nmap

    if not bundle_paths:
        raise HarnessError("need at least one bundle path")
    categories = {os.path.basename(os.path.dirname(os.path.abspath(p))) for p in bundle_paths}
    if model_spec_path is None:
        if len(categories) > 1:
            raise HarnessError(f"category mismatch across bundles: {sorted(categories)}")
        model_spec_path = os.path.join(
            os.path.dirname(os.path.abspath(bundle_paths[0])), "model.yaml"
        )
        if not os.path.exists(model_spec_path):
            raise HarnessError(
                f"no model spec at {model_spec_path}; pass one explicitly"
            )
    with open(model_spec_path) as fh:
        model = parse_model(fh.read())

    bundles = [read_nmap(p, view_id=i) for i, p in enumerate(bundle_paths)]
    for b in bundles:
        if b.n_joints != model.n_joints or b.n_parts != model.n_parts:
            raise HarnessError("bundle joint/part counts do not match the model (category mismatch?)")
    noise = preset(noise_name, seed=seed)
    rec = reconstruct_bundles(bundles, model, noise=noise, field_resolution=field_resolution)
    frames = joint_frames_from_estimates(rec.estimates, model)
    binding = bind_mesh(rec.mesh, rec.cloud)
    session = Session(
        session_id=f"{model.category}-{noise_name}-v{len(bundles)}-s{seed}",
        model=model,
        cloud=rec.cloud,
        joint_frames=frames,
        mesh=rec.mesh,
        binding=binding,
        meta={
            "category": model.category,
            "noise": noise_name,
            "seed": seed,
            "view_count": len(bundles),
            "field_resolution": field_resolution,
            "bundles": [os.path.basename(p) for p in bundle_paths],
        },
    )
    if out_dir:
        session.save(out_dir)
    return session


@dataclass
class GtReference:
    """Cached ground truth for evaluation: rest surface samples + occupancy."""

    surface_samples: np.ndarray
    occupancy: np.ndarray

    @classmethod
    def build(cls, model: ArticulatedModel, resolution: int, n_samples: int = 10_000):
        return cls(
            surface_samples=sample_surface(model.rest_mesh(), n_samples, seed=4242),
            occupancy=occupancy_lattice(model, Pose.zeros(model.n_joints), resolution),
        )


def _trial_views(model, n_views, rng, image_size, radius_range):
    lo = np.array([j.limits[0] for j in model.joints])
    hi = np.array([j.limits[1] for j in model.joints])
    cams = make_cameras(
        n_views, radius_range, seed=int(rng.integers(2**31 - 1)),
        width=image_size, height=image_size,
    )
    bundles = []
    for vid, cam in enumerate(cams):
        pose = Pose(rng.uniform(lo, hi))
        bundles.append(render_view(model, pose, cam, view_id=vid))
    return bundles


def evaluate_reconstruction(rec: Reconstruction, ref: GtReference, sample_seed: int) -> tuple[float, float]:
    """(chamfer x100, IoU %) of a reconstruction against the GT reference."""
    recon_samples = sample_surface(rec.mesh, len(ref.surface_samples), seed=sample_seed)
    cd = chamfer(recon_samples, ref.surface_samples)
    overlap = iou(rec.field.occupancy(), ref.occupancy)
    return cd, overlap


def cmd_view_sweep(
    model: ArticulatedModel,
    view_counts: list[int],
    trials: int,
    noise_name: str,
    seed: int,
    image_size: int = 64,
    field_resolution: int = DEFAULT_FIELD_RESOLUTION,
    radius_range=DEFAULT_RADIUS_RANGE,
) -> tuple[EvalReport, dict]:
    """Reconstruction quality vs number of input views.

    Every trial renders fresh poses/cameras per view count, reconstructs
    under the noise preset, and scores CD/IoU against the rest-pose truth.
    Returns the per-trial report and a trend verdict.
    """
    if trials < 10:
        raise HarnessError("view sweep needs at least 10 trials")
    ref = GtReference.build(model, field_resolution)
    report = EvalReport(
        columns=["views", "trial", "seed", "cd", "iou"],
        meta={"noise": noise_name, "seed": seed, "category": model.category, "trials": trials},
    )
    for v in view_counts:
        for t in range(trials):
            trial_seed = _derived_seed(seed, v, t)
            rng = np.random.default_rng(trial_seed)
            bundles = _trial_views(model, v, rng, image_size, radius_range)
            noise = preset(noise_name, seed=trial_seed)
            rec = reconstruct_bundles(bundles, model, noise=noise, field_resolution=field_resolution)
            cd, ov = evaluate_reconstruction(rec, ref, sample_seed=trial_seed)
            report.add(views=v, trial=t, seed=trial_seed, cd=cd, iou=ov)

    means = {v: (report.column("cd", {"views": v}).mean(), report.column("iou", {"views": v}).mean())
             for v in view_counts}
    verdict = {"means": {v: {"cd": float(c), "iou": float(i)} for v, (c, i) in means.items()}}
    counts = sorted(view_counts)
    if len(counts) >= 2 and counts[0] == 1 and 2 in means:
        verdict["cd_1_to_2_improves_10pct"] = bool(means[2][0] <= 0.9 * means[1][0])
    if 2 in means and 4 in means:
        verdict["cd_4_within_5pct_of_2"] = bool(means[4][0] <= 1.05 * means[2][0])
    iou_series = [means[v][1] for v in counts if v in means]
    verdict["iou_nondecreasing_1pt"] = bool(
        all(b >= a - 1.0 for a, b in zip(iou_series, iou_series[1:]))
    )
    verdict["pass"] = all(v for k, v in verdict.items() if k != "means")
    return report, verdict


def cmd_ablate(
    model: ArticulatedModel,
    trials: int,
    noise_name: str,
    seed: int,
    view_counts: list[int] = (2,),
    image_size: int = 64,
    radius_range=DEFAULT_RADIUS_RANGE,
) -> tuple[EvalReport, dict]:
    """Paired ablation: weighted vs unweighted votes, combined vs per-view estimates.

    Joint-center error is measured against the model's true pivots; rows pair
    up within a trial so win rates are meaningful.
    """
    from .noise import corrupt

    report = EvalReport(
        columns=["views", "trial", "variant", "center_error"],
        meta={"noise": noise_name, "seed": seed, "category": model.category, "trials": trials},
    )
    pivots = np.stack([j.pivot for j in model.joints])
    wins_weighted = 0
    pairs = 0
    perview_errors = []
    combined_errors = []
    for v in view_counts:
        for t in range(trials):
            trial_seed = _derived_seed(seed, 1000 + v, t)
            rng = np.random.default_rng(trial_seed)
            bundles = _trial_views(model, v, rng, image_size, radius_range)
            noise = preset(noise_name, seed=trial_seed)
            clouds = []
            for i, b in enumerate(bundles):
                nb = corrupt(b, noise.with_seed(_derived_seed(noise.seed, i)))
                if nb.foreground_count:
                    clouds.append(lift(nb.with_view_id(i)))

            errors = {}
            for variant, weighted in (("weighted", True), ("unweighted", False)):
                ests = [aggregate_joint(clouds, j, weighted=weighted) for j in range(model.n_joints)]
                err = float(np.mean([np.linalg.norm(e.center - p) for e, p in zip(ests, pivots)]))
                errors[variant] = err
                report.add(views=v, trial=t, variant=variant, center_error=err)
            pairs += 1
            wins_weighted += errors["weighted"] < errors["unweighted"]
            combined_errors.append(errors["weighted"])

            # second switch: per-view estimates taken alone (no cross-view combine)
            pv = []
            for cloud in clouds:
                ests = [aggregate_joint(cloud, j) for j in range(model.n_joints)]
                pv.append(np.mean([np.linalg.norm(e.center - p) for e, p in zip(ests, pivots)]))
            perview_errors.append(float(np.mean(pv)))

    summary = {
        "weighted_win_rate": wins_weighted / pairs if pairs else 0.0,
        "weighted_wins": wins_weighted,
        "pairs": pairs,
        "mean_center_error": {
            variant: float(report.column("center_error", {"variant": variant}).mean())
            for variant in ("weighted", "unweighted")
        },
        "combined_vs_perview": {
            "combined": float(np.mean(combined_errors)),
            "per_view": float(np.mean(perview_errors)),
        },
    }
    return report, summary
