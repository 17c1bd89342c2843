"""Evaluation metrics and the seven-term training-style loss.

Chamfer convention used everywhere: bidirectional mean *squared* nearest
distance, reported x100.  Cross-entropy terms treat hard labels as exact
probabilities with the log argument clamped at 1e-6, so perfect predictions
score exactly zero while wrong ones stay finite.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field as dc_field, fields as dc_fields

import numpy as np
from scipy.spatial import cKDTree

from .canon import FeaturedPointCloud, aggregate_joint
from .synth import MapBundle

CE_EPSILON = 1e-6
DEFAULT_IOU_RESOLUTION = 64


@dataclass(frozen=True)
class LossWeights:
    """Per-term weights; all 1.0 except the mask BCE term at 0.1."""

    coord: float = 1.0          # L1
    mask_bce: float = 0.1       # L2
    vote_center: float = 1.0    # L3
    vote_rotation: float = 1.0  # L4
    consistency: float = 1.0    # L5
    part_ce: float = 1.0        # L6
    canonical: float = 1.0      # L7

    def __post_init__(self):
        for f in dc_fields(self):
            if getattr(self, f.name) < 0.0:
                raise ValueError(f"loss weight {f.name} must be non-negative")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in dc_fields(self))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**d)


@dataclass(frozen=True)
class LossBreakdown:
    terms: tuple[float, ...]  # L1..L7
    total: float
    single_view: bool = False  # consistency term zeroed: only one view given

    def __getitem__(self, i: int) -> float:
        return self.terms[i]


def chamfer(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean squared nearest-neighbor distance, x100."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("chamfer needs non-empty point sets")
    da, _ = cKDTree(b).query(a, k=1, workers=-1)
    db, _ = cKDTree(a).query(b, k=1, workers=-1)
    return 100.0 * (float(np.mean(da**2)) + float(np.mean(db**2)))


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Volumetric IoU of two same-lattice occupancy bitsets, in percent."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"occupancy resolution mismatch: {a.shape} vs {b.shape}")
    union = np.logical_or(a, b).sum()
    if union == 0:
        warnings.warn("IoU of two empty occupancies is degenerate (reported 100)", stacklevel=2)
        return 100.0
    inter = np.logical_and(a, b).sum()
    return 100.0 * float(inter) / float(union)


def coverage(cloud_points: np.ndarray, gt_samples: np.ndarray, radius: float) -> float:
    """Fraction of GT surface samples within `radius` of some cloud point."""
    cloud_points = np.asarray(cloud_points, dtype=np.float64).reshape(-1, 3)
    gt_samples = np.asarray(gt_samples, dtype=np.float64).reshape(-1, 3)
    if len(cloud_points) == 0 or len(gt_samples) == 0:
        raise ValueError("coverage needs non-empty point sets")
    d, _ = cKDTree(cloud_points).query(gt_samples, k=1, workers=-1)
    return float(np.mean(d <= radius))


def _clamped_neg_log(correct: np.ndarray) -> np.ndarray:
    """-log of exact-probability predictions: 0 where correct, -log(eps) where not."""
    return np.where(correct, 0.0, -np.log(CE_EPSILON))


def losses(
    pred_bundles: MapBundle | list[MapBundle],
    gt_bundles: MapBundle | list[MapBundle],
    pred_canonical: list[FeaturedPointCloud] | None = None,
    gt_canonical: list[FeaturedPointCloud] | None = None,
    weights: LossWeights = LossWeights(),
) -> LossBreakdown:
    """The seven loss terms over one or more corresponding view pairs.

    L1 coord MSE on GT foreground; L2 mask BCE; L3/L4 vote center/rotation
    MSE on GT foreground; L5 pairwise consistency of per-view aggregated
    joint parameters; L6 part-label CE on GT foreground; L7 canonical-cloud
    MSE (pred vs gt canonical clouds must correspond pointwise per view).
    """
    if isinstance(pred_bundles, MapBundle):
        pred_bundles = [pred_bundles]
    if isinstance(gt_bundles, MapBundle):
        gt_bundles = [gt_bundles]
    if len(pred_bundles) != len(gt_bundles):
        raise ValueError("pred/gt view counts differ")

    sq_coord, sq_center, sq_rot = [], [], []
    mask_correct, label_correct = [], []
    for pred, gt in zip(pred_bundles, gt_bundles):
        if pred.mask.shape != gt.mask.shape or pred.n_joints != gt.n_joints:
            raise ValueError("pred/gt bundle shapes differ")
        fg = gt.mask.astype(bool).ravel()
        dc = (pred.coords.reshape(-1, 3).astype(np.float64) - gt.coords.reshape(-1, 3))[fg]
        sq_coord.append((dc**2).sum(axis=1))
        nj = gt.n_joints
        dv = (pred.votes.reshape(-1, nj, 6).astype(np.float64) - gt.votes.reshape(-1, nj, 6))[fg]
        sq_center.append((dv[:, :, :3] ** 2).sum(axis=2).ravel())
        sq_rot.append((dv[:, :, 3:] ** 2).sum(axis=2).ravel())
        mask_correct.append((pred.mask == gt.mask).ravel())
        label_correct.append((pred.part_labels.ravel() == gt.part_labels.ravel())[fg])

    def mean_or_zero(chunks):
        flat = np.concatenate(chunks) if chunks else np.zeros(0)
        return float(flat.mean()) if len(flat) else 0.0

    l1 = mean_or_zero(sq_coord)
    l2 = mean_or_zero([_clamped_neg_log(np.concatenate(mask_correct))])
    l3 = mean_or_zero(sq_center)
    l4 = mean_or_zero(sq_rot)
    l6 = mean_or_zero([_clamped_neg_log(np.concatenate(label_correct))]) if any(
        len(c) for c in label_correct
    ) else 0.0

    # L5: pairwise distance between per-view aggregated joint parameters
    single_view = len(pred_bundles) < 2
    if single_view:
        l5 = 0.0
    else:
        from .canon import lift

        per_view_params = []  # (V, N_J, 6)
        for pred in pred_bundles:
            cloud = lift(pred)
            params = []
            for j in range(pred.n_joints):
                est = aggregate_joint(cloud, j)
                params.append(np.concatenate([est.center, est.rotation]))
            per_view_params.append(np.stack(params))
        per_view_params = np.stack(per_view_params)
        v = len(per_view_params)
        acc = []
        for i in range(v):
            for k in range(i + 1, v):
                diff = per_view_params[i] - per_view_params[k]
                acc.append((diff**2).sum(axis=1))
        l5 = float(np.concatenate(acc).mean())

    # L7: canonical cloud MSE
    if pred_canonical is None or gt_canonical is None:
        l7 = 0.0
    else:
        if len(pred_canonical) != len(gt_canonical):
            raise ValueError("canonical cloud view counts differ")
        sq = []
        for pc, gc in zip(pred_canonical, gt_canonical):
            if pc.size != gc.size:
                raise ValueError("canonical clouds must correspond pointwise")
            if pc.size:
                sq.append(((pc.points - gc.points) ** 2).sum(axis=1))
        l7 = mean_or_zero(sq)

    terms = (l1, l2, l3, l4, l5, l6, l7)
    total = float(np.dot(weights.as_tuple(), terms))
    return LossBreakdown(terms=terms, total=total, single_view=single_view)


# ---------------------------------------------------------------------------
# Evaluation reports


@dataclass
class EvalReport:
    """Per-trial records plus provenance; serializable as CSV and plain text."""

    columns: list[str]
    rows: list[list] = dc_field(default_factory=list)
    meta: dict = dc_field(default_factory=dict)

    def add(self, **values):
        self.rows.append([values.get(c, "") for c in self.columns])

    def column(self, name: str, where: dict | None = None) -> np.ndarray:
        ci = self.columns.index(name)
        rows = self.rows
        if where:
            idx = {k: self.columns.index(k) for k in where}
            rows = [r for r in rows if all(r[idx[k]] == v for k, v in where.items())]
        return np.array([float(r[ci]) for r in rows])

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        for key in sorted(self.meta):
            buf.write(f"# {key}: {self.meta[key]}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_csv_cell(v) for v in row) + "\n")
        return buf.getvalue().encode()

    def summary_table(self, group_by: str, value_columns: list[str]) -> str:
        gi = self.columns.index(group_by)
        groups = sorted({r[gi] for r in self.rows})
        lines = [f"{group_by:>12}  " + "  ".join(f"{c:>18}" for c in value_columns)]
        for g in groups:
            cells = []
            for c in value_columns:
                vals = self.column(c, where={group_by: g})
                cells.append(f"{vals.mean():9.4f} ± {vals.std():6.4f}")
            lines.append(f"{g!s:>12}  " + "  ".join(f"{c:>18}" for c in cells))
        return "\n".join(lines)


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
