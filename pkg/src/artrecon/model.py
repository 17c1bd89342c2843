"""Articulated object models: parts, revolute joints, kinematics, normalization.

A model is a single-level kinematic tree: one base part plus moving parts,
each attached to the base by one revolute joint.  Models are parsed from a
YAML spec (see docs in README / the bundled golden specs) and normalized so
the rest-pose shape fits a unit container.
"""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass, replace

import numpy as np
import yaml

from . import mesh as meshlib
from .geometry import normalize, rotate_about_pivot
from .mesh import MeshError, TriangleMesh
from .raycast import points_inside

CONTAINER_CENTER = np.array([0.5, 0.5, 0.5])

BUILTIN_CATEGORIES = ("eyeglasses", "laptop", "oven")


class ModelSpecError(ValueError):
    """Raised when a model spec document is malformed or inconsistent."""


@dataclass(frozen=True)
class Joint:
    """Revolute joint rotating `moving_part` about an axis through `pivot`."""

    id: int
    name: str
    base_part: int
    moving_part: int
    pivot: np.ndarray
    axis: np.ndarray
    limits: tuple[float, float]
    rest_angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pivot", np.asarray(self.pivot, dtype=np.float64).reshape(3))
        axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        n = np.linalg.norm(axis)
        if abs(n - 1.0) > 1e-3:
            raise ModelSpecError(f"joint {self.name!r}: axis norm {n:.6f} is not within 1e-3 of unit")
        object.__setattr__(self, "axis", axis / n)
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if not (lo <= 0.0 <= hi):
            raise ModelSpecError(f"joint {self.name!r}: limits [{lo}, {hi}] must bracket the rest angle 0")
        object.__setattr__(self, "limits", (lo, hi))
        if self.moving_part == self.base_part:
            raise ModelSpecError(f"joint {self.name!r}: moving part equals base part")


@dataclass(frozen=True)
class Part:
    id: int
    name: str
    mesh: TriangleMesh
    joint_id: int | None  # owning joint; None for the base part
    watertight: bool = True


@dataclass(frozen=True)
class Pose:
    """Per-joint rotation angles, radians, relative to the rest articulation."""

    angles: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angles", np.asarray(self.angles, dtype=np.float64).reshape(-1))

    @classmethod
    def zeros(cls, n_joints: int) -> "Pose":
        return cls(np.zeros(n_joints))

    def clamped(self, model: "ArticulatedModel") -> tuple["Pose", bool]:
        """Clamp angles to the model's joint limits; second value flags clamping."""
        if len(self.angles) != model.n_joints:
            raise ValueError(f"pose has {len(self.angles)} angles, model has {model.n_joints} joints")
        lo = np.array([j.limits[0] for j in model.joints])
        hi = np.array([j.limits[1] for j in model.joints])
        clipped = np.clip(self.angles, lo, hi)
        return Pose(clipped), bool(np.any(clipped != self.angles))


@dataclass(frozen=True)
class ArticulatedModel:
    category: str
    parts: tuple[Part, ...]
    joints: tuple[Joint, ...]

    def __post_init__(self):
        parts, joints = self.parts, self.joints
        if len(parts) < 2:
            raise ModelSpecError("model needs at least 2 parts")
        if len(joints) < 1:
            raise ModelSpecError("model needs at least 1 joint")
        part_ids = {p.id for p in parts}
        if len(part_ids) != len(parts):
            raise ModelSpecError("duplicate part ids")
        bases = [p for p in parts if p.joint_id is None]
        if len(bases) != 1:
            raise ModelSpecError(f"expected exactly one base part, found {len(bases)}")
        joint_by_moving = {}
        for j in joints:
            for ref in (j.base_part, j.moving_part):
                if ref not in part_ids:
                    raise ModelSpecError(f"dangling reference: joint {j.name!r} references part id {ref}")
            if j.moving_part in joint_by_moving:
                raise ModelSpecError(f"part id {j.moving_part} is moved by more than one joint")
            joint_by_moving[j.moving_part] = j.id
        for p in parts:
            if p.joint_id is None:
                if p.id in joint_by_moving:
                    raise ModelSpecError(f"base part {p.name!r} must not be moved by a joint")
            elif joint_by_moving.get(p.id) != p.joint_id:
                raise ModelSpecError(f"part {p.name!r} owning-joint mismatch")

    @property
    def n_parts(self) -> int:
        return len(self.parts)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def base_part(self) -> Part:
        return next(p for p in self.parts if p.joint_id is None)

    def part_by_id(self, part_id: int) -> Part:
        for p in self.parts:
            if p.id == part_id:
                return p
        raise KeyError(part_id)

    def part_to_joint(self) -> dict[int, int]:
        """Map moving-part id -> owning joint index. Base part is absent."""
        return {p.id: p.joint_id for p in self.parts if p.joint_id is not None}

    def rest_mesh(self) -> TriangleMesh:
        return meshlib.merge_meshes([p.mesh for p in self.parts])

    def rest_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.rest_mesh().bounds()


# ---------------------------------------------------------------------------
# Spec parsing / serialization


def _as_vec(value, n, where):
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.shape != (n,):
        raise ModelSpecError(f"{where}: expected {n} numbers, got {value!r}")
    return arr


def _build_primitive(block: dict, where: str) -> TriangleMesh:
    kinds = [k for k in ("box", "cylinder") if k in block]
    if len(kinds) != 1:
        raise ModelSpecError(f"{where}: primitive block must have exactly one of box/cylinder")
    kind = kinds[0]
    params = block[kind]
    if not isinstance(params, dict):
        raise ModelSpecError(f"{where}: {kind} parameters must be a mapping")
    if kind == "box":
        size = _as_vec(params.get("size"), 3, f"{where}.box.size")
        center = _as_vec(params.get("center", [0, 0, 0]), 3, f"{where}.box.center")
        prim = meshlib.box(size, center)
    else:
        try:
            prim = meshlib.cylinder(
                float(params["radius"]),
                float(params["height"]),
                axis=params.get("axis", "z"),
                center=_as_vec(params.get("center", [0, 0, 0]), 3, f"{where}.cylinder.center"),
                segments=int(params.get("segments", 24)),
            )
        except KeyError as exc:
            raise ModelSpecError(f"{where}: cylinder needs {exc.args[0]!r}") from None
    rot = block.get("rotate")
    if rot is not None:
        axis = _as_vec(rot.get("axis"), 3, f"{where}.rotate.axis")
        deg = float(rot.get("degrees", 0.0))
        pivot = _as_vec(rot.get("pivot", prim.vertices.mean(axis=0)), 3, f"{where}.rotate.pivot")
        verts = rotate_about_pivot(prim.vertices, pivot, normalize(axis), math.radians(deg))
        prim = TriangleMesh(verts, prim.faces)
    return prim


def parse_model(spec_text: str) -> ArticulatedModel:
    """Parse a model-spec document into a validated ArticulatedModel."""
    try:
        doc = yaml.safe_load(spec_text)
    except yaml.YAMLError as exc:
        raise ModelSpecError(f"malformed model spec: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelSpecError("model spec must be a mapping")
    for key in ("category", "parts", "joints"):
        if key not in doc:
            raise ModelSpecError(f"model spec missing {key!r}")
    category = str(doc["category"])

    raw_parts = doc["parts"]
    if not isinstance(raw_parts, list) or not raw_parts:
        raise ModelSpecError("parts must be a non-empty list")
    name_to_id: dict[str, int] = {}
    part_meshes: list[TriangleMesh] = []
    part_names: list[str] = []
    for i, entry in enumerate(raw_parts):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ModelSpecError(f"parts[{i}]: each part needs a name")
        name = str(entry["name"])
        if name in name_to_id:
            raise ModelSpecError(f"duplicate part name {name!r}")
        name_to_id[name] = i
        part_names.append(name)
        if "vertices" in entry or "faces" in entry:
            if "vertices" not in entry or "faces" not in entry:
                raise ModelSpecError(f"parts[{i}]: explicit mesh needs both vertices and faces")
            try:
                m = TriangleMesh(np.asarray(entry["vertices"], dtype=np.float64),
                                 np.asarray(entry["faces"], dtype=np.int64))
            except (MeshError, ValueError) as exc:
                raise ModelSpecError(f"parts[{i}] ({name!r}): {exc}") from exc
        elif "primitives" in entry:
            blocks = entry["primitives"]
            if not isinstance(blocks, list) or not blocks:
                raise ModelSpecError(f"parts[{i}]: primitives must be a non-empty list")
            prims = [_build_primitive(b, f"parts[{i}].primitives[{k}]") for k, b in enumerate(blocks)]
            m = meshlib.merge_meshes(prims)
        else:
            raise ModelSpecError(f"parts[{i}]: needs primitives or vertices/faces")
        part_meshes.append(m)

    raw_joints = doc["joints"]
    if not isinstance(raw_joints, list) or not raw_joints:
        raise ModelSpecError("joints must be a non-empty list")

    def resolve(ref, where):
        if isinstance(ref, int):
            if not (0 <= ref < len(raw_parts)):
                raise ModelSpecError(f"{where}: dangling reference to part id {ref}")
            return ref
        if isinstance(ref, str):
            if ref not in name_to_id:
                raise ModelSpecError(f"{where}: dangling reference to part {ref!r}")
            return name_to_id[ref]
        raise ModelSpecError(f"{where}: part reference must be a name or id")

    joints: list[Joint] = []
    for j, entry in enumerate(raw_joints):
        if not isinstance(entry, dict):
            raise ModelSpecError(f"joints[{j}]: must be a mapping")
        jtype = str(entry.get("type", "revolute"))
        if jtype != "revolute":
            raise ModelSpecError(f"joints[{j}]: joint type {jtype!r} not supported (revolute only)")
        for key in ("base", "moving", "pivot", "axis", "limits"):
            if key not in entry:
                raise ModelSpecError(f"joints[{j}]: missing {key!r}")
        joints.append(
            Joint(
                id=j,
                name=str(entry.get("name", f"joint{j}")),
                base_part=resolve(entry["base"], f"joints[{j}].base"),
                moving_part=resolve(entry["moving"], f"joints[{j}].moving"),
                pivot=_as_vec(entry["pivot"], 3, f"joints[{j}].pivot"),
                axis=_as_vec(entry["axis"], 3, f"joints[{j}].axis"),
                limits=tuple(_as_vec(entry["limits"], 2, f"joints[{j}].limits")),
            )
        )

    joint_by_moving = {jt.moving_part: jt.id for jt in joints}
    parts = tuple(
        Part(
            id=i,
            name=part_names[i],
            mesh=part_meshes[i],
            joint_id=joint_by_moving.get(i),
            watertight=meshlib.is_watertight(part_meshes[i]),
        )
        for i in range(len(raw_parts))
    )
    return ArticulatedModel(category=category, parts=parts, joints=tuple(joints))


def serialize_model(model: ArticulatedModel) -> str:
    """Serialize a model back to spec text (meshes become explicit arrays)."""
    doc = {
        "category": model.category,
        "parts": [
            {
                "name": p.name,
                "vertices": [[float(x) for x in v] for v in p.mesh.vertices],
                "faces": [[int(i) for i in f] for f in p.mesh.faces],
            }
            for p in model.parts
        ],
        "joints": [
            {
                "name": j.name,
                "base": model.part_by_id(j.base_part).name,
                "moving": model.part_by_id(j.moving_part).name,
                "pivot": [float(x) for x in j.pivot],
                "axis": [float(x) for x in j.axis],
                "limits": [float(j.limits[0]), float(j.limits[1])],
            }
            for j in model.joints
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def builtin_spec_text(category: str) -> str:
    if category not in BUILTIN_CATEGORIES:
        raise KeyError(f"no builtin spec {category!r}; choose from {BUILTIN_CATEGORIES}")
    return (importlib.resources.files("artrecon") / "specs" / f"{category}.yaml").read_text()


def load_builtin(category: str, normalized: bool = True) -> ArticulatedModel:
    model = parse_model(builtin_spec_text(category))
    return normalize_to_container(model) if normalized else model


# ---------------------------------------------------------------------------
# Normalization and kinematics


def normalize_to_container(model: ArticulatedModel) -> ArticulatedModel:
    """Rescale so the rest-pose AABB is centered at (.5,.5,.5) with longest side 1."""
    lo, hi = model.rest_bounds()
    extent = hi - lo
    longest = float(extent.max())
    if longest <= 0.0:
        raise ModelSpecError("degenerate model: zero extent in all axes")
    scale = 1.0 / longest
    center = (lo + hi) / 2.0

    def tf(points):
        return (np.asarray(points, dtype=np.float64) - center) * scale + CONTAINER_CENTER

    parts = tuple(
        replace(p, mesh=TriangleMesh(tf(p.mesh.vertices), p.mesh.faces)) for p in model.parts
    )
    joints = tuple(replace(j, pivot=tf(j.pivot)) for j in model.joints)
    return ArticulatedModel(category=model.category, parts=parts, joints=joints)


def forward_kinematics(model: ArticulatedModel, pose: Pose) -> dict[int, np.ndarray]:
    """Posed vertex arrays per part id. Base part is returned unchanged."""
    if len(pose.angles) != model.n_joints:
        raise ValueError(f"pose has {len(pose.angles)} angles, model has {model.n_joints} joints")
    out: dict[int, np.ndarray] = {}
    for p in model.parts:
        if p.joint_id is None:
            out[p.id] = p.mesh.vertices.copy()
        else:
            j = model.joints[p.joint_id]
            out[p.id] = rotate_about_pivot(p.mesh.vertices, j.pivot, j.axis, float(pose.angles[p.joint_id]))
    return out


def posed_part_meshes(model: ArticulatedModel, pose: Pose) -> dict[int, TriangleMesh]:
    verts = forward_kinematics(model, pose)
    return {p.id: TriangleMesh(verts[p.id], p.mesh.faces) for p in model.parts}


def posed_mesh(model: ArticulatedModel, pose: Pose) -> TriangleMesh:
    return meshlib.merge_meshes([m for _, m in sorted(posed_part_meshes(model, pose).items())])


def gt_occupancy(model: ArticulatedModel, pose: Pose, queries: np.ndarray) -> np.ndarray:
    """True per query point inside any posed part (ray-parity inside test)."""
    bad = [p.name for p in model.parts if not p.watertight]
    if bad:
        raise MeshError(f"gt_occupancy requires watertight parts; non-watertight: {bad}")
    posed = posed_part_meshes(model, pose)
    groups = [m.triangle_corners() for m in posed.values()]
    return points_inside(queries, groups)


def lattice_points(resolution: int) -> np.ndarray:
    """(R^3, 3) lattice node positions spanning [0,1]^3 inclusive.

    C-ordered over an (x, y, z) index grid, matching ScalarField.values.
    """
    axis = np.linspace(0.0, 1.0, resolution)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def occupancy_lattice(model: ArticulatedModel, pose: Pose, resolution: int) -> np.ndarray:
    """(R,R,R) boolean occupancy of the posed model on the standard lattice."""
    pts = lattice_points(resolution)
    return gt_occupancy(model, pose, pts).reshape(resolution, resolution, resolution)
