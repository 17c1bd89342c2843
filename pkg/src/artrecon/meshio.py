"""Deterministic mesh and point-cloud serialization: OBJ, PLY, mesh-JSON.

All writers are bit-exact for identical inputs.  The cloud PLY uses double
properties so a saved session reloads with field-exact equality.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .canon import FeaturedPointCloud
from .mesh import TriangleMesh
from .recon import ScalarField

MESH_FORMATS = ("obj", "ply", "json")


class MeshIOError(ValueError):
    """Raised on unknown formats or malformed mesh payloads."""


def export_mesh(mesh: TriangleMesh, fmt: str, part_assignment=None) -> bytes:
    fmt = fmt.lower()
    if fmt == "obj":
        return _to_obj(mesh)
    if fmt == "ply":
        return _to_ply(mesh)
    if fmt == "json":
        return mesh_json_bytes(mesh, part_assignment)
    raise MeshIOError(f"unknown mesh format {fmt!r}; choose from {MESH_FORMATS}")


def _to_obj(mesh: TriangleMesh) -> bytes:
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    return ("\n".join(lines) + "\n").encode()


def parse_obj(data: bytes) -> TriangleMesh:
    verts, faces = [], []
    for line in data.decode().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(tok.split("/")[0]) - 1 for tok in parts[1:4]])
    if not verts:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64))


def _to_ply(mesh: TriangleMesh) -> bytes:
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property float x\nproperty float y\nproperty float z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    ).encode()
    body = mesh.vertices.astype("<f4").tobytes()
    face_rec = np.empty(mesh.n_faces, dtype=[("n", "u1"), ("idx", "<i4", 3)])
    face_rec["n"] = 3
    face_rec["idx"] = mesh.faces
    return header + body + face_rec.tobytes()


def parse_ply_mesh(data: bytes) -> TriangleMesh:
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise MeshIOError("not a PLY payload")
    header = data[:end].decode()
    n_vert = n_face = 0
    for line in header.splitlines():
        tok = line.split()
        if tok[:2] == ["element", "vertex"]:
            n_vert = int(tok[2])
        elif tok[:2] == ["element", "face"]:
            n_face = int(tok[2])
    off = end + len(b"end_header\n")
    verts = np.frombuffer(data, dtype="<f4", count=n_vert * 3, offset=off).reshape(-1, 3)
    off += verts.nbytes
    face_rec = np.frombuffer(data, dtype=[("n", "u1"), ("idx", "<i4", 3)], count=n_face, offset=off)
    if n_face and not np.all(face_rec["n"] == 3):
        raise MeshIOError("only triangle faces supported")
    return TriangleMesh(verts.astype(np.float64), face_rec["idx"].astype(np.int64))


def mesh_json_bytes(mesh: TriangleMesh, part_assignment=None) -> bytes:
    doc = {
        "vertices": [[float(x) for x in v] for v in mesh.vertices],
        "faces": [[int(i) for i in f] for f in mesh.faces],
    }
    if part_assignment is not None:
        doc["part_assignment"] = [int(p) for p in np.asarray(part_assignment).reshape(-1)]
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def parse_mesh_json(data: bytes) -> tuple[TriangleMesh, np.ndarray | None]:
    doc = json.loads(data.decode())
    mesh = TriangleMesh(
        np.asarray(doc["vertices"], dtype=np.float64).reshape(-1, 3),
        np.asarray(doc["faces"], dtype=np.int64).reshape(-1, 3),
    )
    pa = doc.get("part_assignment")
    return mesh, (np.asarray(pa, dtype=np.int64) if pa is not None else None)


# ---------------------------------------------------------------------------
# Featured point cloud PLY (double precision, extra properties)


def cloud_to_ply(cloud: FeaturedPointCloud) -> bytes:
    c = cloud.feature_dim
    nj = cloud.n_joints
    props = ["x", "y", "z"]
    props += [f"feature_{i}" for i in range(c)]
    props += ["part_label", "source_view"]
    for j in range(nj):
        props += [f"vote{j}_{k}" for k in range(6)]
    props += [f"confidence_{j}" for j in range(nj)]
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"comment feature_dim {c} n_joints {nj}\n"
        f"element vertex {cloud.size}\n"
        + "".join(f"property double {p}\n" for p in props)
        + "end_header\n"
    ).encode()
    table = np.hstack(
        [
            cloud.points,
            cloud.features,
            cloud.part_labels[:, None].astype(np.float64),
            cloud.source_view[:, None].astype(np.float64),
            cloud.votes.reshape(cloud.size, nj * 6),
            cloud.confidences,
        ]
    )
    return header + table.astype("<f8").tobytes()


def cloud_from_ply(data: bytes) -> FeaturedPointCloud:
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise MeshIOError("not a PLY payload")
    header = data[:end].decode()
    c = nj = n = None
    for line in header.splitlines():
        tok = line.split()
        if tok[:2] == ["comment", "feature_dim"]:
            c, nj = int(tok[2]), int(tok[4])
        elif tok[:2] == ["element", "vertex"]:
            n = int(tok[2])
    if c is None or n is None:
        raise MeshIOError("cloud PLY missing feature_dim comment or vertex element")
    width = 3 + c + 2 + nj * 6 + nj
    off = end + len(b"end_header\n")
    table = np.frombuffer(data, dtype="<f8", count=n * width, offset=off).reshape(n, width)
    pos = 0

    def take(k):
        nonlocal pos
        block = table[:, pos : pos + k]
        pos += k
        return block

    points = take(3)
    features = take(c)
    labels = take(1).reshape(-1).astype(np.int32)
    views = take(1).reshape(-1).astype(np.int32)
    votes = take(nj * 6).reshape(n, nj, 6)
    conf = take(nj)
    return FeaturedPointCloud(points, features, labels, votes, conf, views)


# ---------------------------------------------------------------------------
# Scalar field dump (debugging)

_FIELD_MAGIC = b"FLD1"


def field_to_bytes(field: ScalarField) -> bytes:
    header = _FIELD_MAGIC + struct.pack("<If", field.resolution, field.iso)
    return header + field.values.astype("<f4").tobytes()


def field_from_bytes(data: bytes) -> ScalarField:
    if data[:4] != _FIELD_MAGIC:
        raise MeshIOError("not a field dump")
    r, iso = struct.unpack_from("<If", data, 4)
    values = np.frombuffer(data, dtype="<f4", count=r**3, offset=12).astype(np.float64)
    return ScalarField(values.reshape(r, r, r), iso=float(iso))
