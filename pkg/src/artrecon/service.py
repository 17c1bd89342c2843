"""HTTP service over a persisted session: interactive reposing endpoints.

Responses are deterministic: identical requests produce byte-identical JSON
bodies (compute timing travels in the X-Compute-Ms header, never the body).
"""

from __future__ import annotations

import json
import threading
import time

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .harness import Session
from .recon import marching_cubes, occupancy_field
from .repose import repose_cloud, repose_mesh

STRATEGIES = ("mesh-skin", "cloud-recon")


class ReposeRequest(BaseModel):
    angles: list[float]
    strategy: str = "mesh-skin"


def _mesh_payload(mesh) -> dict:
    return {
        "vertices": [[float(x) for x in v] for v in mesh.vertices],
        "faces": [[int(i) for i in f] for f in mesh.faces],
    }


def _json_response(doc: dict, compute_ms: float | None = None) -> Response:
    body = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    headers = {}
    if compute_ms is not None:
        headers["X-Compute-Ms"] = f"{compute_ms:.3f}"
    return Response(content=body, media_type="application/json", headers=headers)


def create_app(session: Session) -> FastAPI:
    app = FastAPI(title="artrecon repose service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    model = session.model
    limits_lo = np.array([j.limits[0] for j in model.joints])
    limits_hi = np.array([j.limits[1] for j in model.joints])
    part_to_joint = model.part_to_joint()
    recon_gate = threading.Semaphore(2)  # cap concurrent cloud-recon memory
    field_resolution = int(session.meta.get("field_resolution", 64))

    @app.get("/healthz")
    def healthz():
        return _json_response({"status": "ok"})

    @app.get("/session")
    def session_info():
        return _json_response(
            {
                "session_id": session.session_id,
                "category": model.category,
                "n_joints": model.n_joints,
                "n_parts": model.n_parts,
                "cloud_size": session.cloud.size,
                "vertex_count": session.mesh.n_vertices,
                "face_count": session.mesh.n_faces,
                "provenance": {k: session.meta[k] for k in sorted(session.meta)},
            }
        )

    @app.get("/joints")
    def joints():
        return _json_response(
            {
                "joints": [
                    {
                        "id": j.id,
                        "name": j.name,
                        "axis": [float(x) for x in session.joint_frames[j.id].axis],
                        "center": [float(x) for x in session.joint_frames[j.id].center],
                        "limits": [j.limits[0], j.limits[1]],
                        "initial": 0.0,
                    }
                    for j in model.joints
                ]
            }
        )

    @app.get("/mesh")
    def canonical_mesh():
        return _json_response(
            {
                "mesh": _mesh_payload(session.mesh),
                "vertex_count": session.mesh.n_vertices,
                "face_count": session.mesh.n_faces,
                "strategy": "canonical",
            }
        )

    @app.post("/repose")
    def repose(request: ReposeRequest, strict: int = 0):
        if len(request.angles) != model.n_joints:
            raise HTTPException(
                status_code=400,
                detail=f"expected {model.n_joints} angles, got {len(request.angles)}",
            )
        if request.strategy not in STRATEGIES:
            raise HTTPException(
                status_code=422,
                detail=f"unknown strategy {request.strategy!r}; choose from {list(STRATEGIES)}",
            )
        angles = np.asarray(request.angles, dtype=np.float64)
        clipped = np.clip(angles, limits_lo, limits_hi)
        clamped = bool(np.any(clipped != angles))
        if clamped and strict:
            raise HTTPException(status_code=422, detail="angles outside joint limits (strict mode)")

        start = time.perf_counter()
        if request.strategy == "mesh-skin":
            mesh = repose_mesh(
                session.mesh, session.binding, session.joint_frames, part_to_joint, clipped
            )
        else:
            with recon_gate:
                cloud = repose_cloud(session.cloud, session.joint_frames, part_to_joint, clipped)
                mesh = marching_cubes(occupancy_field(cloud, field_resolution))
        compute_ms = (time.perf_counter() - start) * 1000.0

        return _json_response(
            {
                "strategy": request.strategy,
                "clamped": clamped,
                "angles": [float(a) for a in clipped],
                "vertex_count": mesh.n_vertices,
                "face_count": mesh.n_faces,
                "mesh": _mesh_payload(mesh),
            },
            compute_ms=compute_ms,
        )

    return app
