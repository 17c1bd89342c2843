"""Batched ray/triangle intersection (Moller-Trumbore) and parity inside-tests."""

from __future__ import annotations

import numpy as np

from .geometry import normalize

# Generic fixed parity direction: irrational-ish so axis-aligned geometry is
# never parallel to it.
PARITY_DIRECTION = normalize(np.array([0.5773502691896258, 0.30102999566398114, 0.1144729885849400]))

_BARY_TOL = 1e-10
_DET_TOL = 1e-12


def _intersect_chunk(origins: np.ndarray, dirs: np.ndarray, tris: np.ndarray):
    """Intersection quantities for Q rays against T triangles.

    origins (Q,3); dirs (Q,3) or (3,); tris (T,3,3).
    Returns u, v, t, det, each (Q,T).
    """
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    d = np.broadcast_to(np.asarray(dirs, dtype=np.float64), origins.shape) if np.ndim(dirs) == 1 else dirs

    pvec = np.cross(d[:, None, :], e2[None, :, :])        # (Q,T,3)
    det = np.einsum("tk,qtk->qt", e1, pvec)               # (Q,T)
    safe_det = np.where(np.abs(det) < _DET_TOL, 1.0, det)
    inv_det = 1.0 / safe_det

    tvec = origins[:, None, :] - v0[None, :, :]           # (Q,T,3)
    u = np.einsum("qtk,qtk->qt", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1[None, :, :])
    v = np.einsum("qtk,qk->qt", qvec, d) * inv_det
    t = np.einsum("qtk,tk->qt", qvec, e2) * inv_det
    return u, v, t, det


def first_hits(origins: np.ndarray, dirs: np.ndarray, tris: np.ndarray, chunk: int = 1024):
    """Closest intersection per ray.

    Returns (tri_index, t, u, v), each (Q,); tri_index is -1 on a miss.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    q = len(origins)
    hit_idx = np.full(q, -1, dtype=np.int64)
    hit_t = np.full(q, np.inf)
    hit_u = np.zeros(q)
    hit_v = np.zeros(q)
    if len(tris) == 0:
        return hit_idx, hit_t, hit_u, hit_v
    dirs = np.asarray(dirs, dtype=np.float64)
    per_ray_dirs = dirs.ndim == 2
    for lo in range(0, q, chunk):
        hi = min(lo + chunk, q)
        d = dirs[lo:hi] if per_ray_dirs else dirs
        u, v, t, det = _intersect_chunk(origins[lo:hi], d, tris)
        valid = (
            (np.abs(det) >= _DET_TOL)
            & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0)
            & (t > 1e-9)
        )
        t_masked = np.where(valid, t, np.inf)
        best = np.argmin(t_masked, axis=1)
        rows = np.arange(hi - lo)
        best_t = t_masked[rows, best]
        hit = np.isfinite(best_t)
        hit_idx[lo:hi][hit] = best[hit]
        hit_t[lo:hi][hit] = best_t[hit]
        hit_u[lo:hi][hit] = u[rows, best][hit]
        hit_v[lo:hi][hit] = v[rows, best][hit]
    return hit_idx, hit_t, hit_u, hit_v


def _parity_round(queries: np.ndarray, direction: np.ndarray, tri_groups: list[np.ndarray], chunk: int):
    """One parity round with a shared direction.

    Returns (inside_any (Q,), suspect (Q,)); suspect queries saw a hit too
    close to a triangle edge/plane to trust the count.
    """
    q = len(queries)
    inside = np.zeros(q, dtype=bool)
    suspect = np.zeros(q, dtype=bool)
    for tris in tri_groups:
        if len(tris) == 0:
            continue
        crossings = np.zeros(q, dtype=np.int64)
        for lo in range(0, q, chunk):
            hi = min(lo + chunk, q)
            u, v, t, det = _intersect_chunk(queries[lo:hi], direction, tris)
            w = 1.0 - u - v
            valid = (np.abs(det) >= _DET_TOL) & (u >= 0.0) & (v >= 0.0) & (w >= 0.0) & (t > 0.0)
            crossings[lo:hi] = valid.sum(axis=1)
            near_plane = np.abs(det) < _DET_TOL
            near_boundary = (
                (np.minimum(np.minimum(np.abs(u), np.abs(v)), np.abs(w)) < _BARY_TOL)
                | (np.abs(t) < _BARY_TOL)
            )
            plausible = (u > -_BARY_TOL) & (v > -_BARY_TOL) & (w > -_BARY_TOL) & (t > -_BARY_TOL)
            suspect[lo:hi] |= np.any((near_plane | near_boundary) & plausible, axis=1)
        inside |= crossings % 2 == 1
    return inside, suspect


def points_inside(queries: np.ndarray, tri_groups: list[np.ndarray], chunk: int = 2048, max_retries: int = 8) -> np.ndarray:
    """Ray-parity inside test against a union of closed meshes.

    A point is inside when its crossing count is odd for any group.  Queries
    with degenerate hits are retried with progressively jittered directions.
    """
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    result = np.zeros(len(queries), dtype=bool)
    pending = np.arange(len(queries))
    direction = PARITY_DIRECTION
    for attempt in range(max_retries + 1):
        inside, suspect = _parity_round(queries[pending], direction, tri_groups, chunk)
        settled = ~suspect
        result[pending[settled]] = inside[settled]
        pending = pending[suspect]
        if len(pending) == 0:
            return result
        jitter = np.array([np.sin(1.7 * (attempt + 1)), np.cos(2.3 * (attempt + 1)), np.sin(3.1 * (attempt + 1) + 0.5)])
        direction = normalize(PARITY_DIRECTION + 0.37 * (attempt + 1) / max_retries * jitter)
    # Remaining queries sit on the surface itself; keep the last parity answer.
    inside, _ = _parity_round(queries[pending], direction, tri_groups, chunk)
    result[pending] = inside
    return result
