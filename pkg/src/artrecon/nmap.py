"""NMAP: the little-endian binary container for one rendered view.

Layout: magic "NMAP", u32 version=1, u32 H, W, N_J, N_P, C, f32 pose[N_J],
then row-major planes: f32 coords[H*W*3], u8 mask[H*W], u16 labels[H*W],
f32 votes[H*W*N_J*6], f32 conf[H*W*N_J], f32 features[H*W*C].
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .synth import MapBundle

MAGIC = b"NMAP"
VERSION = 1


class NmapError(ValueError):
    """Raised on malformed NMAP data."""


def bundle_to_bytes(bundle: MapBundle) -> bytes:
    h, w = bundle.height, bundle.width
    header = MAGIC + struct.pack(
        "<6I", VERSION, h, w, bundle.n_joints, bundle.n_parts, bundle.feature_dim
    )
    planes = [
        bundle.pose.astype("<f4").tobytes(),
        bundle.coords.astype("<f4").tobytes(),
        bundle.mask.astype("u1").tobytes(),
        bundle.part_labels.astype("<u2").tobytes(),
        bundle.votes.astype("<f4").tobytes(),
        bundle.confidences.astype("<f4").tobytes(),
        bundle.features.astype("<f4").tobytes(),
    ]
    return header + b"".join(planes)


def bundle_from_bytes(data: bytes, view_id: int = 0) -> MapBundle:
    if data[:4] != MAGIC:
        raise NmapError("bad magic; not an NMAP file")
    version, h, w, nj, np_count, c = struct.unpack_from("<6I", data, 4)
    if version != VERSION:
        raise NmapError(f"unsupported NMAP version {version}")
    off = 4 + 24

    def take(dtype, count, shape):
        nonlocal off
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr.reshape(shape).copy()

    pose = take("<f4", nj, (nj,))
    coords = take("<f4", h * w * 3, (h, w, 3))
    mask = take("u1", h * w, (h, w))
    labels = take("<u2", h * w, (h, w))
    votes = take("<f4", h * w * nj * 6, (h, w, nj, 6))
    conf = take("<f4", h * w * nj, (h, w, nj))
    feats = take("<f4", h * w * c, (h, w, c))
    if off != len(data):
        raise NmapError(f"trailing bytes: expected {off}, file has {len(data)}")
    return MapBundle(
        coords=coords,
        mask=mask,
        part_labels=labels,
        votes=votes,
        confidences=conf,
        features=feats,
        pose=pose,
        n_parts=int(np_count),
        view_id=view_id,
    )


def write_nmap(path: str, bundle: MapBundle, atomic: bool = True):
    data = bundle_to_bytes(bundle)
    if atomic:
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def read_nmap(path: str, view_id: int = 0) -> MapBundle:
    with open(path, "rb") as fh:
        return bundle_from_bytes(fh.read(), view_id=view_id)
