import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from artrecon.model import Pose, load_builtin
from artrecon.synth import make_cameras, render_view


@pytest.fixture(scope="session")
def laptop():
    return load_builtin("laptop")


@pytest.fixture(scope="session")
def laptop_view(laptop):
    """One clean rendered laptop view at lid angle 0.7, with aux correspondences."""
    cam = make_cameras(1, (1.7, 1.7), seed=11)[0]
    bundle, aux = render_view(laptop, Pose([0.7]), cam, with_aux=True)
    return bundle, aux


@pytest.fixture()
def flat_bundle():
    """Synthetic 100x100 all-foreground GT bundle (1e4 pixels) for noise stats."""
    h = w = 100
    rng = np.random.default_rng(123)
    coords = rng.uniform(0.2, 0.8, size=(h, w, 3)).astype(np.float32)
    mask = np.ones((h, w), dtype=np.uint8)
    labels = (rng.random((h, w)) < 0.5).astype(np.uint16)
    votes = np.zeros((h, w, 1, 6), dtype=np.float32)
    votes[..., 0, :3] = 0.5
    votes[..., 0, 5] = 0.7
    conf = np.ones((h, w, 1), dtype=np.float32)
    feats = rng.normal(size=(h, w, 4)).astype(np.float32)
    from artrecon.synth import MapBundle

    return MapBundle(
        coords=coords, mask=mask, part_labels=labels, votes=votes,
        confidences=conf, features=feats, pose=np.array([0.7]), n_parts=2,
    )
