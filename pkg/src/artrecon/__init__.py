"""Animatable 3D reconstruction of articulated objects.

Pipeline: per-view coordinate maps of an articulated object (observed at
different joint angles) are lifted to point clouds, each view's articulation
is canonicalized via confidence-weighted joint votes, the views are unioned
in a shared unit container, and an isosurface is extracted.  The result can
be reposed to arbitrary joint angles, either on the point cloud before
surfacing or directly on the mesh via rigid skinning.
"""

__version__ = "0.1.0"
