import numpy as np
import pytest

from artrecon.mesh import MeshError, TriangleMesh
from artrecon.model import (
    BUILTIN_CATEGORIES,
    ArticulatedModel,
    ModelSpecError,
    Pose,
    forward_kinematics,
    gt_occupancy,
    load_builtin,
    normalize_to_container,
    parse_model,
    posed_part_meshes,
    serialize_model,
)

from oracles import rotate_points_scipy, winding_number_inside

MINIMAL_LAPTOP = """
category: laptop
parts:
  - name: base
    primitives:
      - box: {size: [1.0, 0.6, 0.1], center: [0.0, -0.3, 0.05]}
  - name: lid
    primitives:
      - box: {size: [1.0, 0.6, 0.1], center: [0.0, 0.3, 0.05]}
joints:
  - name: hinge
    base: base
    moving: lid
    pivot: [0.0, 0.0, 0.05]
    axis: [1.0, 0.0, 0.0]
    limits: [-0.5, 2.0]
"""


def test_parse_minimal_laptop():
    m = parse_model(MINIMAL_LAPTOP)
    assert m.n_parts == 2 and m.n_joints == 1
    assert m.base_part.name == "base"
    assert m.parts[1].joint_id == 0


def test_parse_dangling_reference():
    bad = MINIMAL_LAPTOP.replace("moving: lid", "moving: 99")
    with pytest.raises(ModelSpecError, match="dangling reference"):
        parse_model(bad)


def test_parse_eyeglasses_counts():
    m = load_builtin("eyeglasses", normalized=False)
    assert m.n_parts == 3 and m.n_joints == 2


def test_parse_rejects_prismatic():
    bad = MINIMAL_LAPTOP.replace("pivot:", "type: prismatic\n    pivot:")
    with pytest.raises(ModelSpecError, match="revolute"):
        parse_model(bad)


def test_parse_normalizes_slightly_off_axis():
    txt = MINIMAL_LAPTOP.replace("axis: [1.0, 0.0, 0.0]", "axis: [1.0005, 0.0, 0.0]")
    m = parse_model(txt)
    assert np.linalg.norm(m.joints[0].axis) == pytest.approx(1.0, abs=1e-12)


def test_parse_rejects_far_off_axis():
    txt = MINIMAL_LAPTOP.replace("axis: [1.0, 0.0, 0.0]", "axis: [1.5, 0.0, 0.0]")
    with pytest.raises(ModelSpecError, match="axis"):
        parse_model(txt)


def test_parse_rejects_limits_not_bracketing_zero():
    txt = MINIMAL_LAPTOP.replace("limits: [-0.5, 2.0]", "limits: [0.5, 2.0]")
    with pytest.raises(ModelSpecError, match="limits"):
        parse_model(txt)


def test_parse_malformed_document():
    with pytest.raises(ModelSpecError):
        parse_model("category: [unclosed")
    with pytest.raises(ModelSpecError):
        parse_model("just a string")


def test_serialize_round_trip():
    m = load_builtin("laptop", normalized=False)
    again = parse_model(serialize_model(m))
    assert again.category == m.category
    for p, q in zip(m.parts, again.parts):
        assert p.name == q.name and p.joint_id == q.joint_id
        assert np.array_equal(p.mesh.vertices, q.mesh.vertices)
        assert np.array_equal(p.mesh.faces, q.mesh.faces)
    for a, b in zip(m.joints, again.joints):
        assert np.array_equal(a.pivot, b.pivot)
        assert np.array_equal(a.axis, b.axis)
        assert a.limits == b.limits


# --- normalization -----------------------------------------------------------


def _two_box_model(scale=1.0, offset=(0.0, 0.0, 0.0)):
    txt = MINIMAL_LAPTOP
    m = parse_model(txt)
    parts = tuple(
        type(p)(p.id, p.name, TriangleMesh(p.mesh.vertices * scale + offset, p.mesh.faces), p.joint_id, p.watertight)
        for p in m.parts
    )
    joints = tuple(
        type(j)(j.id, j.name, j.base_part, j.moving_part, j.pivot * scale + offset, j.axis, j.limits)
        for j in m.joints
    )
    return ArticulatedModel(m.category, parts, joints)


def test_normalize_cube_halved():
    m = _two_box_model(scale=2.0 / 1.2)  # bbox becomes 2 x 2? just check the convention directly
    n = normalize_to_container(m)
    lo, hi = n.rest_bounds()
    assert np.max(hi - lo) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose((lo + hi) / 2.0, [0.5, 0.5, 0.5], atol=1e-12)


def test_normalize_longest_side_convention():
    # bbox [0,2]x[0,1]x[0,1] -> [0,1]x[0.25,0.75]x[0.25,0.75]
    verts = np.array([[0, 0, 0], [2, 0, 0], [0, 1, 0], [0, 0, 1], [2, 1, 1], [1, 0.5, 0.5]])
    faces = [[0, 1, 2], [0, 2, 3], [1, 4, 2], [3, 2, 4], [0, 3, 1], [1, 3, 4]]
    base = TriangleMesh(verts, faces)
    lid = TriangleMesh(verts * 0.1 + [0.5, 0.5, 0.5], faces)
    from artrecon.model import Joint, Part

    m = ArticulatedModel(
        "blob",
        (Part(0, "base", base, None, False), Part(1, "lid", lid, 0, False)),
        (Joint(0, "j", 0, 1, [1, 0.5, 0.5], [0, 0, 1], (-1, 1)),),
    )
    n = normalize_to_container(m)
    lo, hi = n.rest_bounds()
    assert np.allclose(lo, [0, 0.25, 0.25], atol=1e-12)
    assert np.allclose(hi, [1, 0.75, 0.75], atol=1e-12)


def test_normalize_idempotent_and_scale_equivariant():
    m = load_builtin("oven", normalized=False)
    n1 = normalize_to_container(m)
    n2 = normalize_to_container(n1)
    for p, q in zip(n1.parts, n2.parts):
        assert np.max(np.abs(p.mesh.vertices - q.mesh.vertices)) < 1e-9

    scaled = _two_box_model(scale=3.7, offset=(5.0, -2.0, 0.3))
    plain = _two_box_model()
    a = normalize_to_container(scaled)
    b = normalize_to_container(plain)
    for p, q in zip(a.parts, b.parts):
        assert np.max(np.abs(p.mesh.vertices - q.mesh.vertices)) < 1e-9
    for ja, jb in zip(a.joints, b.joints):
        assert np.max(np.abs(ja.pivot - jb.pivot)) < 1e-9


def test_normalize_degenerate_model():
    flat = TriangleMesh(np.zeros((3, 3)), [[0, 1, 2]])
    from artrecon.model import Joint, Part

    m = ArticulatedModel(
        "dot",
        (Part(0, "a", flat, None, False), Part(1, "b", flat, 0, False)),
        (Joint(0, "j", 0, 1, [0, 0, 0], [0, 0, 1], (-1, 1)),),
    )
    with pytest.raises(ModelSpecError, match="degenerate"):
        normalize_to_container(m)


# --- forward kinematics ------------------------------------------------------


def test_fk_zero_pose_is_identity():
    m = load_builtin("laptop")
    posed = forward_kinematics(m, Pose.zeros(m.n_joints))
    for p in m.parts:
        assert np.array_equal(posed[p.id], p.mesh.vertices)


def test_fk_quarter_turn_known_point():
    # vertex (0.6,0.5,0.5), pivot (0.5,0.5,0.5), axis z, angle pi/2 -> (0.5,0.6,0.5)
    from artrecon.geometry import rotate_about_pivot

    out = rotate_about_pivot(np.array([[0.6, 0.5, 0.5]]), [0.5, 0.5, 0.5], [0, 0, 1], np.pi / 2)
    assert np.allclose(out[0], [0.5, 0.6, 0.5], atol=1e-12)


def test_fk_matches_scipy_rotation_oracle():
    m = load_builtin("laptop")
    pose = Pose([0.7])
    posed = forward_kinematics(m, pose)
    lid = m.parts[1]
    j = m.joints[0]
    expected = rotate_points_scipy(lid.mesh.vertices, j.pivot, j.axis, 0.7)
    assert np.max(np.abs(posed[lid.id] - expected)) < 1e-12


def test_fk_wrong_pose_length():
    m = load_builtin("laptop")
    with pytest.raises(ValueError):
        forward_kinematics(m, Pose([0.1, 0.2]))


def test_fk_rigidity_and_inverse():
    m = load_builtin("eyeglasses")
    rng = np.random.default_rng(4)
    pose = Pose(rng.uniform([j.limits[0] for j in m.joints], [j.limits[1] for j in m.joints]))
    posed = forward_kinematics(m, pose)
    for p in m.parts:
        rest = p.mesh.vertices
        moved = posed[p.id]
        idx = rng.integers(0, len(rest), size=(40, 2))
        d_rest = np.linalg.norm(rest[idx[:, 0]] - rest[idx[:, 1]], axis=1)
        d_moved = np.linalg.norm(moved[idx[:, 0]] - moved[idx[:, 1]], axis=1)
        assert np.max(np.abs(d_rest - d_moved)) < 1e-9

    # applying the negated pose to the posed vertices returns them to rest
    from artrecon.geometry import rotate_about_pivot

    for p in m.parts:
        if p.joint_id is None:
            continue
        j = m.joints[p.joint_id]
        back = rotate_about_pivot(posed[p.id], j.pivot, j.axis, -pose.angles[p.joint_id])
        assert np.max(np.abs(back - p.mesh.vertices)) < 1e-9


def test_pose_clamping():
    m = load_builtin("laptop")
    clamped, was_clamped = Pose([99.0]).clamped(m)
    assert was_clamped and clamped.angles[0] == m.joints[0].limits[1]
    same, flag = Pose([0.3]).clamped(m)
    assert not flag and same.angles[0] == 0.3


# --- ground-truth occupancy --------------------------------------------------


def test_gt_occupancy_centroid_and_outside():
    m = load_builtin("laptop")
    base_centroid = m.base_part.mesh.vertices.mean(axis=0)
    queries = np.vstack([base_centroid, [-1.0, -1.0, -1.0]])
    occ = gt_occupancy(m, Pose.zeros(1), queries)
    assert occ[0] and not occ[1]


@pytest.mark.parametrize("category", BUILTIN_CATEGORIES)
def test_gt_occupancy_matches_winding_number_oracle(category):
    m = load_builtin(category)
    rng = np.random.default_rng(99)
    pose = Pose(rng.uniform([j.limits[0] for j in m.joints], [j.limits[1] for j in m.joints]))
    queries = rng.uniform(-0.05, 1.05, size=(1000, 3))
    ours = gt_occupancy(m, pose, queries)
    expected = winding_number_inside(queries, posed_part_meshes(m, pose).values())
    assert np.array_equal(ours, expected)


def test_gt_occupancy_requires_watertight():
    open_mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    from artrecon.model import Joint, Part

    m = ArticulatedModel(
        "open",
        (
            Part(0, "a", open_mesh, None, watertight=False),
            Part(1, "b", open_mesh, 0, watertight=False),
        ),
        (Joint(0, "j", 0, 1, [0, 0, 0], [0, 0, 1], (-1, 1)),),
    )
    with pytest.raises(MeshError, match="watertight"):
        gt_occupancy(m, Pose.zeros(1), np.zeros((1, 3)))
