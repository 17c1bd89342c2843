import numpy as np
import pytest

from artrecon.canon import FeaturedPointCloud
from artrecon.metrics import (
    CE_EPSILON,
    EvalReport,
    LossWeights,
    chamfer,
    coverage,
    iou,
    losses,
)
from artrecon.synth import MapBundle

from oracles import brute_force_chamfer


def test_chamfer_identity_and_singletons():
    a = np.random.default_rng(0).uniform(size=(20, 3))
    assert chamfer(a, a) == 0.0
    assert chamfer([[0, 0, 0]], [[1, 0, 0]]) == pytest.approx(200.0, abs=1e-12)


def test_chamfer_matches_bruteforce():
    rng = np.random.default_rng(9)
    for _ in range(10):
        a = rng.uniform(size=(50, 3))
        b = rng.uniform(size=(50, 3))
        assert chamfer(a, b) == pytest.approx(brute_force_chamfer(a, b), abs=1e-9)


def test_chamfer_symmetric_and_validates():
    rng = np.random.default_rng(2)
    a, b = rng.uniform(size=(30, 3)), rng.uniform(size=(40, 3))
    assert chamfer(a, b) == pytest.approx(chamfer(b, a), abs=1e-12)
    with pytest.raises(ValueError):
        chamfer(np.zeros((0, 3)), b)


def test_iou_identical_disjoint():
    rng = np.random.default_rng(1)
    a = rng.random((16, 16, 16)) < 0.3
    assert iou(a, a) == 100.0
    b = np.zeros_like(a)
    b[0, 0, 0] = True
    a2 = np.zeros_like(a)
    a2[5, 5, 5] = True
    assert iou(a2, b) == 0.0


def test_iou_overlapping_boxes_closed_form():
    r = 64
    nodes = np.linspace(0.0, 1.0, r)
    in_a = nodes <= 0.5
    in_b = (nodes >= 0.25) & (nodes <= 0.75)
    a = np.zeros((r, r, r), dtype=bool)
    b = np.zeros((r, r, r), dtype=bool)
    a[in_a] = True
    b[in_b] = True
    # closed form from per-axis node counts
    na, nb = int(in_a.sum()), int(in_b.sum())
    ni = int((in_a & in_b).sum())
    expected = 100.0 * ni / (na + nb - ni)
    assert iou(a, b) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(100.0 / 3.0, abs=1e-9)


def test_iou_mismatch_and_degenerate():
    with pytest.raises(ValueError, match="mismatch"):
        iou(np.zeros((4, 4, 4), bool), np.zeros((5, 5, 5), bool))
    with pytest.warns(UserWarning, match="degenerate"):
        assert iou(np.zeros((4, 4, 4), bool), np.zeros((4, 4, 4), bool)) == 100.0


def test_coverage():
    rng = np.random.default_rng(3)
    gt = rng.uniform(size=(100, 3))
    assert coverage(gt, gt, 1e-9) == 1.0
    # cloud holds exact copies of half the GT samples plus far-away points
    half = gt[:50]
    far = gt[50:] + 10.0
    assert coverage(np.vstack([half, far]), gt, 1e-9) == pytest.approx(0.5)
    sup = coverage(np.vstack([half, gt[50:75]]), gt, 1e-9)
    assert sup >= coverage(half, gt, 1e-9)


# --- losses -------------------------------------------------------------------


def _pair(h=1, w=3, fg=(1, 1, 0), labels=(0, 1, 0)):
    mask = np.array(fg, dtype=np.uint8).reshape(h, w)
    coords = np.zeros((h, w, 3), dtype=np.float32)
    coords[0, 0] = [0.25, 0.25, 0.5]   # binary-exact values stay exact in f32
    coords[0, 1] = [0.5, 0.5, 0.5]
    votes = np.zeros((h, w, 1, 6), dtype=np.float32)
    votes[..., 0, :3] = 0.5
    votes[..., 0, 5] = 0.7
    votes *= mask[..., None, None]
    coords *= mask[..., None]
    return MapBundle(
        coords=coords,
        mask=mask,
        part_labels=np.array(labels, dtype=np.uint16).reshape(h, w) * mask,
        votes=votes,
        confidences=mask[..., None].astype(np.float32),
        features=np.zeros((h, w, 2), dtype=np.float32),
        pose=np.array([0.7]),
        n_parts=2,
    )


def _cloud_of(points):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    return FeaturedPointCloud(pts, np.zeros((n, 1)), np.zeros(n, dtype=np.int32),
                              np.zeros((n, 1, 6)), np.ones((n, 1)), np.zeros(n, dtype=np.int32))


def test_losses_zero_on_perfect():
    gt = _pair()
    out = losses(gt, gt, [_cloud_of([[0.1, 0.2, 0.3]])], [_cloud_of([[0.1, 0.2, 0.3]])])
    assert out.terms == (0.0,) * 7
    assert out.total == 0.0
    assert out.single_view


def test_losses_hand_computed_two_pixel_bundle():
    # binary-exact displacements keep the f32 wire arrays exact
    gt = _pair()
    pred = _pair()
    c = pred.coords.copy()
    c[0, 0] += [0.125, 0, 0]
    pred = MapBundle(c, pred.mask, pred.part_labels, pred.votes, pred.confidences,
                     pred.features, pred.pose, pred.n_parts)
    out = losses(pred, gt)
    assert out[0] == pytest.approx(0.125**2 / 2, abs=1e-12)  # L1 over 2 fg pixels
    assert out[1] == 0.0 and out[5] == 0.0

    # vote-center error at one pixel, rotation error at the other
    v = gt.votes.copy()
    v[0, 0, 0, 1] += 0.25   # center y displaced
    v[0, 1, 0, 3] += 0.125  # axis-angle x displaced
    pred2 = MapBundle(gt.coords, gt.mask, gt.part_labels, v, gt.confidences,
                      gt.features, gt.pose, gt.n_parts)
    out2 = losses(pred2, gt)
    assert out2[2] == pytest.approx(0.25**2 / 2, abs=1e-12)
    assert out2[3] == pytest.approx(0.125**2 / 2, abs=1e-12)

    # mask flip at one of three pixels
    m = gt.mask.copy()
    m[0, 2] = 1
    pred3 = MapBundle(gt.coords, m, gt.part_labels, gt.votes,
                      gt.confidences * 0 + m[..., None], gt.features, gt.pose, gt.n_parts)
    out3 = losses(pred3, gt)
    assert out3[1] == pytest.approx(-np.log(CE_EPSILON) / 3, abs=1e-9)

    # one of two foreground labels wrong
    lab = gt.part_labels.copy()
    lab[0, 1] = 0
    pred4 = MapBundle(gt.coords, gt.mask, lab, gt.votes, gt.confidences,
                      gt.features, gt.pose, gt.n_parts)
    out4 = losses(pred4, gt)
    assert out4[5] == pytest.approx(-np.log(CE_EPSILON) / 2, abs=1e-9)


def test_losses_consistency_term_pairwise():
    gt1, gt2 = _pair(), _pair()
    v2 = gt2.votes.copy()
    v2[..., 0, 2] += 0.125  # shift view-2 center votes in z (f32-exact)
    pred2 = MapBundle(gt2.coords, gt2.mask, gt2.part_labels, v2, gt2.confidences,
                      gt2.features, gt2.pose, gt2.n_parts)
    out = losses([gt1, pred2], [gt1, gt2])
    assert not out.single_view
    assert out[4] == pytest.approx(0.125**2, abs=1e-12)  # one pair, one joint

    single = losses(gt1, gt1)
    assert single.single_view and single[4] == 0.0


def test_losses_canonical_term():
    gt = _pair()
    pred_c = [_cloud_of([[0.1, 0.2, 0.3], [0.4, 0.4, 0.4]])]
    gt_c = [_cloud_of([[0.1, 0.2, 0.3], [0.4, 0.4, 0.5]])]
    out = losses(gt, gt, pred_c, gt_c)
    assert out[6] == pytest.approx(0.01 / 2, abs=1e-12)


def test_default_weights_and_weighting():
    w = LossWeights()
    assert w.as_tuple() == (1.0, 0.1, 1.0, 1.0, 1.0, 1.0, 1.0)
    assert LossWeights.from_dict(w.to_dict()) == w
    with pytest.raises(ValueError):
        LossWeights(mask_bce=-0.1)

    gt = _pair()
    m = gt.mask.copy()
    m[0, 2] = 1
    pred = MapBundle(gt.coords, m, gt.part_labels, gt.votes,
                     gt.confidences * 0 + m[..., None], gt.features, gt.pose, gt.n_parts)
    out = losses(pred, gt)
    # BCE contributes at 0.1x while the raw term is nonzero
    assert out.total == pytest.approx(0.1 * out[1], abs=1e-12)
    heavier = losses(pred, gt, weights=LossWeights(mask_bce=0.2))
    assert heavier.total > out.total

    # total is monotone non-decreasing in every weight
    c2 = gt.coords.copy()
    c2[0, 0, 0] += 0.125
    lab2 = gt.part_labels.copy()
    lab2[0, 1] = 0
    messy = MapBundle(c2, m, lab2, gt.votes, gt.confidences * 0 + m[..., None],
                      gt.features, gt.pose, gt.n_parts)
    base_weights = LossWeights().to_dict()
    baseline = losses(messy, gt).total
    for name in base_weights:
        bumped = dict(base_weights)
        bumped[name] = base_weights[name] + 1.0
        assert losses(messy, gt, weights=LossWeights(**bumped)).total >= baseline


def test_eval_report_csv_deterministic():
    r = EvalReport(columns=["views", "cd", "iou"], meta={"noise": "mild", "seed": 3})
    r.add(views=1, cd=1.5, iou=50.0)
    r.add(views=2, cd=1.0, iou=55.0)
    assert r.to_csv() == r.to_csv()
    assert b"# noise: mild" in r.to_csv()
    assert np.allclose(r.column("cd"), [1.5, 1.0])
    assert np.allclose(r.column("cd", where={"views": 2}), [1.0])
    table = r.summary_table("views", ["cd", "iou"])
    assert "views" in table and "cd" in table
