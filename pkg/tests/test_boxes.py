import numpy as np
import pytest

from boxes import BBox, NormalizedBox, ScoredBox, box_iou_matrix, height_filter, iou, nms, nms_clusters, normalize
from cues.temporal import Tracklet


def random_box(rng, extent=100.0):
    x1, y1 = rng.uniform(0, extent, size=2)
    w, h = rng.uniform(1, extent / 2, size=2)
    return BBox(float(x1), float(y1), float(x1 + w), float(y1 + h))


def test_bbox_rejects_degenerate_and_non_finite():
    with pytest.raises(ValueError):
        BBox(10, 0, 10, 5)
    with pytest.raises(ValueError):
        BBox(0, 5, 10, 4)
    with pytest.raises(ValueError):
        BBox(0, 0, float('inf'), 5)


def test_scored_box_confidence_range():
    with pytest.raises(ValueError):
        ScoredBox(BBox(0, 0, 1, 1), 1.5)
    with pytest.raises(ValueError):
        ScoredBox(BBox(0, 0, 1, 1), 0.5, frame=-1)


def test_iou_examples():
    a = BBox(0, 0, 10, 10)
    assert iou(a, BBox(0, 0, 10, 10)) == 1.0
    assert iou(a, BBox(20, 20, 30, 30)) == 0.0
    assert iou(a, BBox(5, 0, 15, 10)) == pytest.approx(1 / 3)
    # touching edges do not overlap
    assert iou(a, BBox(10, 0, 20, 10)) == 0.0


def test_iou_symmetric_and_bounded():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = random_box(rng), random_box(rng)
        ab, ba = iou(a, b), iou(b, a)
        assert ab == ba
        assert 0.0 <= ab <= 1.0
        assert iou(a, a) == 1.0


def test_iou_matrix_matches_scalar():
    rng = np.random.default_rng(1)
    a = [random_box(rng) for _ in range(6)]
    b = [random_box(rng) for _ in range(4)]
    m = box_iou_matrix(a, b)
    assert m.shape == (6, 4)
    for i in range(6):
        for j in range(4):
            assert m[i, j] == pytest.approx(iou(a[i], b[j]), abs=1e-12)
    assert box_iou_matrix([], b).shape == (0, 4)


def test_iou_matrix_unwraps_nested_boxes():
    a = BBox(0, 0, 10, 10)
    b = BBox(5, 0, 15, 10)
    tracklet = Tracklet(3, ScoredBox(a, 0.7), length=2)
    m = box_iou_matrix([tracklet, ScoredBox(a, 0.9)], [b])
    assert m.tolist() == [[iou(a, b)], [iou(a, b)]]


def test_normalize_examples():
    assert normalize(BBox(400, 200, 600, 300), 1000, 500) == NormalizedBox(0.0, 0.0, 0.2, 0.2)
    assert normalize(BBox(0, 0, 100, 100), 100, 100) == NormalizedBox(0.0, 0.0, 1.0, 1.0)
    assert normalize(BBox(0, 0, 50, 50), 100, 100) == NormalizedBox(-0.25, -0.25, 0.5, 0.5)


def test_normalize_clips_and_rejects_outside():
    clipped = normalize(BBox(-50, 0, 50, 100), 100, 100)
    assert clipped == normalize(BBox(0, 0, 50, 100), 100, 100)
    with pytest.raises(ValueError):
        normalize(BBox(200, 200, 300, 300), 100, 100)
    with pytest.raises(ValueError):
        normalize(BBox(0, 0, 10, 10), 0, 100)


def test_normalize_scale_invariance():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        box = random_box(rng)
        s = float(2.0 ** rng.integers(-4, 5))
        assert normalize(box.scaled(s), 200 * s, 150 * s) == normalize(box, 200, 150)


def test_nms_examples():
    box = BBox(0, 0, 10, 10)
    kept = nms([ScoredBox(box, 0.8), ScoredBox(box, 0.9)], 0.7)
    assert [k.confidence for k in kept] == [0.9]

    disjoint = [ScoredBox(BBox(0, 0, 10, 10), 0.9), ScoredBox(BBox(20, 20, 30, 30), 0.8)]
    assert len(nms(disjoint, 0.7)) == 2

    partial = [ScoredBox(BBox(0, 0, 10, 10), 0.9), ScoredBox(BBox(5, 0, 15, 10), 0.8)]
    assert [k.confidence for k in nms(partial, 0.3)] == [0.9]
    assert nms([], 0.5) == []


def test_nms_stays_within_frame():
    box = BBox(0, 0, 10, 10)
    kept = nms([ScoredBox(box, 0.9, frame=0), ScoredBox(box, 0.8, frame=1)], 0.5)
    assert len(kept) == 2


def test_nms_rejects_bad_threshold():
    with pytest.raises(ValueError):
        nms([], 0.0)
    with pytest.raises(ValueError):
        nms([], 1.5)


def test_nms_properties():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        boxes = [ScoredBox(random_box(rng), float(rng.uniform())) for _ in range(rng.integers(0, 8))]
        t = float(rng.uniform(0.1, 1.0))
        kept = nms(boxes, t)
        assert all(k in boxes for k in kept)
        for i in range(len(kept)):
            for j in range(i + 1, len(kept)):
                assert iou(kept[i].box, kept[j].box) < t
        assert nms(kept, t) == kept


def test_nms_clusters_account_for_every_box():
    rng = np.random.default_rng(4)
    boxes = [ScoredBox(random_box(rng, 30.0), float(rng.uniform())) for _ in range(12)]
    clusters = nms_clusters(boxes, 0.3)
    members = sorted([kept for kept, _ in clusters] + [s for _, group in clusters for s in group])
    assert members == list(range(12))


def test_height_filter():
    short = ScoredBox(BBox(0, 0, 10, 24), 0.9)
    exact = ScoredBox(BBox(0, 0, 10, 25), 0.9)
    assert height_filter([short, exact], 25) == [exact]
    assert height_filter([], 25) == []
    assert height_filter([short, exact], 0) == [short, exact]
