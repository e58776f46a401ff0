import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np


class Category(str, Enum):
    CAR = 'Car'
    VAN = 'Van'
    TRUCK = 'Truck'
    PEDESTRIAN = 'Pedestrian'
    PERSON_SITTING = 'Person_sitting'
    CYCLIST = 'Cyclist'
    TRAM = 'Tram'
    MISC = 'Misc'
    DONT_CARE = 'DontCare'


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixels, origin at the top-left corner of the image.

    Boxes are half-open real intervals, area = (x2 - x1) * (y2 - y1).
    """
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in coords):
            raise ValueError(f'non-finite box coordinates {coords}')
        if self.x2 <= self.x1 or self.y2 <= self.y1:
            raise ValueError(f'degenerate box {coords}: need x2 > x1 and y2 > y1')

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.x1, self.y1, self.x2, self.y2

    def shifted(self, dx: float, dy: float = 0.0) -> 'BBox':
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def scaled(self, s: float) -> 'BBox':
        return BBox(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)

    def clipped(self, image_width: float, image_height: float) -> Optional['BBox']:
        """Intersection with the image rectangle, None when nothing is left."""
        x1, y1 = max(self.x1, 0.0), max(self.y1, 0.0)
        x2, y2 = min(self.x2, image_width), min(self.y2, image_height)
        if x2 <= x1 or y2 <= y1:
            return None
        return BBox(x1, y1, x2, y2)


@dataclass(frozen=True)
class ScoredBox:
    box: BBox
    confidence: float
    category: Category = Category.CAR
    frame: int = 0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f'confidence {self.confidence} outside [0, 1]')
        if self.frame < 0:
            raise ValueError(f'negative frame index {self.frame}')


@dataclass(frozen=True)
class NormalizedBox:
    x: float
    y: float
    w: float
    h: float


def as_bbox(item) -> BBox:
    # tracklets wrap a ScoredBox, which wraps the BBox
    while not isinstance(item, BBox):
        item = item.box
    return item


def boxes_to_array(items: Iterable) -> np.ndarray:
    rows = [as_bbox(item).as_tuple() for item in items]
    if not rows:
        return np.zeros((0, 4), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def box_iou_matrix(set_a: Sequence, set_b: Sequence) -> np.ndarray:
    """Pairwise IoU, shape (len(set_a), len(set_b)). Accepts BBox or ScoredBox items."""
    a = boxes_to_array(set_a)
    b = boxes_to_array(set_b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)

    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    overlapping = (iw > 0) & (ih > 0)
    inter = np.where(overlapping, iw * ih, 0.0)
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(overlapping, inter / union, 0.0)


def normalize(box: BBox, image_width: float, image_height: float) -> NormalizedBox:
    """Map a pixel box to the canonical viewpoint: origin at the image center,
    sizes as fractions of the image. The box is clipped to the image first."""
    if image_width <= 0 or image_height <= 0:
        raise ValueError(f'invalid image size {image_width}x{image_height}')
    clipped = box.clipped(image_width, image_height)
    if clipped is None:
        raise ValueError(f'box {box.as_tuple()} lies outside the {image_width}x{image_height} image')
    cx, cy = clipped.center
    return NormalizedBox(
        x=(cx - image_width / 2) / image_width,
        y=(cy - image_height / 2) / image_height,
        w=clipped.width / image_width,
        h=clipped.height / image_height,
    )


def _rank_key(item: ScoredBox):
    # ties: smaller frame, then lexicographic box coordinates
    return (-item.confidence, item.frame) + item.box.as_tuple()


def nms_clusters(boxes: Sequence[ScoredBox], min_overlap: float) -> List[Tuple[int, List[int]]]:
    """Greedy confidence-descending suppression within each frame.

    Returns one (kept index, suppressed indices) entry per kept box, in rank
    order. A suppressed box is attributed to the highest ranked kept box that
    overlaps it by at least `min_overlap`.
    """
    if not 0.0 < min_overlap <= 1.0:
        raise ValueError(f'min_overlap {min_overlap} outside (0, 1]')
    order = sorted(range(len(boxes)), key=lambda i: _rank_key(boxes[i]))

    clusters = []
    kept_per_frame = {}
    for i in order:
        candidate = boxes[i]
        owner = None
        for position in kept_per_frame.get(candidate.frame, []):
            if iou(boxes[clusters[position][0]].box, candidate.box) >= min_overlap:
                owner = position
                break
        if owner is None:
            kept_per_frame.setdefault(candidate.frame, []).append(len(clusters))
            clusters.append((i, []))
        else:
            clusters[owner][1].append(i)
    return clusters


def nms(boxes: Sequence[ScoredBox], min_overlap: float) -> List[ScoredBox]:
    return [boxes[kept] for kept, _ in nms_clusters(boxes, min_overlap)]


def height_filter(boxes: Iterable[ScoredBox], min_height: float) -> List[ScoredBox]:
    if min_height < 0:
        raise ValueError(f'negative min_height {min_height}')
    return [b for b in boxes if b.box.height >= min_height]
