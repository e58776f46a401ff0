import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from assignment import match_boxes
from boxes import BBox, ScoredBox
from cues.temporal import Cue, Hypothesis, filter_detections


@dataclass(eq=False)
class DisparityMap:
    """Dense disparity in pixels with a per-pixel validity mask.

    The map is referenced to the right image of a rectified pair, so a point at
    right_x appears at right_x + d in the left image.
    """
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.valid.shape:
            raise ValueError(f'disparity values {self.values.shape} and mask {self.valid.shape} disagree')
        good = self.values[self.valid]
        if not np.all(np.isfinite(good)) or np.any(good < 0):
            raise ValueError('valid disparities must be finite and >= 0')
        self.values = np.where(self.valid, self.values, 0.0)

    @classmethod
    def constant(cls, width, height, disparity):
        return cls(np.full((height, width), float(disparity)), np.ones((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DisparityMap):
            return NotImplemented
        return np.array_equal(self.valid, other.valid) and np.array_equal(self.values, other.values)


def region_slices(box: BBox, width: int, height: int) -> Optional[Tuple[slice, slice]]:
    """Pixel rows/columns touched by a box, clipped to the map; None when empty.

    Painting and reading disparity regions both go through here, so a region
    always covers the same pixels.
    """
    c0, c1 = max(0, math.floor(box.x1)), min(width, math.ceil(box.x2))
    r0, r1 = max(0, math.floor(box.y1)), min(height, math.ceil(box.y2))
    if c0 >= c1 or r0 >= r1:
        return None
    return slice(r0, r1), slice(c0, c1)


def median_disparity(disparity: DisparityMap, region: BBox, min_valid_fraction: float = 0.25) -> Optional[float]:
    slices = region_slices(region, disparity.width, disparity.height)
    if slices is None:
        raise ValueError(f'region {region.as_tuple()} lies outside the {disparity.width}x{disparity.height} map')
    valid = disparity.valid[slices]
    if valid.sum() == 0 or valid.mean() < min_valid_fraction:
        return None
    return float(np.median(disparity.values[slices][valid]))


@dataclass(frozen=True)
class ShiftedDetection:
    source_id: int
    box: ScoredBox
    disparity: float


@dataclass
class ShiftResult:
    shifted: List[ShiftedDetection] = field(default_factory=list)
    dropped: int = 0


def shift_detections(right_detections: Sequence[ScoredBox], disparity: DisparityMap, conf_threshold: float,
                     min_valid_fraction: float = 0.25, direction: int = 1) -> ShiftResult:
    """Move right-camera detections into the left image by their median disparity.

    `direction=-1` runs the mirrored composition (left detections, left
    referenced map, left_x - d). Detections without a trustworthy median, or
    whose shifted box lands fully outside the image, are dropped and counted.
    Shifting preserves width, height and y extent exactly.
    """
    if direction not in (1, -1):
        raise ValueError(f'direction must be +1 or -1, got {direction}')
    result = ShiftResult()
    for index, det in enumerate(right_detections):
        if det.confidence < conf_threshold:
            continue
        if region_slices(det.box, disparity.width, disparity.height) is None:
            result.dropped += 1
            continue
        d = median_disparity(disparity, det.box, min_valid_fraction)
        if d is None:
            result.dropped += 1
            continue
        box = det.box.shifted(direction * d)
        # partly visible boxes keep their size; only boxes fully off the image go
        if box.clipped(disparity.width, disparity.height) is None:
            result.dropped += 1
            continue
        shifted = ScoredBox(box=box, confidence=det.confidence, category=det.category, frame=det.frame)
        result.shifted.append(ShiftedDetection(source_id=index, box=shifted, disparity=d))

    considered = len(result.shifted) + result.dropped
    if considered and result.dropped / considered > 0.5:
        warnings.warn(f'dropped {result.dropped} of {considered} detections for lack of valid disparity')
    return result


def generate_stereo_hypotheses(shifted: Sequence[ShiftedDetection], left_detections: Sequence[ScoredBox],
                               conf_threshold: float, sequence: str = '') -> List[Hypothesis]:
    """Shifted right detections left unexplained by the left detections."""
    if not shifted:
        return []
    left_detections = filter_detections(left_detections, conf_threshold, category=None)
    result = match_boxes([s.box for s in shifted], left_detections, 0.5)
    return [
        Hypothesis(
            box=shifted[i].box.box,
            confidence=shifted[i].box.confidence,
            cue=Cue.STEREO,
            frame=shifted[i].box.frame,
            track_length=0,
            source_id=shifted[i].source_id,
            sequence=sequence,
        )
        for i in result.unmatched_a
    ]
