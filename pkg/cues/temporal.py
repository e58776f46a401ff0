from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence

from assignment import match_boxes
from boxes import BBox, Category, ScoredBox, box_iou_matrix

if TYPE_CHECKING:
    from cues.features import FeatureVector


class Cue(str, Enum):
    TEMPORAL = 'temporal'
    STEREO = 'stereo'


@dataclass(frozen=True)
class Tracklet:
    track_id: int
    box: ScoredBox
    # frames since birth, coasted frames included
    length: int = 1

    @property
    def frame(self) -> int:
        return self.box.frame


@dataclass(frozen=True)
class Hypothesis:
    """A candidate missed object proposed by one cue.

    `source_id` is the track id (temporal) or the index of the right-camera
    detection within its frame (stereo). The trailing optional fields are
    filled in by later stages (featurize, label, predict).
    """
    box: BBox
    confidence: float
    cue: Cue
    frame: int
    track_length: int = 0
    source_id: int = -1
    sequence: str = ''
    features: Optional['FeatureVector'] = None
    label: Optional[int] = None
    score: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f'hypothesis confidence {self.confidence} outside [0, 1]')
        if self.cue == Cue.TEMPORAL and self.track_length < 1:
            raise ValueError('temporal hypotheses need a track length >= 1')
        if self.cue == Cue.STEREO and self.track_length != 0:
            raise ValueError('stereo hypotheses carry no track length')

    def sort_key(self):
        return (self.sequence, self.frame) + self.box.as_tuple() + (self.source_id,)


def filter_detections(detections: Iterable[ScoredBox], conf_threshold: float,
                      category: Optional[Category] = Category.CAR) -> List[ScoredBox]:
    return [d for d in detections
            if d.confidence >= conf_threshold and (category is None or d.category == category)]


def generate_temporal_hypotheses(tracklets: Sequence[Tracklet], detections: Sequence[ScoredBox],
                                 conf_threshold: float, sequence: str = '') -> List[Hypothesis]:
    """Tracklets left unexplained by the frame's detections: H = T - O."""
    if not tracklets:
        return []
    detections = filter_detections(detections, conf_threshold, category=None)
    result = match_boxes(tracklets, detections, 0.5)
    return [
        Hypothesis(
            box=tracklets[i].box.box,
            confidence=tracklets[i].box.confidence,
            cue=Cue.TEMPORAL,
            frame=tracklets[i].frame,
            track_length=tracklets[i].length,
            source_id=tracklets[i].track_id,
            sequence=sequence,
        )
        for i in result.unmatched_a
    ]


class _Track:
    def __init__(self, track_id, box: ScoredBox):
        self.track_id = track_id
        self.last_box = box.box
        self.last_frame = box.frame
        self.confidence = box.confidence
        self.category = box.category
        self.velocity = (0.0, 0.0)
        self.born = box.frame

    def predict(self, frame) -> BBox:
        steps = frame - self.last_frame
        return self.last_box.shifted(self.velocity[0] * steps, self.velocity[1] * steps)

    def associate(self, box: ScoredBox):
        steps = box.frame - self.last_frame
        (ox, oy), (nx, ny) = self.last_box.center, box.box.center
        self.velocity = ((nx - ox) / steps, (ny - oy) / steps)
        self.last_box = box.box
        self.last_frame = box.frame
        self.confidence = box.confidence
        self.category = box.category


class BaselineTracker:
    """Greedy IoU tracker that coasts unmatched tracks at constant velocity.

    Stands in for an external multi-object tracker so synthetic runs are self
    contained. Coasted boxes are emitted as tracklets, which is what the
    temporal cue feeds on.
    """

    def __init__(self, image_width, image_height, iou_gate=0.3, max_coast=5, coast_decay=0.9):
        self.image_width = image_width
        self.image_height = image_height
        self.iou_gate = iou_gate
        self.max_coast = max_coast
        self.coast_decay = coast_decay
        self.tracks: List[_Track] = []
        self.next_id = 0

    def step(self, frame: int, detections: Sequence[ScoredBox]) -> List[Tracklet]:
        predicted = [t.predict(frame) for t in self.tracks]
        ious = box_iou_matrix(predicted, detections)

        # highest IoU first; ties by track then detection index
        candidates = sorted(
            ((-ious[i, j], i, j) for i in range(len(predicted)) for j in range(len(detections))
             if ious[i, j] >= self.iou_gate),
        )
        track_match, det_match = {}, set()
        for _, i, j in candidates:
            if i in track_match or j in det_match:
                continue
            track_match[i] = j
            det_match.add(j)

        emitted, alive = [], []
        for i, track in enumerate(self.tracks):
            if i in track_match:
                track.associate(detections[track_match[i]])
                alive.append(track)
                emitted.append(self._tracklet(track, frame, track.last_box, track.confidence))
                continue
            coasted = frame - track.last_frame
            box = predicted[i].clipped(self.image_width, self.image_height)
            if coasted > self.max_coast or box is None:
                continue
            alive.append(track)
            emitted.append(self._tracklet(track, frame, box, track.confidence * self.coast_decay ** coasted))

        for j, det in enumerate(detections):
            if j in det_match:
                continue
            track = _Track(self.next_id, det)
            self.next_id += 1
            alive.append(track)
            emitted.append(self._tracklet(track, frame, track.last_box, track.confidence))

        self.tracks = alive
        emitted.sort(key=lambda t: t.track_id)
        return emitted

    @staticmethod
    def _tracklet(track, frame, box, confidence) -> Tracklet:
        scored = ScoredBox(box=box, confidence=float(confidence), category=track.category, frame=frame)
        return Tracklet(track_id=track.track_id, box=scored, length=frame - track.born + 1)


def baseline_track(detections: Dict[int, List[ScoredBox]], frames: Iterable[int], image_width, image_height,
                   iou_gate=0.3, max_coast=5, coast_decay=0.9) -> Dict[int, List[Tracklet]]:
    tracker = BaselineTracker(image_width, image_height, iou_gate, max_coast, coast_decay)
    return {frame: tracker.step(frame, detections.get(frame, [])) for frame in frames}


def coasted_count(tracklets: Dict[int, List[Tracklet]], detections: Dict[int, List[ScoredBox]]) -> int:
    """Tracklets with no identical detection box in their frame."""
    total = 0
    for frame, items in tracklets.items():
        boxes = {d.box for d in detections.get(frame, [])}
        total += sum(1 for t in items if t.box.box not in boxes)
    return total
