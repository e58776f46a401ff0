from dataclasses import astuple, dataclass
from typing import Dict, List, Sequence

import numpy as np

from boxes import ScoredBox, box_iou_matrix, normalize
from cues.temporal import Cue, Hypothesis

FEATURE_NAMES = (
    'x', 'y', 'w', 'h', 'r',
    'det_cnt', 'med_det_ov', 'med_det_cnf',
    'hyp_cnt', 'med_hyp_ov', 'med_hyp_cnf',
    'n',
)

# the stereo classifier never sees the track length
FEATURE_COUNTS: Dict[Cue, int] = {Cue.TEMPORAL: 12, Cue.STEREO: 11}


@dataclass(frozen=True)
class FeatureVector:
    x: float
    y: float
    w: float
    h: float
    r: float
    det_cnt: int
    med_det_ov: float
    med_det_cnf: float
    hyp_cnt: int
    med_hyp_ov: float
    med_hyp_cnf: float
    n: int

    def __post_init__(self):
        for name in ('r', 'med_det_ov', 'med_det_cnf', 'med_hyp_ov', 'med_hyp_cnf'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f'feature {name}={value} outside [0, 1]')
        if self.det_cnt < 0 or self.hyp_cnt < 0 or self.n < 0:
            raise ValueError('counts must be non-negative')

    def as_array(self, count: int = len(FEATURE_NAMES)) -> np.ndarray:
        return np.asarray(astuple(self)[:count], dtype=np.float64)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> 'FeatureVector':
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f'expected {len(FEATURE_NAMES)} feature values, got {len(values)}')
        kwargs = dict(zip(FEATURE_NAMES, values))
        for name in ('det_cnt', 'hyp_cnt', 'n'):
            kwargs[name] = int(kwargs[name])
        for name in set(FEATURE_NAMES) - {'det_cnt', 'hyp_cnt', 'n'}:
            kwargs[name] = float(kwargs[name])
        return cls(**kwargs)


def _overlap_stats(hypothesis: Hypothesis, boxes: Sequence[ScoredBox]):
    if not boxes:
        return 0, 0.0, 0.0
    ious = box_iou_matrix([hypothesis.box], boxes)[0]
    overlapping = ious > 0
    count = int(overlapping.sum())
    if count == 0:
        return 0, 0.0, 0.0
    confidences = np.asarray([b.confidence for b in boxes])[overlapping]
    return count, float(np.median(ious[overlapping])), float(np.median(confidences))


def featurize(hypothesis: Hypothesis, detections: Sequence[ScoredBox], cohort: Sequence[ScoredBox],
              image_width: float, image_height: float) -> FeatureVector:
    """Describe the scene around a hypothesis.

    `cohort` holds the other tracklets (temporal) or other shifted detections
    (stereo) of the frame, never the hypothesis' own source. A box overlaps
    when its IoU is strictly positive; medians over nothing are 0.
    """
    position = normalize(hypothesis.box, image_width, image_height)
    det_cnt, med_det_ov, med_det_cnf = _overlap_stats(hypothesis, detections)
    hyp_cnt, med_hyp_ov, med_hyp_cnf = _overlap_stats(hypothesis, cohort)
    return FeatureVector(
        x=position.x, y=position.y, w=position.w, h=position.h,
        r=hypothesis.confidence,
        det_cnt=det_cnt, med_det_ov=med_det_ov, med_det_cnf=med_det_cnf,
        hyp_cnt=hyp_cnt, med_hyp_ov=med_hyp_ov, med_hyp_cnf=med_hyp_cnf,
        n=hypothesis.track_length if hypothesis.cue == Cue.TEMPORAL else 0,
    )


def featurize_frame(hypotheses: Sequence[Hypothesis], detections: Sequence[ScoredBox],
                    sources: Dict[int, ScoredBox], image_width: float, image_height: float) -> List[FeatureVector]:
    """Featurize every hypothesis of one frame; `sources` maps source id to box."""
    vectors = []
    for hypothesis in hypotheses:
        cohort = [box for source_id, box in sources.items() if source_id != hypothesis.source_id]
        vectors.append(featurize(hypothesis, detections, cohort, image_width, image_height))
    return vectors
