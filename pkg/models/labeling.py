from collections import defaultdict
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Dict, List, Sequence

from assignment import match_boxes
from boxes import box_iou_matrix
from cues.temporal import Hypothesis


class Label(IntEnum):
    INVALID = 0
    VALID_ERROR = 1


@dataclass(frozen=True)
class LabeledHypothesis:
    hypothesis: Hypothesis
    label: Label

    @property
    def features(self):
        return self.hypothesis.features

    @property
    def provenance(self):
        h = self.hypothesis
        return h.sequence, h.frame, h.cue, h.box

    def as_hypothesis(self) -> Hypothesis:
        return replace(self.hypothesis, label=int(self.label))

    @classmethod
    def from_hypothesis(cls, hypothesis: Hypothesis) -> 'LabeledHypothesis':
        if hypothesis.label is None:
            raise ValueError(f'hypothesis at frame {hypothesis.frame} of {hypothesis.sequence!r} carries no label')
        return cls(hypothesis, Label(hypothesis.label))


def missed_ground_truth(detections, ground_truth, min_overlap=0.5):
    """Non-ignore objects left unmatched by the detections: E = O - Ô."""
    care = [g for g in ground_truth if not g.is_ignore]
    result = match_boxes(care, detections, min_overlap)
    return [care[i] for i in result.unmatched_a]


def label_hypotheses(hypotheses: Sequence[Hypothesis], detections: Dict[int, list],
                     ground_truth: Dict[int, list], min_overlap: float = 0.5) -> List[LabeledHypothesis]:
    """Label each hypothesis as a valid detector error or a cue artifact.

    A hypothesis is valid when the assignment pairs it with a missed object.
    Hypotheses whose only ground-truth overlap is an ignore region are left
    out of the result. Output keeps the input order.
    """
    by_frame = defaultdict(list)
    for index, h in enumerate(hypotheses):
        by_frame[h.frame].append(index)

    labels = {}
    for frame, indices in by_frame.items():
        gt = ground_truth.get(frame, [])
        frame_hyps = [hypotheses[i] for i in indices]
        missed = missed_ground_truth(detections.get(frame, []), gt, min_overlap)
        matched = match_boxes(frame_hyps, missed, min_overlap)
        valid = {r for r, _, _ in matched.pairs}

        care = [g for g in gt if not g.is_ignore]
        ignore = [g for g in gt if g.is_ignore]
        care_ov = box_iou_matrix(frame_hyps, care)
        ignore_ov = box_iou_matrix(frame_hyps, ignore)
        for k, index in enumerate(indices):
            if k in valid:
                labels[index] = Label.VALID_ERROR
            elif ignore_ov.shape[1] and ignore_ov[k].max() >= min_overlap \
                    and not (care_ov.shape[1] and care_ov[k].max() >= min_overlap):
                continue
            else:
                labels[index] = Label.INVALID

    return [LabeledHypothesis(hypotheses[i], labels[i]) for i in range(len(hypotheses)) if i in labels]
