from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from assignment import match_boxes
from boxes import ScoredBox, box_iou_matrix, nms, nms_clusters
from cues.temporal import Cue, Hypothesis


@dataclass(frozen=True)
class ScoredItem:
    score: float
    label: int
    key: tuple = ()


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float
    threshold: float


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other):
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self):
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self):
        return f1_score(self.tp, self.fp, self.fn)


@dataclass(frozen=True)
class FusionStats:
    temporal_total: int = 0
    stereo_total: int = 0
    temporal_shared: int = 0
    stereo_shared: int = 0
    temporal_unique: int = 0
    stereo_unique: int = 0
    # clusters holding errors from both cues
    intersection: int = 0
    fused_total: int = 0


@dataclass
class EvalReport:
    cue: str
    ap: float
    pr_points: List[PRPoint]
    naive_ap: float
    threshold: float
    counts: Counts
    n_hypotheses: int
    n_positive: int
    f1_before: Optional[float] = None
    f1_after: Optional[float] = None
    cue_overlap: Optional[FusionStats] = None
    extra: Dict[str, float] = field(default_factory=dict)

    def as_dict(self):
        summary = {
            'cue': self.cue,
            'ap': self.ap,
            'naive_ap': self.naive_ap,
            'threshold': self.threshold,
            'n_hypotheses': self.n_hypotheses,
            'n_positive': self.n_positive,
            'tp': self.counts.tp,
            'fp': self.counts.fp,
            'fn': self.counts.fn,
            'precision': self.counts.precision,
            'recall': self.counts.recall,
        }
        if self.f1_before is not None:
            summary.update(f1_before=self.f1_before, f1_after=self.f1_after)
        if self.cue_overlap is not None:
            summary.update({f'overlap_{k}': v for k, v in vars(self.cue_overlap).items()})
        summary.update(self.extra)
        return summary


def _ranked(items: Sequence[ScoredItem]):
    # score descending, provenance key ascending on ties
    return sorted(items, key=lambda item: (-item.score, item.key))


def average_precision(items: Sequence[ScoredItem], num_positives: Optional[int] = None
                      ) -> Tuple[float, List[PRPoint]]:
    """All-point interpolated AP: sum of (R_k - R_{k-1}) * P_k over the ranks
    that hit a positive. `num_positives` overrides the recall denominator
    (detector AP counts ground truth never reached by any item)."""
    ranked = _ranked(items)
    labels = np.asarray([1 if item.label else 0 for item in ranked], dtype=np.int64)
    total = int(labels.sum()) if num_positives is None else num_positives
    if total <= 0:
        raise ValueError('average precision is undefined without positive labels')

    tp = np.cumsum(labels)
    fp = np.cumsum(1 - labels)
    recall = tp / total
    precision = tp / np.maximum(tp + fp, 1)
    ap = float(precision[labels == 1].sum() / total)
    points = [PRPoint(float(r), float(p), float(item.score)) for r, p, item in zip(recall, precision, ranked)]
    return ap, points


def naive_baseline(labels: Sequence[int]) -> Tuple[float, PRPoint]:
    """Flag every hypothesis as an error: one operating point at full recall."""
    labels = [1 if label else 0 for label in labels]
    if not labels or sum(labels) == 0:
        raise ValueError('naive baseline is undefined without positive labels')
    precision = sum(labels) / len(labels)
    return precision, PRPoint(1.0, precision, 1.0)


def counts_at_threshold(items: Sequence[ScoredItem], threshold: float,
                        num_positives: Optional[int] = None) -> Counts:
    tp = sum(1 for item in items if item.score >= threshold and item.label)
    fp = sum(1 for item in items if item.score >= threshold and not item.label)
    positives = sum(1 for item in items if item.label) if num_positives is None else num_positives
    return Counts(tp, fp, positives - tp)


def f1_score(tp, fp, fn) -> float:
    denominator = 2 * tp + fp + fn
    return 2 * tp / denominator if denominator else 0.0


def _split_ground_truth(ground_truth):
    care = [g for g in ground_truth if not g.is_ignore]
    ignore = [g for g in ground_truth if g.is_ignore]
    return care, ignore


def frame_counts(detections: Sequence[ScoredBox], ground_truth: Sequence, overlap: float = 0.5) -> Counts:
    """Assignment of detections to non-ignore ground truth at IoU >= overlap.
    Unmatched detections sitting on an ignore region are not counted."""
    care, ignore = _split_ground_truth(ground_truth)
    result = match_boxes(care, detections, overlap)
    ignore_ov = box_iou_matrix([detections[j] for j in result.unmatched_b], ignore)
    fp = sum(1 for row in ignore_ov if not (len(row) and row.max() >= overlap))
    return Counts(tp=len(result.pairs), fp=fp, fn=len(result.unmatched_a))


def detection_counts(detections: Dict[int, List[ScoredBox]], ground_truth: Dict[int, list],
                     overlap: float = 0.5) -> Counts:
    total = Counts()
    for frame in sorted(set(detections) | set(ground_truth)):
        total += frame_counts(detections.get(frame, []), ground_truth.get(frame, []), overlap)
    return total


def errors_as_boxes(errors: Sequence[Hypothesis]) -> Dict[int, List[ScoredBox]]:
    """Predicted errors enter the detection set at their classifier probability."""
    by_frame = defaultdict(list)
    for h in errors:
        confidence = h.score if h.score is not None else h.confidence
        by_frame[h.frame].append(ScoredBox(h.box, confidence, frame=h.frame))
    return dict(by_frame)


def f1_with_corrections(detections: Dict[int, List[ScoredBox]], errors: Dict[int, List[ScoredBox]],
                        ground_truth: Dict[int, list], overlap: float = 0.5, fusion_overlap: float = 0.7):
    """F1 of the detector alone and after merging the predicted errors.

    Returns (f1_before, f1_after, counts_before, counts_after). The merged set
    is deduplicated with NMS at `fusion_overlap` before matching.
    """
    before = detection_counts(detections, ground_truth, overlap)
    merged = {}
    for frame in set(detections) | set(errors):
        merged[frame] = nms(list(detections.get(frame, [])) + list(errors.get(frame, [])), fusion_overlap)
    after = detection_counts(merged, ground_truth, overlap)
    return before.f1, after.f1, before, after


def detector_average_precision(detections: Dict[int, List[ScoredBox]], ground_truth: Dict[int, list],
                               overlap: float = 0.5) -> Tuple[float, List[PRPoint]]:
    """AP of a detector against ground truth, greedy in confidence order.

    Each detection takes the best-overlapping unclaimed object of its frame;
    detections landing on ignore regions are dropped from the ranking.
    """
    ranked = sorted(
        (d for frame in detections for d in detections[frame]),
        key=lambda d: (-d.confidence, d.frame) + d.box.as_tuple(),
    )
    split = {frame: _split_ground_truth(items) for frame, items in ground_truth.items()}
    claimed = defaultdict(set)
    items = []
    for d in ranked:
        care, ignore = split.get(d.frame, ([], []))
        ious = box_iou_matrix([d], care)[0] if care else np.zeros(0)
        free = [k for k in range(len(care)) if k not in claimed[d.frame]]
        best = max(free, key=lambda k: (ious[k], -k), default=None)
        if best is not None and ious[best] >= overlap:
            claimed[d.frame].add(best)
            items.append(ScoredItem(d.confidence, 1, (d.frame,) + d.box.as_tuple()))
            continue
        if ignore and box_iou_matrix([d], ignore)[0].max() >= overlap:
            continue
        items.append(ScoredItem(d.confidence, 0, (d.frame,) + d.box.as_tuple()))

    num_positives = sum(len(care) for care, _ in split.values())
    return average_precision(items, num_positives=num_positives)


def scored_items(hypotheses: Sequence[Hypothesis]) -> List[ScoredItem]:
    items = []
    for h in hypotheses:
        if h.label is None or h.score is None:
            raise ValueError(f'hypothesis at frame {h.frame} of {h.sequence!r} needs both a label and a score')
        items.append(ScoredItem(h.score, int(h.label), h.sort_key()))
    return items


def evaluate_hypotheses(hypotheses: Sequence[Hypothesis], threshold: float = 0.5) -> EvalReport:
    """Classifier AP against the naive flag-everything baseline for one cue."""
    cues = {h.cue for h in hypotheses}
    if len(cues) != 1:
        raise ValueError(f'expected hypotheses of one cue, got {sorted(c.value for c in cues)}')
    items = scored_items(hypotheses)
    ap, points = average_precision(items)
    naive_ap, _ = naive_baseline([item.label for item in items])
    return EvalReport(
        cue=cues.pop().value,
        ap=ap,
        pr_points=points,
        naive_ap=naive_ap,
        threshold=threshold,
        counts=counts_at_threshold(items, threshold),
        n_hypotheses=len(items),
        n_positive=sum(item.label for item in items),
    )


def fuse_cues(temporal_errors: Sequence[Hypothesis], stereo_errors: Sequence[Hypothesis],
              overlap: float = 0.7) -> Tuple[List[Hypothesis], FusionStats]:
    """Concatenate both cues' errors and suppress duplicates with NMS.

    Suppression stays within a (sequence, frame). Errors rank by their
    classifier score.
    """
    for h in list(temporal_errors) + list(stereo_errors):
        if h.score is None:
            raise ValueError(f'error at frame {h.frame} of {h.sequence!r} carries no score')
    combined = list(temporal_errors) + list(stereo_errors)
    by_sequence = defaultdict(list)
    for index, h in enumerate(combined):
        by_sequence[h.sequence].append(index)

    fused, intersection = [], 0
    shared = {Cue.TEMPORAL: 0, Cue.STEREO: 0}
    for sequence in sorted(by_sequence):
        indices = by_sequence[sequence]
        boxes = [ScoredBox(combined[i].box, combined[i].score, frame=combined[i].frame) for i in indices]
        for kept, suppressed in nms_clusters(boxes, overlap):
            members = [combined[indices[k]] for k in [kept] + suppressed]
            fused.append(members[0])
            if len({m.cue for m in members}) > 1:
                intersection += 1
                for m in members:
                    shared[m.cue] += 1

    t_total, s_total = len(temporal_errors), len(stereo_errors)
    stats = FusionStats(
        temporal_total=t_total,
        stereo_total=s_total,
        temporal_shared=shared[Cue.TEMPORAL],
        stereo_shared=shared[Cue.STEREO],
        temporal_unique=t_total - shared[Cue.TEMPORAL],
        stereo_unique=s_total - shared[Cue.STEREO],
        intersection=intersection,
        fused_total=len(fused),
    )
    return fused, stats


def pr_table(points: Sequence[PRPoint]) -> pd.DataFrame:
    return pd.DataFrame([vars(p) for p in points], columns=['recall', 'precision', 'threshold'])


def write_pr_csv(points: Sequence[PRPoint], stream):
    pr_table(points).to_csv(stream, index=False, lineterminator='\n')


def write_report(report: EvalReport, stream):
    for key, value in report.as_dict().items():
        stream.write(f'{key}: {value!r}\n' if isinstance(value, float) else f'{key}: {value}\n')
