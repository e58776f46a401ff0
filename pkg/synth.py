import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import ml_collections
import numpy as np

from boxes import BBox, Category, ScoredBox, iou
from cues.stereo import DisparityMap, region_slices
from cues.temporal import baseline_track, filter_detections
from formats import (GroundTruthObject, OracleMiss, PoseRecord, write_detections, write_disparity,
                     write_kitti_labels, write_oracle_misses, write_poses, write_seqmap, write_tracklets)
from models.labeling import Label, LabeledHypothesis

# everything geometric lives on a 1/256 px lattice, the resolution of the disparity files
QUANTUM = 256.0


def quantize(value: float) -> float:
    return round(value * QUANTUM) / QUANTUM


def validate_config(config):
    for name in ('miss_probability', 'disparity_speckle', 'disparity_failure_prob', 'spawn_rate', 'fp_rate'):
        if not 0.0 <= config[name] <= 1.0:
            raise ValueError(f'{name}={config[name]} must lie in [0, 1]')
    if not 0.0 <= config.confidence_noise <= 0.5:
        raise ValueError(f'confidence_noise={config.confidence_noise} must lie in [0, 0.5]')
    if config.image_width <= 0 or config.image_height <= 0:
        raise ValueError(f'invalid image size {config.image_width}x{config.image_height}')
    if config.n_sequences < 0 or config.frames_per_sequence < 0:
        raise ValueError('sequence and frame counts must be non-negative')
    lo, hi = config.depth_range_m
    if not 0 < lo <= hi:
        raise ValueError(f'invalid depth range {config.depth_range_m}')
    widest = config.focal_px * config.object_width_range_m[1] / lo
    if widest >= config.image_width:
        raise ValueError(f'objects up to {widest:.1f}px wide do not fit a {config.image_width}px image')


def sequence_name(index) -> str:
    return f'{index:04d}'


@dataclass
class _Object:
    track_id: int
    depth_m: float
    width_m: float
    center_x: float
    velocity: float

    def box(self, config) -> BBox:
        """Left-image box of a car standing on the road plane."""
        f = config.focal_px
        w = quantize(f * self.width_m / self.depth_m)
        h = quantize(f * config.object_height_m / self.depth_m)
        y2 = quantize(config.image_height / 2 + f * config.camera_height_m / self.depth_m)
        x1 = quantize(self.center_x - w / 2)
        return BBox(x1, y2 - h, x1 + w, y2)

    def disparity(self, config) -> float:
        return quantize(config.focal_px * config.baseline_m / self.depth_m)

    def move(self, rng, config):
        self.center_x += self.velocity + rng.normal(0.0, config.velocity_jitter)
        half = self.box(config).width / 2
        # bounce off the image borders
        if self.center_x - half < 0:
            self.center_x = 2 * half - self.center_x
            self.velocity = abs(self.velocity)
        elif self.center_x + half > config.image_width:
            self.center_x = 2 * (config.image_width - half) - self.center_x
            self.velocity = -abs(self.velocity)
        self.center_x = min(max(self.center_x, half), config.image_width - half)


def _spawn(rng, config, track_id) -> _Object:
    depth = rng.uniform(*config.depth_range_m)
    width = rng.uniform(*config.object_width_range_m)
    half = config.focal_px * width / depth / 2
    return _Object(
        track_id=track_id,
        depth_m=depth,
        width_m=width,
        center_x=rng.uniform(half, config.image_width - half),
        velocity=rng.uniform(*config.velocity_range),
    )


def _jitter(rng, box: BBox, sigma, image_width, image_height) -> Optional[BBox]:
    if sigma > 0:
        scale = np.asarray([box.width, box.height, box.width, box.height])
        coords = [quantize(v) for v in np.asarray(box.as_tuple()) + rng.normal(0.0, sigma, size=4) * scale]
        if coords[2] <= coords[0] or coords[3] <= coords[1]:
            return None
        box = BBox(*coords)
    return box.clipped(image_width, image_height)


def _duplicate(rng, box: BBox, frame, config) -> Optional[ScoredBox]:
    """Spurious detection beside a real object, overlapping it only loosely."""
    offset = rng.choice([-1.0, 1.0]) * rng.uniform(0.7, 1.1) * box.width
    scale = rng.uniform(0.8, 1.2)
    cx = box.center[0] + offset
    w, h = box.width * scale, box.height * scale
    candidate = BBox(quantize(cx - w / 2), quantize(box.y2 - h), quantize(cx + w / 2), box.y2)
    clipped = candidate.clipped(config.image_width, config.image_height)
    if clipped is None or clipped.width < config.min_visible_width:
        return None
    return ScoredBox(clipped, min(1.0, 0.5 + rng.uniform(0.0, config.confidence_noise)), Category.CAR, frame)


def _camera_detections(rng, boxes: List[BBox], missed: List[bool], frame, config) -> List[ScoredBox]:
    detections = []
    for box, miss in zip(boxes, missed):
        if box is None:
            continue
        if not miss:
            jittered = _jitter(rng, box, config.box_jitter, config.image_width, config.image_height)
            if jittered is not None:
                confidence = 1.0 - rng.uniform(0.0, config.confidence_noise)
                detections.append(ScoredBox(jittered, confidence, Category.CAR, frame))
        if rng.random() < config.fp_rate:
            duplicate = _duplicate(rng, box, frame, config)
            if duplicate is not None:
                detections.append(duplicate)
    return detections


def road_disparity(config) -> DisparityMap:
    """Disparity of the flat road seen by a camera at camera_height_m; the sky is invalid."""
    rows = np.arange(config.image_height, dtype=np.float64) + 0.5
    below = rows - config.image_height / 2
    column = np.round(config.baseline_m * below / config.camera_height_m * QUANTUM) / QUANTUM
    values = np.repeat(np.where(below > 0, column, 0.0)[:, None], config.image_width, axis=1)
    return DisparityMap(values, values > 0)


def _paint_disparity(rng, objects: List[_Object], right_boxes: List[BBox], road: DisparityMap, config):
    values = road.values.copy()
    valid = road.valid.copy()
    far_to_near = sorted(range(len(objects)), key=lambda k: (-objects[k].depth_m, objects[k].track_id))
    for k in far_to_near:
        if rng.random() < config.disparity_failure_prob:
            continue
        slices = region_slices(right_boxes[k], config.image_width, config.image_height)
        if slices is None:
            continue
        values[slices] = objects[k].disparity(config)
        valid[slices] = True
    if config.disparity_speckle > 0:
        valid &= rng.random(valid.shape) >= config.disparity_speckle
    return DisparityMap(values, valid)


@dataclass
class SequenceSummary:
    sequence_id: str
    n_frames: int
    n_objects: int = 0
    n_ground_truth: int = 0
    n_oracle_misses: int = 0
    n_left_detections: int = 0
    n_right_detections: int = 0
    n_tracklets: int = 0


def generate_sequence(config, index, out_dir) -> SequenceSummary:
    """Simulate one sequence and write its files under out_dir/<sequence>."""
    if isinstance(config, dict):
        config = ml_collections.ConfigDict(config)
    rng = np.random.default_rng([config.seed, index])
    W, H = config.image_width, config.image_height
    sequence_id = sequence_name(index)
    seq_dir = os.path.join(out_dir, sequence_id)
    os.makedirs(os.path.join(seq_dir, 'disparity'), exist_ok=True)

    lo, hi = config.object_count_range
    objects = [_spawn(rng, config, k) for k in range(int(rng.integers(lo, hi + 1)))]
    next_id = len(objects)
    road = road_disparity(config)
    summary = SequenceSummary(sequence_id, config.frames_per_sequence)

    labels, left, right, oracle, poses = {}, {}, {}, {}, []
    for frame in range(config.frames_per_sequence):
        if frame > 0:
            for obj in objects:
                obj.move(rng, config)
            if rng.random() < config.spawn_rate:
                objects.append(_spawn(rng, config, next_id))
                next_id += 1

        left_boxes = [obj.box(config) for obj in objects]
        right_raw = [box.shifted(-obj.disparity(config)) for box, obj in zip(left_boxes, objects)]
        right_boxes = []
        for raw in right_raw:
            clipped = raw.clipped(W, H)
            right_boxes.append(clipped if clipped is not None and clipped.width >= config.min_visible_width
                               else None)

        left_missed = [rng.random() < config.miss_probability for _ in objects]
        if config.stereo_independent:
            right_missed = [rng.random() < config.miss_probability for _ in objects]
        else:
            right_missed = list(left_missed)

        labels[frame] = [GroundTruthObject(frame, obj.track_id, Category.CAR, box)
                         for obj, box in zip(objects, left_boxes)]
        oracle[frame] = [OracleMiss(frame, obj.track_id, box)
                         for obj, box, miss in zip(objects, left_boxes, left_missed) if miss]
        left[frame] = _camera_detections(rng, left_boxes, left_missed, frame, config)
        right[frame] = _camera_detections(rng, right_boxes, right_missed, frame, config)
        disparity = _paint_disparity(rng, objects, right_raw, road, config)
        with open(os.path.join(seq_dir, 'disparity', f'{frame:06d}.pgm'), 'wb') as f:
            write_disparity(disparity, f)

        poses.append(PoseRecord(frame, frame * config.ego_speed_m, (index % 4) * config.lane_spacing_m))
        summary.n_ground_truth += len(labels[frame])
        summary.n_oracle_misses += len(oracle[frame])
        summary.n_left_detections += len(left[frame])
        summary.n_right_detections += len(right[frame])

    frames = range(config.frames_per_sequence)
    tracklets = baseline_track(
        {frame: filter_detections(dets, config.detection_threshold) for frame, dets in left.items()},
        frames, W, H, **config.tracker.to_dict())
    summary.n_objects = next_id
    summary.n_tracklets = sum(len(items) for items in tracklets.values())

    for name, writer, payload in (
            ('labels.txt', write_kitti_labels, labels),
            ('detections_left.txt', write_detections, left),
            ('detections_right.txt', write_detections, right),
            ('tracklets.txt', write_tracklets, tracklets),
            ('oracle_misses.txt', write_oracle_misses, oracle),
            ('poses.csv', write_poses, poses)):
        with open(os.path.join(seq_dir, name), 'w') as f:
            writer(payload, f)
    return summary


def generate(config, out_dir, workers=1) -> List[SequenceSummary]:
    """Write a complete synthetic dataset: seqmap.txt, the resolved config and
    one directory per sequence. Each sequence draws from its own generator
    seeded with (seed, index), so the output does not depend on `workers`."""
    validate_config(config)
    os.makedirs(out_dir, exist_ok=True)
    indices = range(config.n_sequences)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(generate_sequence, config.to_dict(), index, out_dir) for index in indices]
            summaries = [future.result() for future in futures]
    else:
        summaries = [generate_sequence(config, index, out_dir) for index in indices]

    with open(os.path.join(out_dir, 'seqmap.txt'), 'w') as f:
        write_seqmap([(s.sequence_id, config.image_width, config.image_height, s.n_frames) for s in summaries], f)
    with open(os.path.join(out_dir, 'synth_config.txt'), 'w') as f:
        f.write(str(config))
    return summaries


@dataclass
class OracleAgreement:
    checked: int = 0
    agreed: int = 0
    disagreements: List = field(default_factory=list)

    @property
    def rate(self) -> float:
        # nothing to check counts as full agreement
        return self.agreed / self.checked if self.checked else 1.0


def oracle_label_check(labeled: Iterable, oracle: Dict[str, Dict[int, List[OracleMiss]]],
                       min_overlap: float = 0.5) -> OracleAgreement:
    """Every hypothesis labeled a valid error must cover a planted miss of
    the same sequence and frame at IoU >= min_overlap."""
    result = OracleAgreement()
    for item in labeled:
        h = item.as_hypothesis() if isinstance(item, LabeledHypothesis) else item
        if h.label != Label.VALID_ERROR:
            continue
        result.checked += 1
        misses = oracle.get(h.sequence, {}).get(h.frame, [])
        if any(iou(h.box, m.box) >= min_overlap for m in misses):
            result.agreed += 1
        else:
            result.disagreements.append(h)
    return result
