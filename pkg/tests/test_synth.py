import filecmp
import os

import pytest

from boxes import BBox, iou
from cues.stereo import generate_stereo_hypotheses, shift_detections
from cues.temporal import Cue, Hypothesis, generate_temporal_hypotheses
from formats import OracleMiss, load_sequence, read_seqmap
from models.configs import get_small_synth_config
from models.labeling import Label, LabeledHypothesis
from synth import generate, oracle_label_check, quantize, validate_config


def tiny_config(**overrides):
    config = get_small_synth_config()
    config.n_sequences = 2
    config.frames_per_sequence = 8
    for key, value in overrides.items():
        config[key] = value
    return config


def single_object_config(**overrides):
    """One static object, exact boxes and a clean disparity map."""
    config = tiny_config(
        n_sequences=3,
        frames_per_sequence=30,
        object_count_range=(1, 1),
        spawn_rate=0.0,
        fp_rate=0.0,
        box_jitter=0.0,
        velocity_range=(0.0, 0.0),
        velocity_jitter=0.0,
        disparity_failure_prob=0.0,
        disparity_speckle=0.0,
    )
    for key, value in overrides.items():
        config[key] = value
    return config


def load_all(root):
    with open(os.path.join(root, 'seqmap.txt')) as f:
        entries = read_seqmap(f)
    return [load_sequence(root, *entry) for entry in entries]


def same_tree(a, b):
    comparison = filecmp.dircmp(a, b)
    assert not comparison.left_only and not comparison.right_only
    _, mismatch, errors = filecmp.cmpfiles(a, b, comparison.common_files, shallow=False)
    assert not mismatch and not errors
    for sub in comparison.common_dirs:
        same_tree(os.path.join(a, sub), os.path.join(b, sub))


def test_quantize_lands_on_lattice():
    assert quantize(1.0 / 3) * 256 == round(256 / 3)
    assert quantize(2.5) == 2.5


def test_validate_config():
    validate_config(get_small_synth_config())
    with pytest.raises(ValueError):
        validate_config(tiny_config(miss_probability=1.5))
    with pytest.raises(ValueError):
        validate_config(tiny_config(image_width=60))


def test_generation_is_deterministic(tmp_path):
    config = tiny_config()
    summaries = generate(config, str(tmp_path / 'a'))
    generate(config, str(tmp_path / 'b'))
    generate(config, str(tmp_path / 'c'), workers=2)
    same_tree(tmp_path / 'a', tmp_path / 'b')
    same_tree(tmp_path / 'a', tmp_path / 'c')

    assert [s.sequence_id for s in summaries] == ['0000', '0001']
    for name in ('labels.txt', 'detections_left.txt', 'detections_right.txt', 'tracklets.txt',
                 'oracle_misses.txt', 'poses.csv'):
        assert (tmp_path / 'a' / '0000' / name).exists()
    assert len(os.listdir(tmp_path / 'a' / '0000' / 'disparity')) == 8


def test_other_seed_changes_the_world(tmp_path):
    generate(tiny_config(seed=0), str(tmp_path / 'a'))
    generate(tiny_config(seed=1), str(tmp_path / 'b'))
    assert not filecmp.cmp(tmp_path / 'a' / '0000' / 'labels.txt', tmp_path / 'b' / '0000' / 'labels.txt',
                           shallow=False)


def test_summary_counts_match_files(tmp_path):
    summaries = generate(tiny_config(), str(tmp_path))
    for summary, dataset in zip(summaries, load_all(str(tmp_path))):
        assert summary.n_oracle_misses == sum(len(v) for v in dataset.oracle_misses.values())
        assert summary.n_left_detections == sum(len(v) for v in dataset.detections_left.values())
        assert summary.n_ground_truth == sum(len(v) for v in dataset.ground_truth.values())
        assert len(dataset.poses) == summary.n_frames


def test_no_misses_means_no_temporal_hypotheses(tmp_path):
    generate(single_object_config(miss_probability=0.0), str(tmp_path))
    for dataset in load_all(str(tmp_path)):
        assert all(not misses for misses in dataset.oracle_misses.values())
        for frame in dataset.frames:
            hyps = generate_temporal_hypotheses(dataset.tracklets.get(frame, []),
                                                dataset.detections_left.get(frame, []), 0.5)
            assert hyps == []


def test_stereo_cue_recovers_planted_misses(tmp_path):
    generate(single_object_config(miss_probability=0.5), str(tmp_path))
    checked = 0
    for dataset in load_all(str(tmp_path)):
        for frame in dataset.frames:
            right = dataset.detections_right.get(frame, [])
            shifted = shift_detections(right, dataset.disparity(frame), 0.5).shifted
            hyps = generate_stereo_hypotheses(shifted, dataset.detections_left.get(frame, []), 0.5)
            misses = dataset.oracle_misses.get(frame, [])
            for s in shifted:
                # boxes cut by the left border do not shift back onto the object
                if right[s.source_id].box.x1 <= 0:
                    continue
                produced = [h for h in hyps if h.source_id == s.source_id]
                if misses:
                    (h,) = produced
                    assert iou(h.box, misses[0].box) == 1.0
                    checked += 1
                else:
                    assert produced == []
    assert checked > 0


def test_stereo_shift_reproduces_left_ground_truth_exactly(tmp_path):
    generate(single_object_config(miss_probability=0.0), str(tmp_path))
    checked = 0
    for dataset in load_all(str(tmp_path)):
        for frame in dataset.frames:
            right = dataset.detections_right.get(frame, [])
            (truth,) = dataset.ground_truth[frame]
            for s in shift_detections(right, dataset.disparity(frame), 0.5).shifted:
                if right[s.source_id].box.x1 <= 0:
                    continue
                assert s.box.box == truth.box
                assert iou(s.box.box, truth.box) == 1.0
                checked += 1
    assert checked > 0


def valid(box, frame=0, sequence='0000', label=Label.VALID_ERROR):
    h = Hypothesis(box, 0.8, Cue.TEMPORAL, frame, track_length=2, sequence=sequence)
    return LabeledHypothesis(h, label)


def test_oracle_label_check():
    oracle = {'0000': {0: [OracleMiss(0, 1, BBox(0, 0, 10, 10))]}}
    agreement = oracle_label_check([
        valid(BBox(0, 0, 10, 10)),
        valid(BBox(50, 50, 60, 60)),
        valid(BBox(0, 0, 10, 10), frame=1),
        valid(BBox(0, 0, 10, 10), label=Label.INVALID),
    ], oracle)
    assert agreement.checked == 3
    assert agreement.agreed == 1
    assert len(agreement.disagreements) == 2
    assert agreement.rate == pytest.approx(1 / 3)

    assert oracle_label_check([], oracle).rate == 1.0
    # plain hypotheses read back from a labeled CSV are accepted too
    assert oracle_label_check([valid(BBox(0, 0, 10, 10)).as_hypothesis()], oracle).agreed == 1
