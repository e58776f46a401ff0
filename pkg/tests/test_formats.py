import io

import numpy as np
import pytest

from boxes import BBox, Category, ScoredBox
from cues.features import FEATURE_NAMES, FeatureVector
from cues.stereo import DisparityMap
from cues.temporal import Cue, Hypothesis
from formats import (HYPOTHESIS_COLUMNS, FormatError, GroundTruthObject, ModelFormatError, OracleMiss, PoseRecord,
                     kitti_to_detections, load_sequence, parse_detections, parse_kitti_labels, parse_oracle_misses,
                     parse_tracklets, read_disparity, read_hypotheses_csv, read_model, read_poses, read_seqmap,
                     relevant_ground_truth, write_detections, write_disparity, write_hypotheses_csv,
                     write_kitti_labels, write_model, write_oracle_misses, write_poses, write_seqmap)
from models.forest import LEAF, DecisionTree, ForestModel

KITTI_TAIL = '-1 -1 -1 -1000 -1000 -1000 -10'


def text(s):
    return io.StringIO(s)


def test_kitti_labels_collapse_and_ignore():
    labels = parse_kitti_labels(text(
        f'0 3 Van 0 0 -1.5 100 50 200 150 {KITTI_TAIL}\n'
        f'0 -1 DontCare -1 -1 -10 300 40 350 90 {KITTI_TAIL}\n'
        f'1 4 Car 0 0 0.2 10 10 60 30 {KITTI_TAIL}\n'
    ))
    van, dont_care = labels[0]
    assert van.category == Category.CAR
    assert (van.frame, van.track_id, van.box) == (0, 3, BBox(100, 50, 200, 150))
    assert not van.is_ignore
    assert dont_care.is_ignore and dont_care.category == Category.DONT_CARE
    (short,) = labels[1]
    assert short.is_ignore


def test_kitti_labels_keep_classes_without_collapse():
    labels = parse_kitti_labels(text(f'0 3 Van 0 0 -1.5 100 50 200 150 {KITTI_TAIL}\n'), collapse_classes=False)
    assert labels[0][0].category == Category.VAN


def test_kitti_labels_errors_name_the_line():
    with pytest.raises(FormatError) as info:
        parse_kitti_labels(text(f'0 3 Car 0 0 0 1 1 50 50 {KITTI_TAIL}\n0 4 Car 0 0 0 x 1 50 50 {KITTI_TAIL}\n'))
    assert info.value.line == 2
    with pytest.raises(FormatError) as info:
        parse_kitti_labels(text(f'0 3 Car 0 0 0 50 1 40 50 {KITTI_TAIL}\n'))
    assert info.value.line == 1


def test_kitti_results_and_relevant_classes():
    labels = parse_kitti_labels(text(
        f'2 0 Car 0 0 0 10 10 60 60 {KITTI_TAIL} 0.75\n'
        f'2 1 Pedestrian 0 0 0 70 10 90 60 {KITTI_TAIL} 0.5\n'
        f'2 -1 DontCare -1 -1 -10 100 10 150 60 {KITTI_TAIL}\n'
    ))
    relevant = relevant_ground_truth(labels)
    assert [o.category for o in relevant[2]] == [Category.CAR, Category.DONT_CARE]
    detections = kitti_to_detections(relevant)
    assert [d.confidence for d in detections[2]] == [0.75]

    buf = io.StringIO()
    write_kitti_labels(labels, buf)
    assert parse_kitti_labels(text(buf.getvalue())) == labels


def test_detections():
    dets = parse_detections(text('7 Car 0.98 10 20 110 120\n'))
    assert dets == {7: [ScoredBox(BBox(10, 20, 110, 120), 0.98, Category.CAR, 7)]}
    assert parse_detections(text('')) == {}
    with pytest.raises(FormatError, match='out of range'):
        parse_detections(text('7 Car 1.5 10 20 110 120\n'))

    buf = io.StringIO()
    write_detections(dets, buf)
    assert parse_detections(text(buf.getvalue())) == dets


def test_tracklets():
    tracks = parse_tracklets(text('4 1 0.9 0 0 10 10\n3 1 0.8 0 0 10 10\n4 2 0.7 20 0 30 10\n'))
    assert [t.length for t in tracks[3]] == [1]
    assert {t.track_id: t.length for t in tracks[4]} == {1: 2, 2: 1}
    # a gap in the track still counts towards its length
    gapped = parse_tracklets(text('3 7 0.9 0 0 10 10\n5 7 0.6 2 0 12 10\n'))
    assert [t.length for t in gapped[5]] == [3]
    assert parse_tracklets(text('')) == {}
    with pytest.raises(FormatError, match='duplicate'):
        parse_tracklets(text('5 9 0.9 0 0 10 10\n5 9 0.8 0 0 10 10\n'))


def pgm(header, values):
    return io.BytesIO(header + np.asarray(values, dtype='>u2').tobytes())


def test_read_disparity():
    disparity = read_disparity(pgm(b'P5\n2 1\n65535\n', [5120, 0]))
    assert disparity.values[0, 0] == 20.0
    assert disparity.valid.tolist() == [[True, False]]

    with pytest.raises(FormatError, match='maxval'):
        read_disparity(io.BytesIO(b'P5 4 2 255\n' + bytes(8)))
    with pytest.raises(FormatError, match='magic'):
        read_disparity(io.BytesIO(b'P2\n1 1\n65535\n0'))
    with pytest.raises(FormatError, match='truncated'):
        read_disparity(pgm(b'P5\n2 2\n65535\n', [1, 2, 3]))


def test_disparity_write_read():
    values = np.array([[0.0, 20.0, 0.5], [33.25, 1.0, 2.0]])
    disparity = DisparityMap(values, values > 0)
    buf = io.BytesIO()
    write_disparity(disparity, buf)
    buf.seek(0)
    assert read_disparity(buf) == disparity


def test_poses():
    assert read_poses(text('frame,x_m,y_m\n0,5.0,-3.25\n')) == [PoseRecord(0, 5.0, -3.25)]
    with pytest.raises(FormatError, match='duplicate'):
        read_poses(text('0,1,1\n0,2,2\n'))
    with pytest.raises(FormatError):
        read_poses(text('0,abc,1\n'))

    poses = [PoseRecord(0, 1.5, 2.0), PoseRecord(3, -4.0, 0.125)]
    buf = io.StringIO()
    write_poses(poses, buf)
    assert read_poses(text(buf.getvalue())) == poses


def test_oracle_misses_and_seqmap():
    misses = {3: [OracleMiss(3, 7, BBox(1, 2, 30, 40))]}
    buf = io.StringIO()
    write_oracle_misses(misses, buf)
    assert parse_oracle_misses(text(buf.getvalue())) == misses

    buf = io.StringIO()
    write_seqmap([('0000', 480, 144, 60)], buf)
    assert read_seqmap(text(buf.getvalue())) == [('0000', 480, 144, 60)]
    with pytest.raises(FormatError):
        read_seqmap(text('0000 480 144\n'))


def split_tree(feature):
    return DecisionTree(feature=[feature, LEAF, LEAF], threshold=[0.25, -2.0, -2.0], left=[1, LEAF, LEAF],
                        right=[2, LEAF, LEAF], probability=[0.5, 0.0, 1.0], impurity=[0.5, 0.0, 0.0],
                        n_samples=[4, 2, 2])


def dump(model):
    buf = io.StringIO()
    write_model(model, buf)
    return buf.getvalue()


def test_model_round_trip():
    model = ForestModel(Cue.TEMPORAL, 12, 3, [DecisionTree.leaf(1.0, 5), split_tree(11)], {'n_trees': '2'})
    document = dump(model)
    loaded = read_model(text(document))
    assert loaded.cue == Cue.TEMPORAL and loaded.seed == 3
    assert loaded.metadata == {'n_trees': '2'}
    assert dump(loaded) == document

    single = read_model(text(dump(ForestModel(Cue.STEREO, 11, 0, [DecisionTree.leaf(1.0)]))))
    assert single.trees[0].predict_batch(np.zeros((1, 11)))[0] == 1.0


def test_model_load_errors():
    document = dump(ForestModel(Cue.STEREO, 11, 0, [split_tree(3)]))

    with pytest.raises(ModelFormatError, match='version'):
        read_model(text(document.replace('fnminer-forest 1', 'fnminer-forest 2')))

    out_of_range = document.replace('\n0 3 0.25', '\n0 11 0.25')
    with pytest.raises(ModelFormatError, match='feature 11'):
        read_model(text(out_of_range))

    dangling = document.replace('\n0 3 0.25 1 2', '\n0 3 0.25 1 7')
    with pytest.raises(ModelFormatError, match='dangling'):
        read_model(text(dangling))


def hypothesis(cue, **kwargs):
    features = FeatureVector(0.1, -0.2, 0.3, 0.25, 0.7, 2, 0.5, 0.8, 1, 0.4, 0.6,
                             5 if cue == Cue.TEMPORAL else 0)
    defaults = dict(box=BBox(10.5, 20, 60, 70.25), confidence=0.7, cue=cue, frame=4,
                    track_length=5 if cue == Cue.TEMPORAL else 0, source_id=3, sequence='0007',
                    features=features)
    defaults.update(kwargs)
    return Hypothesis(**defaults)


def test_hypotheses_csv():
    buf = io.StringIO()
    write_hypotheses_csv([], buf)
    assert buf.getvalue() == ','.join(HYPOTHESIS_COLUMNS) + '\n'
    assert read_hypotheses_csv(text(buf.getvalue())) == []

    items = [hypothesis(Cue.TEMPORAL), hypothesis(Cue.TEMPORAL, frame=5, label=1, score=0.875),
             hypothesis(Cue.TEMPORAL, frame=6, features=None)]
    buf = io.StringIO()
    write_hypotheses_csv(items, buf)
    header, first = buf.getvalue().splitlines()[:2]
    assert header.split(',')[:len(FEATURE_NAMES)] == list(FEATURE_NAMES)
    assert first.split(',')[len(FEATURE_NAMES) - 1] == '5'
    assert read_hypotheses_csv(text(buf.getvalue())) == items


def test_stereo_rows_carry_zero_track_length():
    buf = io.StringIO()
    write_hypotheses_csv([hypothesis(Cue.STEREO)], buf)
    row = dict(zip(HYPOTHESIS_COLUMNS, buf.getvalue().splitlines()[1].split(',')))
    assert row['n'] == '0' and row['cue'] == 'stereo'
    (back,) = read_hypotheses_csv(text(buf.getvalue()))
    assert back.cue == Cue.STEREO and back.features.n == 0


def test_hypotheses_csv_rejects_foreign_header():
    with pytest.raises(FormatError):
        read_hypotheses_csv(text('a,b,c\n1,2,3\n'))


def test_load_sequence(tmp_path):
    seq = tmp_path / '0000'
    (seq / 'disparity').mkdir(parents=True)
    (seq / 'detections_left.txt').write_text('0 Car 0.9 10 10 40 40\n')
    (seq / 'labels.txt').write_text(f'1 0 Car 0 0 0 10 10 40 40 {KITTI_TAIL}\n')
    (seq / 'poses.csv').write_text('frame,x_m,y_m\n0,0.0,0.0\n1,1.0,0.0\n')
    with open(seq / 'disparity' / '000001.pgm', 'wb') as f:
        write_disparity(DisparityMap.constant(4, 2, 3.0), f)

    dataset = load_sequence(str(tmp_path), '0000', 100, 50, 2)
    assert dataset.frames == [0, 1]
    assert dataset.detections_right is None and dataset.tracklets is None
    assert dataset.ground_truth[1] == [GroundTruthObject(1, 0, Category.CAR, BBox(10, 10, 40, 40), alpha=0.0)]
    assert list(dataset.disparity_paths) == [1]
    assert dataset.disparity(1) == DisparityMap.constant(4, 2, 3.0)
    with pytest.raises(FormatError):
        dataset.disparity(0)

    with pytest.raises(FileNotFoundError):
        load_sequence(str(tmp_path), '0001', 100, 50, 2)
    with pytest.raises(FormatError, match='not part of the sequence'):
        load_sequence(str(tmp_path), '0000', 100, 50, 1)
