import filecmp
import json
import os
import shutil

import pytest

from cues.temporal import Cue
from formats import read_hypotheses_csv, read_model, write_model
from mine import main
from models.forest import DecisionTree, ForestModel

CUES = ('temporal', 'stereo')


def run(*argv):
    return main([str(a) for a in argv])


def summary(out, stage):
    with open(os.path.join(out, f'summary_{stage}.json')) as f:
        return json.load(f)


def run_pipeline(root, synth_config, *extra):
    data, out = root / 'data', root / 'out'
    assert run('synth', '--synth-config', synth_config, '--workers', 4, '--output-dir', data) == 0
    common = ('--data-path', data, '--output-dir', out)
    assert run('hypothesize-temporal', *common) == 0
    assert run('hypothesize-stereo', *common) == 0
    for cue in CUES:
        for stage in ('featurize', 'label', 'train', 'predict'):
            assert run(stage, '--cue', cue, *common) == 0, stage
        assert run('eval', '--cue', cue, *common, *extra) == 0
        assert run('oracle-check', '--cue', cue, *common) == 0
    assert run('fuse', *common) == 0
    assert run('geomap', *common) == 0
    return data, out


@pytest.fixture(scope='module')
def pipeline(tmp_path_factory):
    # 20 sequences of 100 frames, train on the first 4 and evaluate on the rest
    return run_pipeline(tmp_path_factory.mktemp('pipeline'), 'default', '--plot')


def test_synth_layout(pipeline):
    data, _ = pipeline
    assert sorted(os.listdir(data / '0000')) == ['detections_left.txt', 'detections_right.txt', 'disparity',
                                                  'labels.txt', 'oracle_misses.txt', 'poses.csv', 'tracklets.txt']
    assert summary(data, 'synth')['n_sequences'] == 20
    assert (data / 'synth_config.txt').exists()


def test_pipeline_outputs(pipeline):
    _, out = pipeline
    for name in ('hypotheses_temporal.csv', 'features_stereo.csv', 'labeled_temporal.csv', 'model_stereo.txt',
                 'predictions_temporal.csv', 'pr_temporal.csv', 'report_stereo.txt', 'pr_temporal.png',
                 'fused_errors.csv', 'heatmap.csv', 'heatmap.pgm', 'args.txt'):
        assert (out / name).exists(), name
    assert sorted(os.listdir(out / 'shifted')) == [f'{k:04d}.txt' for k in range(20)]
    # tracklets.txt came with the data, so nothing was tracked here
    assert not (out / 'tracklets').exists()


def test_stage_summaries(pipeline):
    _, out = pipeline
    hypotheses = summary(out, 'hypothesize_temporal')['hypotheses']
    with open(out / 'hypotheses_temporal.csv') as f:
        assert len(read_hypotheses_csv(f)) == hypotheses

    train = summary(out, 'train_temporal')
    assert train['n_trees'] == 30
    assert sum(train['feature_importances'].values()) == pytest.approx(1.0)
    assert len(summary(out, 'train_stereo')['feature_importances']) == 11

    # temporal predictions already exist when the stereo cue is evaluated
    assert 'overlap_intersection' in summary(out, 'eval_stereo')

    fused = summary(out, 'fuse')
    assert fused['fused_total'] <= fused['temporal_total'] + fused['stereo_total']
    assert summary(out, 'geomap')['cells'] > 0


@pytest.mark.parametrize('cue', CUES)
def test_classifier_beats_the_naive_baseline(pipeline, cue):
    _, out = pipeline
    report = summary(out, f'eval_{cue}')
    assert report['ap'] >= 0.85
    assert report['ap'] - report['naive_ap'] >= 0.10


@pytest.mark.parametrize('cue', CUES)
def test_corrections_do_not_lower_f1(pipeline, cue):
    _, out = pipeline
    report = summary(out, f'eval_{cue}')
    assert report['f1_after'] >= report['f1_before']


@pytest.mark.parametrize('cue', CUES)
def test_labels_agree_with_planted_misses(pipeline, cue):
    _, out = pipeline
    check = summary(out, f'oracle_check_{cue}')
    assert check['checked'] > 0
    assert check['rate'] == 1.0 and check['disagreements'] == 0


def same_outputs(a, b):
    comparison = filecmp.dircmp(a, b, ignore=['args.txt'])
    assert not comparison.left_only and not comparison.right_only
    _, mismatch, errors = filecmp.cmpfiles(a, b, comparison.common_files, shallow=False)
    assert not mismatch and not errors, mismatch
    for sub in comparison.common_dirs:
        same_outputs(os.path.join(a, sub), os.path.join(b, sub))


def test_two_runs_are_byte_identical(tmp_path):
    first = run_pipeline(tmp_path / 'first', 'small')
    second = run_pipeline(tmp_path / 'second', 'small')
    for a, b in zip(first, second):
        same_outputs(a, b)
    assert (first[1] / 'model_temporal.txt').read_bytes() == (second[1] / 'model_temporal.txt').read_bytes()


def test_baseline_tracklets_feed_featurize(tmp_path):
    data, out = tmp_path / 'data', tmp_path / 'out'
    assert run('synth', '--synth-config', 'small', '--output-dir', data) == 0
    for seq in os.listdir(data):
        if os.path.isdir(data / seq):
            os.remove(data / seq / 'tracklets.txt')
    common = ('--data-path', data, '--output-dir', out)
    assert run('hypothesize-temporal', *common) == 2
    assert run('hypothesize-temporal', '--baseline-tracker', *common) == 0
    assert sorted(os.listdir(out / 'tracklets')) == [f'{k:04d}.txt' for k in range(6)]
    assert run('featurize', '--cue', 'temporal', *common) == 0
    with open(out / 'features_temporal.csv') as f:
        rows = read_hypotheses_csv(f)
    assert rows and all(h.features is not None for h in rows)

    shutil.rmtree(out / 'tracklets')
    assert run('featurize', '--cue', 'temporal', *common) == 2


def test_models_only_train_on_the_train_split(pipeline):
    _, out = pipeline
    with open(out / 'model_temporal.txt') as f:
        model = read_model(f)
    with open(out / 'labeled_temporal.csv') as f:
        labeled = read_hypotheses_csv(f)
    train_rows = [h for h in labeled if h.sequence in ('0000', '0001', '0002', '0003')]
    assert model.cue == Cue.TEMPORAL
    assert int(model.metadata['n_train_samples']) == len(train_rows)


def test_predict_refuses_a_model_of_the_other_cue(pipeline, tmp_path):
    data, out = pipeline
    stereo_model = tmp_path / 'stereo.txt'
    with open(stereo_model, 'w') as f:
        write_model(ForestModel(Cue.STEREO, 11, 0, [DecisionTree.leaf(1.0)]), f)
    assert run('predict', '--cue', 'temporal', '--model', stereo_model, '--input', out / 'features_temporal.csv',
               '--data-path', data, '--output-dir', tmp_path) == 1


def test_eval_refuses_unlabeled_predictions(pipeline, tmp_path):
    data, out = pipeline
    common = ('--data-path', data, '--output-dir', tmp_path)
    shutil.copy(out / 'model_temporal.txt', tmp_path)
    assert run('predict', '--cue', 'temporal', '--input', out / 'features_temporal.csv', *common) == 0
    assert run('eval', '--cue', 'temporal', *common) == 1


def test_label_and_eval_refuse_without_ground_truth(pipeline, tmp_path):
    data, out = pipeline
    stripped = tmp_path / 'data'
    shutil.copytree(data, stripped, ignore=shutil.ignore_patterns('labels.txt', 'disparity'))
    common = ('--data-path', stripped, '--output-dir', tmp_path / 'out')
    assert run('hypothesize-temporal', *common) == 0
    assert run('label', '--cue', 'temporal', *common) == 1
    assert run('eval', '--cue', 'temporal', '--input', out / 'predictions_temporal.csv', *common) == 1


def test_missing_inputs_exit_with_2(tmp_path):
    assert run('hypothesize-temporal', '--data-path', tmp_path / 'nowhere', '--output-dir', tmp_path) == 2
    assert run('eval', '--cue', 'temporal', '--data-path', tmp_path, '--output-dir', tmp_path) == 2


def test_usage_errors_exit_with_1():
    with pytest.raises(SystemExit) as info:
        run('featurize')
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run('no-such-stage')
    assert info.value.code == 1
