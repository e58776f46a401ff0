import argparse
import os
import sys
import warnings
from collections import defaultdict
from dataclasses import replace

import numpy as np
from torch.utils.tensorboard import SummaryWriter

import evaluation
import geo
import models.configs
import synth
import utils
from boxes import ScoredBox
from cues.features import featurize_frame
from cues.stereo import generate_stereo_hypotheses, shift_detections
from cues.temporal import Cue, Tracklet, baseline_track, coasted_count, filter_detections, \
    generate_temporal_hypotheses
from formats import (FormatError, load_sequence, parse_tracklets, read_hypotheses_csv, read_model, read_seqmap,
                     relevant_ground_truth, write_hypotheses_csv, write_model, write_pgm8, write_tracklets)
from models.forest import feature_importances, predict_batch, train_forest
from models.labeling import LabeledHypothesis, label_hypotheses
from samplers import select_split

STAGES = ('synth', 'hypothesize-temporal', 'hypothesize-stereo', 'featurize', 'label', 'train', 'predict',
          'fuse', 'eval', 'geomap', 'oracle-check')

# split used when --split is not given
DEFAULT_SPLITS = {'train': 'train', 'eval': 'test'}


class StageRefused(Exception):
    """The inputs are well formed but the requested stage cannot run on them."""


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f'{self.prog}: error: {message}\n')


def _group_by_frame(hypotheses):
    groups = defaultdict(list)
    for index, h in enumerate(hypotheses):
        groups[h.sequence, h.frame].append(index)
    return groups


class Miner(object):
    def main(self, args):
        utils.set_deterministic(args.seed)
        os.makedirs(args.output_dir, exist_ok=True)
        print(args)
        self.tb_writer = SummaryWriter(args.tb_dir) if args.tb_dir else None
        self.eval_config = models.configs.get_eval_config()
        self.conf_threshold = self.get_conf_threshold(args)
        self.datasets = {}

        handler = getattr(self, args.stage.replace('-', '_'))
        summary = handler(args)
        stage = args.stage if getattr(args, 'cue', None) is None else f'{args.stage}_{args.cue}'
        if args.stage != 'synth':
            utils.save_args(args, args.output_dir, {'eval': self.eval_config})
        utils.write_summary(args.output_dir, stage.replace('-', '_'), summary)
        if self.tb_writer is not None:
            self.tb_writer.close()
        return summary

    def get_conf_threshold(self, args):
        threshold = args.conf_threshold
        if threshold is None:
            threshold = models.configs.DETECTOR_THRESHOLDS[args.detector]
        if not 0.0 <= threshold <= 1.0:
            raise StageRefused(f'confidence threshold {threshold} outside [0, 1]')
        return threshold

    # ------------------------------------------------------------------ inputs

    def load_sequences(self, args, split=None, disparity_dir='disparity'):
        split = split or self.get_split(args)
        if (split, disparity_dir) in self.datasets:
            return self.datasets[split, disparity_dir]
        seqmap_path = os.path.join(args.data_path, 'seqmap.txt')
        if not os.path.exists(seqmap_path):
            raise FileNotFoundError(f'{seqmap_path} does not exist')
        with open(seqmap_path) as f:
            entries = {entry[0]: entry for entry in read_seqmap(f)}
        selected = select_split(list(entries), split, args.num_train_sequences)
        datasets = [load_sequence(args.data_path, *entries[seq], min_height=self.eval_config.min_height,
                                  disparity_dir=disparity_dir) for seq in selected]
        self.datasets[split, disparity_dir] = datasets
        return datasets

    def get_split(self, args):
        if args.split is not None:
            return args.split
        return DEFAULT_SPLITS.get(args.stage, 'all')

    def output_path(self, args, name):
        return os.path.join(args.output_dir, name)

    def read_hypotheses(self, path):
        if not os.path.exists(path):
            raise FileNotFoundError(f'{path} does not exist')
        with open(path) as f:
            return read_hypotheses_csv(f)

    def write_hypotheses(self, path, hypotheses):
        with open(path, 'w', newline='') as f:
            write_hypotheses_csv(hypotheses, f)
        print(f'Wrote {len(hypotheses)} rows to {path}')

    def stage_input(self, args, default_names):
        if args.input:
            return args.input
        for name in default_names:
            path = self.output_path(args, name)
            if os.path.exists(path):
                return path
        return self.output_path(args, default_names[-1])

    def in_split(self, args, hypotheses):
        datasets = {d.sequence_id: d for d in self.load_sequences(args)}
        return [h for h in hypotheses if h.sequence in datasets], datasets

    # ------------------------------------------------------------------ stages

    def synth(self, args):
        config = models.configs.CONFIG_MAP[args.synth_config]()
        if args.seed is not None:
            config.seed = args.seed
        print(f'Generating {config.n_sequences} sequences of {config.frames_per_sequence} frames...')
        summaries = synth.generate(config, args.output_dir, workers=args.workers)
        return {
            'n_sequences': len(summaries),
            'sequences': {s.sequence_id: vars(s) for s in summaries},
        }

    def hypothesize_temporal(self, args):
        tracked_dir = self.output_path(args, 'tracklets')
        metric_logger = utils.MetricLogger(delimiter='  ')
        hypotheses, per_sequence = [], {}
        datasets = self.load_sequences(args)
        for dataset in metric_logger.log_every(datasets, args.print_freq, header='Temporal:'):
            tracklets = dataset.tracklets
            if tracklets is None:
                if not args.baseline_tracker:
                    raise FileNotFoundError(f'{dataset.root}/tracklets.txt is required '
                                            '(or pass --baseline-tracker)')
                tracker = models.configs.get_tracker_config()
                detections = {frame: filter_detections(dets, self.conf_threshold)
                              for frame, dets in dataset.detections_left.items()}
                tracklets = baseline_track(detections, dataset.frames, dataset.image_width, dataset.image_height,
                                           **tracker.to_dict())
                # featurize reads these back when the dataset has no tracklets.txt
                os.makedirs(tracked_dir, exist_ok=True)
                with open(os.path.join(tracked_dir, f'{dataset.sequence_id}.txt'), 'w') as f:
                    write_tracklets(tracklets, f)
            found = []
            for frame in dataset.frames:
                found += generate_temporal_hypotheses(tracklets.get(frame, []),
                                                      dataset.detections_left.get(frame, []),
                                                      self.conf_threshold, dataset.sequence_id)
            hypotheses += found
            per_sequence[dataset.sequence_id] = {
                'hypotheses': len(found),
                'coasted_tracklets': coasted_count(tracklets, dataset.detections_left),
            }
            metric_logger.update(hypotheses=len(found))

        self.write_hypotheses(self.output_path(args, 'hypotheses_temporal.csv'), hypotheses)
        return {'conf_threshold': self.conf_threshold, 'hypotheses': len(hypotheses), 'sequences': per_sequence}

    def hypothesize_stereo(self, args):
        direction = -1 if args.swap_cameras else 1
        disparity_dir = 'disparity_left' if args.swap_cameras else 'disparity'
        stereo = models.configs.get_stereo_config()
        shifted_dir = self.output_path(args, 'shifted')
        os.makedirs(shifted_dir, exist_ok=True)

        metric_logger = utils.MetricLogger(delimiter='  ')
        hypotheses, per_sequence = [], {}
        datasets = self.load_sequences(args, disparity_dir=disparity_dir)
        for dataset in metric_logger.log_every(datasets, args.print_freq, header='Stereo:'):
            if dataset.detections_right is None:
                raise FileNotFoundError(f'{dataset.root}/detections_right.txt is required for the stereo cue')
            source, target = dataset.detections_right, dataset.detections_left
            if args.swap_cameras:
                source, target = target, source
            found, shifted_by_frame, dropped = [], {}, 0
            for frame in dataset.frames:
                detections = source.get(frame, [])
                if not detections:
                    continue
                with warnings.catch_warnings(record=True):
                    warnings.simplefilter('always')
                    result = shift_detections(detections, dataset.disparity(frame), self.conf_threshold,
                                              stereo.min_valid_fraction, direction)
                dropped += result.dropped
                shifted_by_frame[frame] = [Tracklet(s.source_id, s.box) for s in result.shifted]
                found += generate_stereo_hypotheses(result.shifted, target.get(frame, []), self.conf_threshold,
                                                    dataset.sequence_id)
            with open(os.path.join(shifted_dir, f'{dataset.sequence_id}.txt'), 'w') as f:
                write_tracklets(shifted_by_frame, f)
            hypotheses += found
            shifted = sum(len(items) for items in shifted_by_frame.values())
            if dropped > shifted:
                warnings.warn(f'sequence {dataset.sequence_id}: {dropped} detections dropped for lack of '
                              f'valid disparity, {shifted} shifted')
            per_sequence[dataset.sequence_id] = {'hypotheses': len(found), 'shifted': shifted, 'dropped': dropped}
            metric_logger.update(hypotheses=len(found), dropped=dropped)

        self.write_hypotheses(self.output_path(args, 'hypotheses_stereo.csv'), hypotheses)
        return {'conf_threshold': self.conf_threshold, 'direction': direction, 'hypotheses': len(hypotheses),
                'sequences': per_sequence}

    def featurize(self, args):
        cue = Cue(args.cue)
        hypotheses = self.read_hypotheses(self.stage_input(args, [f'hypotheses_{cue.value}.csv']))
        hypotheses, datasets = self.in_split(args, hypotheses)
        sources_by_sequence = {}
        result = list(hypotheses)
        for (sequence, frame), indices in sorted(_group_by_frame(hypotheses).items()):
            dataset = datasets[sequence]
            detections = dataset.detections_right if args.swap_cameras else dataset.detections_left
            detections = filter_detections(detections.get(frame, []), self.conf_threshold, category=None)
            if sequence not in sources_by_sequence:
                sources_by_sequence[sequence] = self.load_sources(args, cue, dataset)
            items = sources_by_sequence[sequence].get(frame, [])
            sources = {t.track_id: t.box for t in items}
            frame_hyps = [hypotheses[i] for i in indices]
            vectors = featurize_frame(frame_hyps, detections, sources, dataset.image_width, dataset.image_height)
            for index, vector in zip(indices, vectors):
                result[index] = replace(hypotheses[index], features=vector)

        self.write_hypotheses(self.output_path(args, f'features_{cue.value}.csv'), result)
        return {'cue': cue.value, 'featurized': len(result)}

    def load_sources(self, args, cue, dataset):
        """Per-frame boxes the hypotheses of one sequence were drawn from."""
        if cue == Cue.TEMPORAL:
            if dataset.tracklets is not None:
                return dataset.tracklets
            path = self.output_path(args, os.path.join('tracklets', f'{dataset.sequence_id}.txt'))
            hint = 'run hypothesize-temporal --baseline-tracker first'
        else:
            path = self.output_path(args, os.path.join('shifted', f'{dataset.sequence_id}.txt'))
            hint = 'run hypothesize-stereo first'
        if not os.path.exists(path):
            raise FileNotFoundError(f'{path} does not exist; {hint}')
        with open(path) as f:
            return parse_tracklets(f)

    def label(self, args):
        cue = Cue(args.cue)
        hypotheses = self.read_hypotheses(
            self.stage_input(args, [f'features_{cue.value}.csv', f'hypotheses_{cue.value}.csv']))
        hypotheses, datasets = self.in_split(args, hypotheses)
        missing = sorted(seq for seq, d in datasets.items() if d.ground_truth is None)
        if missing:
            raise StageRefused(f'cannot label without ground truth; labels.txt missing for sequences {missing}')

        by_sequence = defaultdict(list)
        for h in hypotheses:
            by_sequence[h.sequence].append(h)
        labeled = []
        for sequence in sorted(by_sequence):
            dataset = datasets[sequence]
            detections = {frame: filter_detections(dets, self.conf_threshold, category=None)
                          for frame, dets in dataset.detections_left.items()}
            labeled += label_hypotheses(by_sequence[sequence], detections,
                                        relevant_ground_truth(dataset.ground_truth),
                                        self.eval_config.match_overlap)

        rows = [item.as_hypothesis() for item in labeled]
        self.write_hypotheses(self.output_path(args, f'labeled_{cue.value}.csv'), rows)
        positives = sum(1 for h in rows if h.label == 1)
        return {'cue': cue.value, 'hypotheses': len(hypotheses), 'labeled': len(rows),
                'ignored': len(hypotheses) - len(rows), 'valid_errors': positives}

    def train(self, args):
        cue = Cue(args.cue)
        hypotheses = self.read_hypotheses(self.stage_input(args, [f'labeled_{cue.value}.csv']))
        hypotheses, _ = self.in_split(args, hypotheses)
        if not hypotheses:
            raise StageRefused(f'no labeled {cue.value} hypotheses in the {self.get_split(args)} split')
        if any(h.features is None or h.label is None for h in hypotheses):
            raise StageRefused('training needs featurized and labeled hypotheses')

        config = models.configs.get_forest_config()
        print(f'Training {config.n_trees} trees on {len(hypotheses)} {cue.value} hypotheses...')
        model = train_forest([LabeledHypothesis.from_hypothesis(h) for h in hypotheses], n_trees=config.n_trees,
                             seed=args.seed, min_samples_split=config.min_samples_split, workers=args.workers)
        model.metadata['conf_threshold'] = repr(self.conf_threshold)
        path = args.model or self.output_path(args, f'model_{cue.value}.txt')
        with open(path, 'w') as f:
            write_model(model, f)
        print(f'Wrote model to {path}')

        importances = feature_importances(model).as_dict(model.feature_names)
        if self.tb_writer is not None:
            for name, weight in importances.items():
                self.tb_writer.add_scalar(f'importance_{cue.value}/{name}', weight, 0)
        return {'cue': cue.value, 'n_train': len(hypotheses), 'n_trees': len(model.trees),
                'feature_importances': importances, 'metadata': dict(model.metadata)}

    def predict(self, args):
        cue = Cue(args.cue)
        path = args.model or self.output_path(args, f'model_{cue.value}.txt')
        if not os.path.exists(path):
            raise FileNotFoundError(f'{path} does not exist')
        with open(path) as f:
            model = read_model(f)
        hypotheses = self.read_hypotheses(
            self.stage_input(args, [f'labeled_{cue.value}.csv', f'features_{cue.value}.csv']))
        hypotheses, _ = self.in_split(args, hypotheses)

        cues = {h.cue for h in hypotheses}
        if cues - {model.cue}:
            raise StageRefused(f'model at {path} was trained for the {model.cue.value} cue and cannot score '
                               f'{", ".join(sorted(c.value for c in cues))} hypotheses')
        if any(h.features is None for h in hypotheses):
            raise StageRefused('predict needs featurized hypotheses; run featurize first')

        scored = []
        if hypotheses:
            X = np.stack([h.features.as_array(model.feature_count) for h in hypotheses])
            scores = predict_batch(model, X)
            scored = [replace(h, score=float(s)) for h, s in zip(hypotheses, scores)]
        self.write_hypotheses(self.output_path(args, f'predictions_{cue.value}.csv'), scored)
        errors = sum(1 for h in scored if h.score >= args.threshold)
        return {'cue': cue.value, 'scored': len(scored), 'threshold': args.threshold, 'predicted_errors': errors}

    def _predicted_errors(self, args, cue):
        path = self.output_path(args, f'predictions_{cue.value}.csv')
        hypotheses, _ = self.in_split(args, self.read_hypotheses(path))
        return [h for h in hypotheses if h.score is not None and h.score >= args.threshold]

    def fuse(self, args):
        temporal = self._predicted_errors(args, Cue.TEMPORAL)
        stereo = self._predicted_errors(args, Cue.STEREO)
        fused, stats = evaluation.fuse_cues(temporal, stereo, self.eval_config.fusion_overlap)
        self.write_hypotheses(self.output_path(args, 'fused_errors.csv'), fused)
        return {'threshold': args.threshold, **vars(stats)}

    def eval(self, args):
        cue = Cue(args.cue)
        hypotheses = self.read_hypotheses(self.stage_input(args, [f'predictions_{cue.value}.csv']))
        hypotheses, datasets = self.in_split(args, hypotheses)
        if any(h.label is None for h in hypotheses):
            raise StageRefused('eval needs labeled hypotheses; run label before predict')
        if any(h.score is None for h in hypotheses):
            raise StageRefused('eval needs scored hypotheses; run predict first')
        missing = sorted(seq for seq, d in datasets.items() if d.ground_truth is None)
        if missing:
            raise StageRefused(f'cannot evaluate without ground truth; labels.txt missing for sequences {missing}')
        if not any(h.label == 1 for h in hypotheses):
            raise StageRefused('no valid errors among the hypotheses; precision/recall is undefined')

        report = evaluation.evaluate_hypotheses(hypotheses, args.threshold)
        errors = [h for h in hypotheses if h.score >= args.threshold]
        before, after = evaluation.Counts(), evaluation.Counts()
        detections_all, ground_truth_all, offset = {}, {}, 0
        for sequence in sorted(datasets):
            dataset = datasets[sequence]
            detections = {frame: filter_detections(dets, self.conf_threshold, category=None)
                          for frame, dets in dataset.detections_left.items()}
            ground_truth = relevant_ground_truth(dataset.ground_truth)
            seq_errors = evaluation.errors_as_boxes([h for h in errors if h.sequence == sequence])
            _, _, b, a = evaluation.f1_with_corrections(detections, seq_errors, ground_truth,
                                                        self.eval_config.match_overlap,
                                                        self.eval_config.fusion_overlap)
            before, after = before + b, after + a
            # frames are renumbered so they stay distinct across sequences
            for frame in dataset.frames:
                key = offset + frame
                detections_all[key] = [ScoredBox(d.box, d.confidence, d.category, key)
                                       for d in dataset.detections_left.get(frame, [])]
                ground_truth_all[key] = ground_truth.get(frame, [])
            offset += len(dataset.frames)
        report.f1_before, report.f1_after = before.f1, after.f1

        try:
            detector_ap, _ = evaluation.detector_average_precision(detections_all, ground_truth_all,
                                                                   self.eval_config.match_overlap)
            report.extra['detector_ap'] = detector_ap
        except ValueError:
            warnings.warn('no ground truth objects in the split; detector AP left out')

        other = Cue.STEREO if cue == Cue.TEMPORAL else Cue.TEMPORAL
        if os.path.exists(self.output_path(args, f'predictions_{other.value}.csv')):
            other_errors = self._predicted_errors(args, other)
            pair = (errors, other_errors) if cue == Cue.TEMPORAL else (other_errors, errors)
            _, report.cue_overlap = evaluation.fuse_cues(*pair, self.eval_config.fusion_overlap)

        with open(self.output_path(args, f'pr_{cue.value}.csv'), 'w', newline='') as f:
            evaluation.write_pr_csv(report.pr_points, f)
        with open(self.output_path(args, f'report_{cue.value}.txt'), 'w') as f:
            evaluation.write_report(report, f)
        if args.plot:
            _, naive_point = evaluation.naive_baseline([h.label for h in hypotheses])
            utils.plot_pr_curves({'classifier': report.pr_points, 'naive': [naive_point]},
                                 self.output_path(args, f'pr_{cue.value}.png'), title=f'{cue.value} cue')
        if self.tb_writer is not None:
            self.tb_writer.add_scalar(f'ap/{cue.value}', report.ap, 0)
            self.tb_writer.add_scalar(f'naive_ap/{cue.value}', report.naive_ap, 0)
            self.tb_writer.add_pr_curve(f'pr/{cue.value}', np.asarray([h.label for h in hypotheses]),
                                        np.asarray([h.score for h in hypotheses]), 0)

        print(f'{cue.value}: AP {report.ap:.4f} (naive {report.naive_ap:.4f})  '
              f'F1 {report.f1_before:.4f} -> {report.f1_after:.4f}')
        return report.as_dict()

    def geomap(self, args):
        path = self.stage_input(args, ['fused_errors.csv'])
        errors, datasets = self.in_split(args, self.read_hypotheses(path))
        counts = defaultdict(lambda: defaultdict(int))
        for h in errors:
            counts[h.sequence][h.frame] += 1

        grid = geo.GeoGrid(args.bin_size)
        skipped = []
        for sequence in sorted(datasets):
            poses = datasets[sequence].poses
            if poses is None:
                skipped.append(sequence)
                continue
            grid = grid.merge(geo.bin_errors(poses, counts[sequence], args.bin_size))
        table, image = geo.export_heatmap(grid)

        with open(self.output_path(args, 'heatmap.csv'), 'w', newline='') as f:
            geo.write_heatmap_csv(table, f)
        with open(self.output_path(args, 'heatmap.pgm'), 'wb') as f:
            write_pgm8(image, f)
        if args.plot:
            utils.plot_heatmap(table, args.bin_size, self.output_path(args, 'heatmap.png'))
        return {'cells': len(grid.bins), 'errors_binned': grid.total_errors, 'errors_total': len(errors),
                'sequences_without_poses': skipped, 'bin_size_m': args.bin_size}

    def oracle_check(self, args):
        cue = Cue(args.cue)
        hypotheses = self.read_hypotheses(self.stage_input(args, [f'labeled_{cue.value}.csv']))
        hypotheses, datasets = self.in_split(args, hypotheses)
        oracle = {}
        for sequence, dataset in datasets.items():
            if dataset.oracle_misses is None:
                raise StageRefused(f'{dataset.root} has no oracle_misses.txt; only synthetic data can be checked')
            oracle[sequence] = dataset.oracle_misses
        agreement = synth.oracle_label_check(hypotheses, oracle, self.eval_config.match_overlap)
        for h in agreement.disagreements:
            print(f'disagreement: sequence {h.sequence} frame {h.frame} box {h.box.as_tuple()}')
        print(f'Oracle agreement {agreement.agreed}/{agreement.checked} ({agreement.rate:.4f})')
        return {'cue': cue.value, 'checked': agreement.checked, 'agreed': agreement.agreed, 'rate': agreement.rate,
                'disagreements': len(agreement.disagreements)}

    def get_args_parser(self):
        parser = ArgumentParser(description='Mine detector false negatives from temporal and stereo cues')

        common = ArgumentParser(add_help=False)
        common.add_argument('--data-path', default='./data', type=str)
        common.add_argument('--output-dir', default='./logs', type=str)
        common.add_argument('--detector', default='ssd', type=str, choices=sorted(models.configs.DETECTOR_THRESHOLDS))
        common.add_argument('--conf-threshold', default=None, type=float,
                            help='detector confidence threshold (default: preset of --detector)')
        common.add_argument('--seed', default=0, type=int)
        common.add_argument('--split', default=None, type=str, choices=['all', 'train', 'test'])
        common.add_argument('--num-train-sequences', default=4, type=int)
        common.add_argument('--workers', default=1, type=int)
        common.add_argument('--tb-dir', default=None, type=str, help='write tensorboard events here')
        common.add_argument('--print-freq', default=10, type=int)
        common.add_argument('--plot', action='store_true')
        common.add_argument('--input', default=None, type=str, help='override the stage input file')

        subparsers = parser.add_subparsers(dest='stage', required=True)
        for stage in STAGES:
            sub = subparsers.add_parser(stage, parents=[common])
            if stage in ('featurize', 'label', 'train', 'predict', 'eval', 'oracle-check'):
                sub.add_argument('--cue', required=True, type=str, choices=[c.value for c in Cue])
            if stage in ('train', 'predict'):
                sub.add_argument('--model', default=None, type=str)
            if stage in ('predict', 'fuse', 'eval'):
                sub.add_argument('--threshold', default=0.5, type=float, help='classifier operating threshold')
            if stage in ('hypothesize-stereo', 'featurize'):
                sub.add_argument('--swap-cameras', action='store_true',
                                 help='mine the right image from left detections and a left-referenced map')
            if stage == 'hypothesize-temporal':
                sub.add_argument('--baseline-tracker', action='store_true',
                                 help='track the detections here when tracklets.txt is absent')
            if stage == 'geomap':
                sub.add_argument('--bin-size', default=10.0, type=float)
            if stage == 'synth':
                sub.add_argument('--synth-config', default='default', type=str,
                                 choices=sorted(models.configs.CONFIG_MAP))
        return parser


def main(argv=None):
    miner = Miner()
    args = miner.get_args_parser().parse_args(argv)
    try:
        miner.main(args)
    except StageRefused as e:
        print(f'{args.stage}: refused: {e}', file=sys.stderr)
        return 1
    except (FormatError, FileNotFoundError, ValueError) as e:
        print(f'{args.stage}: error: {e}', file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
