import io
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from boxes import BBox, Category, ScoredBox
from cues.features import FEATURE_NAMES, FeatureVector
from cues.stereo import DisparityMap
from cues.temporal import Cue, Hypothesis, Tracklet
from models.forest import DecisionTree, ForestModel, LEAF

MODEL_MAGIC = 'fnminer-forest'
MODEL_VERSION = 1

COLLAPSED = {Category.VAN: Category.CAR, Category.TRUCK: Category.CAR}

PROVENANCE_COLUMNS = ('cue', 'sequence', 'frame', 'source_id', 'x1', 'y1', 'x2', 'y2', 'label', 'score')
HYPOTHESIS_COLUMNS = FEATURE_NAMES + PROVENANCE_COLUMNS
DERIVED_FEATURES = tuple(n for n in FEATURE_NAMES if n not in ('r', 'n'))

# KITTI "unknown" defaults for the 3D fields we never consume
KITTI_3D_DEFAULTS = '-1 -1 -1 -1000 -1000 -1000 -10'


class FormatError(ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ':'.join(str(p) for p in (path, line) if p is not None)
        super().__init__(f'{where}: {message}' if where else message)


class ModelFormatError(FormatError):
    pass


@dataclass(frozen=True)
class GroundTruthObject:
    frame: int
    track_id: int
    category: Category
    box: BBox
    is_ignore: bool = False
    truncated: float = 0.0
    occluded: int = 0
    alpha: float = -10.0
    score: Optional[float] = None


@dataclass(frozen=True)
class PoseRecord:
    frame: int
    x_m: float
    y_m: float


@dataclass
class SequenceDataset:
    sequence_id: str
    image_width: int
    image_height: int
    frames: List[int]
    root: str = ''
    detections_left: Dict[int, List[ScoredBox]] = field(default_factory=dict)
    detections_right: Optional[Dict[int, List[ScoredBox]]] = None
    tracklets: Optional[Dict[int, List[Tracklet]]] = None
    ground_truth: Optional[Dict[int, List[GroundTruthObject]]] = None
    poses: Optional[List[PoseRecord]] = None
    oracle_misses: Optional[Dict[int, List['OracleMiss']]] = None
    disparity_paths: Dict[int, str] = field(default_factory=dict)

    def disparity(self, frame) -> DisparityMap:
        path = self.disparity_paths.get(frame)
        if path is None:
            raise FormatError(f'no disparity map for frame {frame}', path=self.root)
        with open(path, 'rb') as f:
            return read_disparity(f)


def _name(stream):
    return getattr(stream, 'name', None)


def _fmt(value) -> str:
    return repr(float(value))


def _lines(stream):
    """Numbered, stripped, non-blank lines."""
    for lineno, raw in enumerate(stream, 1):
        line = raw.strip()
        if line:
            yield lineno, line


def _number(token, kind, path, lineno, what):
    try:
        return kind(token)
    except ValueError:
        raise FormatError(f'non-numeric {what} {token!r}', path, lineno) from None


def _box(tokens, path, lineno) -> BBox:
    coords = [_number(t, float, path, lineno, 'box coordinate') for t in tokens]
    try:
        return BBox(*coords)
    except ValueError as e:
        raise FormatError(str(e), path, lineno) from None


def _category(token, path, lineno) -> Category:
    try:
        return Category(token)
    except ValueError:
        raise FormatError(f'unknown object type {token!r}', path, lineno) from None


def _confidence(token, path, lineno) -> float:
    value = _number(token, float, path, lineno, 'confidence')
    if not 0.0 <= value <= 1.0:
        raise FormatError(f'confidence {value} out of range [0, 1]', path, lineno)
    return value


# ---------------------------------------------------------------- ground truth

def parse_kitti_labels(stream, min_height=25, collapse_classes=True) -> Dict[int, List[GroundTruthObject]]:
    """KITTI tracking labels: frame, track_id, type, truncated, occluded, alpha,
    left, top, right, bottom, 3D fields, optional score. DontCare regions and
    objects shorter than `min_height` come back flagged as ignore."""
    path = _name(stream)
    frames: Dict[int, List[GroundTruthObject]] = {}
    for lineno, line in _lines(stream):
        tokens = line.split()
        if len(tokens) < 10:
            raise FormatError(f'expected at least 10 fields, got {len(tokens)}', path, lineno)
        frame = _number(tokens[0], int, path, lineno, 'frame')
        track_id = _number(tokens[1], int, path, lineno, 'track id')
        category = _category(tokens[2], path, lineno)
        if collapse_classes:
            category = COLLAPSED.get(category, category)
        truncated = _number(tokens[3], float, path, lineno, 'truncation')
        occluded = _number(tokens[4], int, path, lineno, 'occlusion')
        alpha = _number(tokens[5], float, path, lineno, 'alpha')
        box = _box(tokens[6:10], path, lineno)
        score = _number(tokens[17], float, path, lineno, 'score') if len(tokens) >= 18 else None
        if frame < 0:
            raise FormatError(f'negative frame {frame}', path, lineno)

        is_ignore = category == Category.DONT_CARE or box.height < min_height
        frames.setdefault(frame, []).append(GroundTruthObject(
            frame=frame, track_id=track_id, category=category, box=box, is_ignore=is_ignore,
            truncated=truncated, occluded=occluded, alpha=alpha, score=score))
    return dict(sorted(frames.items()))


def write_kitti_labels(objects: Dict[int, List[GroundTruthObject]], stream):
    for frame in sorted(objects):
        for o in objects[frame]:
            fields = [str(frame), str(o.track_id), o.category.value, _fmt(o.truncated), str(o.occluded),
                      _fmt(o.alpha)] + [_fmt(v) for v in o.box.as_tuple()] + [KITTI_3D_DEFAULTS]
            if o.score is not None:
                fields.append(_fmt(o.score))
            stream.write(' '.join(fields) + '\n')


def kitti_to_detections(objects: Dict[int, List[GroundTruthObject]]) -> Dict[int, List[ScoredBox]]:
    """Detector results stored in the KITTI layout (score column) to scored boxes."""
    result = {}
    for frame, items in objects.items():
        boxes = []
        for o in items:
            if o.category == Category.DONT_CARE:
                continue
            if o.score is None:
                raise FormatError(f'KITTI result at frame {frame} (track {o.track_id}) has no score column')
            boxes.append(ScoredBox(o.box, o.score, o.category, frame))
        result[frame] = boxes
    return result


def relevant_ground_truth(objects: Dict[int, List[GroundTruthObject]], category=Category.CAR):
    """Objects of the evaluated class plus every ignore region (DontCare)."""
    return {frame: [o for o in items if o.category in (category, Category.DONT_CARE)]
            for frame, items in objects.items()}


# ------------------------------------------------------------------ detections

def parse_detections(stream) -> Dict[int, List[ScoredBox]]:
    path = _name(stream)
    frames: Dict[int, List[ScoredBox]] = {}
    for lineno, line in _lines(stream):
        tokens = line.split()
        if len(tokens) != 7:
            raise FormatError(f'expected 7 fields "frame category confidence x1 y1 x2 y2", got {len(tokens)}',
                              path, lineno)
        frame = _number(tokens[0], int, path, lineno, 'frame')
        if frame < 0:
            raise FormatError(f'negative frame {frame}', path, lineno)
        category = _category(tokens[1], path, lineno)
        confidence = _confidence(tokens[2], path, lineno)
        box = _box(tokens[3:7], path, lineno)
        frames.setdefault(frame, []).append(ScoredBox(box, confidence, category, frame))
    return dict(sorted(frames.items()))


def write_detections(detections: Dict[int, List[ScoredBox]], stream):
    for frame in sorted(detections):
        for d in detections[frame]:
            stream.write(' '.join([str(frame), d.category.value, _fmt(d.confidence)]
                                  + [_fmt(v) for v in d.box.as_tuple()]) + '\n')


# ------------------------------------------------------------------- tracklets

def parse_tracklets(stream) -> Dict[int, List[Tracklet]]:
    """Tracker output "frame track_id confidence x1 y1 x2 y2", predicted boxes
    included. Track length at frame j is the number of frames since the track's
    first entry, j - first + 1, gaps included."""
    path = _name(stream)
    entries = []
    seen = set()
    for lineno, line in _lines(stream):
        tokens = line.split()
        if len(tokens) != 7:
            raise FormatError(f'expected 7 fields "frame track_id confidence x1 y1 x2 y2", got {len(tokens)}',
                              path, lineno)
        frame = _number(tokens[0], int, path, lineno, 'frame')
        if frame < 0:
            raise FormatError(f'negative frame {frame}', path, lineno)
        track_id = _number(tokens[1], int, path, lineno, 'track id')
        if (frame, track_id) in seen:
            raise FormatError(f'duplicate entry for track {track_id} at frame {frame}', path, lineno)
        seen.add((frame, track_id))
        confidence = _confidence(tokens[2], path, lineno)
        entries.append((frame, track_id, ScoredBox(_box(tokens[3:7], path, lineno), confidence, frame=frame)))

    born: Dict[int, int] = {}
    for frame, track_id, _ in entries:
        born[track_id] = min(frame, born.get(track_id, frame))

    result: Dict[int, List[Tracklet]] = {}
    for frame, track_id, box in entries:
        result.setdefault(frame, []).append(Tracklet(track_id, box, frame - born[track_id] + 1))
    return dict(sorted(result.items()))


def write_tracklets(tracklets: Dict[int, List[Tracklet]], stream):
    for frame in sorted(tracklets):
        for t in tracklets[frame]:
            stream.write(' '.join([str(frame), str(t.track_id), _fmt(t.box.confidence)]
                                  + [_fmt(v) for v in t.box.box.as_tuple()]) + '\n')


# ------------------------------------------------------------------- disparity

def _pgm_header(data: bytes, path):
    """Parse "P5 width height maxval" and return (width, height, maxval, payload offset)."""
    if data[:2] != b'P5':
        raise FormatError(f'bad magic {data[:2]!r}, expected binary PGM (P5)', path)
    values, pos = [], 2
    while len(values) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b'#':
            while pos < len(data) and data[pos:pos + 1] not in (b'\n', b'\r'):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError('truncated or malformed PGM header', path)
        values.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError('PGM header must end with a single whitespace byte', path)
    width, height, maxval = values
    return width, height, maxval, pos + 1


def read_disparity(stream) -> DisparityMap:
    """16-bit P5 PGM, big-endian samples, value = round(disparity * 256), 0 = invalid."""
    path = _name(stream)
    data = stream.read()
    width, height, maxval, offset = _pgm_header(data, path)
    if maxval != 65535:
        raise FormatError(f'disparity maps need maxval 65535, got {maxval}', path)
    if width <= 0 or height <= 0:
        raise FormatError(f'invalid PGM size {width}x{height}', path)
    expected = width * height * 2
    payload = data[offset:]
    if len(payload) < expected:
        raise FormatError(f'truncated payload: {len(payload)} of {expected} bytes', path)
    if len(payload) > expected:
        raise FormatError(f'{len(payload) - expected} trailing bytes after PGM payload', path)
    raw = np.frombuffer(payload, dtype='>u2').reshape(height, width)
    return DisparityMap(raw.astype(np.float64) / 256.0, raw != 0)


def write_disparity(disparity: DisparityMap, stream):
    scaled = np.rint(disparity.values * 256.0)
    if np.any(disparity.valid & ((scaled < 1) | (scaled > 65535))):
        raise ValueError('valid disparities must lie in [1/256, 65535/256] to be stored')
    raw = np.where(disparity.valid, scaled, 0).astype('>u2')
    stream.write(f'P5\n{disparity.width} {disparity.height}\n65535\n'.encode('ascii'))
    stream.write(raw.tobytes())


def write_pgm8(image: np.ndarray, stream):
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError('8-bit PGM needs a 2D uint8 image')
    height, width = image.shape
    stream.write(f'P5\n{width} {height}\n255\n'.encode('ascii'))
    stream.write(image.tobytes())


# --------------------------------------------------------------- oracle misses

@dataclass(frozen=True)
class OracleMiss:
    frame: int
    track_id: int
    box: BBox


def parse_oracle_misses(stream) -> Dict[int, List[OracleMiss]]:
    """Planted detector misses, "frame track_id x1 y1 x2 y2"."""
    path = _name(stream)
    frames: Dict[int, List[OracleMiss]] = {}
    for lineno, line in _lines(stream):
        tokens = line.split()
        if len(tokens) != 6:
            raise FormatError(f'expected 6 fields "frame track_id x1 y1 x2 y2", got {len(tokens)}', path, lineno)
        frame = _number(tokens[0], int, path, lineno, 'frame')
        track_id = _number(tokens[1], int, path, lineno, 'track id')
        frames.setdefault(frame, []).append(OracleMiss(frame, track_id, _box(tokens[2:6], path, lineno)))
    return dict(sorted(frames.items()))


def write_oracle_misses(misses: Dict[int, List[OracleMiss]], stream):
    for frame in sorted(misses):
        for m in misses[frame]:
            stream.write(' '.join([str(frame), str(m.track_id)] + [_fmt(v) for v in m.box.as_tuple()]) + '\n')


# ----------------------------------------------------------------------- poses

POSE_HEADER = 'frame,x_m,y_m'


def read_poses(stream) -> List[PoseRecord]:
    path = _name(stream)
    poses, seen = [], set()
    for lineno, line in _lines(stream):
        if line == POSE_HEADER:
            continue
        tokens = [t.strip() for t in line.split(',')]
        if len(tokens) != 3:
            raise FormatError(f'expected "frame,x_m,y_m", got {len(tokens)} fields', path, lineno)
        frame = _number(tokens[0], int, path, lineno, 'frame')
        x_m = _number(tokens[1], float, path, lineno, 'x_m')
        y_m = _number(tokens[2], float, path, lineno, 'y_m')
        if not (np.isfinite(x_m) and np.isfinite(y_m)):
            raise FormatError('pose coordinates must be finite', path, lineno)
        if frame in seen:
            raise FormatError(f'duplicate pose for frame {frame}', path, lineno)
        seen.add(frame)
        poses.append(PoseRecord(frame, x_m, y_m))
    return poses


def write_poses(poses: Iterable[PoseRecord], stream):
    stream.write(POSE_HEADER + '\n')
    for p in poses:
        stream.write(f'{p.frame},{_fmt(p.x_m)},{_fmt(p.y_m)}\n')


# ----------------------------------------------------------------------- model

def write_model(model: ForestModel, stream):
    stream.write(f'{MODEL_MAGIC} {MODEL_VERSION}\n')
    stream.write(f'cue {model.cue.value}\n')
    stream.write(f'feature_count {model.feature_count}\n')
    stream.write('features ' + ' '.join(model.feature_names) + '\n')
    stream.write(f'seed {model.seed}\n')
    for key in sorted(model.metadata):
        stream.write(f'meta {key} {model.metadata[key]}\n')
    stream.write(f'trees {len(model.trees)}\n')
    for index, tree in enumerate(model.trees):
        stream.write(f'tree {index} {tree.node_count}\n')
        for node in range(tree.node_count):
            stream.write(' '.join([
                str(node), str(tree.feature[node]), _fmt(tree.threshold[node]),
                str(tree.left[node]), str(tree.right[node]), _fmt(tree.probability[node]),
                _fmt(tree.impurity[node]), str(tree.n_samples[node]),
            ]) + '\n')


class _ModelReader:
    def __init__(self, stream):
        self.path = _name(stream)
        self.lines = list(_lines(stream))
        self.pos = 0

    def fail(self, message, lineno=None):
        if lineno is None and self.pos < len(self.lines):
            lineno = self.lines[self.pos][0]
        raise ModelFormatError(message, self.path, lineno)

    def next(self, keyword=None, count=None):
        if self.pos >= len(self.lines):
            self.fail(f'unexpected end of model document (expected {keyword or "node"})')
        lineno, line = self.lines[self.pos]
        tokens = line.split()
        if keyword is not None and tokens[0] != keyword:
            self.fail(f'expected {keyword!r}, got {tokens[0]!r}')
        if count is not None and len(tokens) != count:
            self.fail(f'expected {count} fields, got {len(tokens)}')
        self.pos += 1
        return lineno, tokens

    def number(self, token, kind, lineno, what):
        try:
            return kind(token)
        except ValueError:
            self.fail(f'non-numeric {what} {token!r}', lineno)


def _validate_tree(reader, tree: DecisionTree, feature_count, lineno):
    n = tree.node_count
    for node in range(n):
        left, right, feature = tree.left[node], tree.right[node], tree.feature[node]
        if left == LEAF or right == LEAF:
            if left != LEAF or right != LEAF or feature != LEAF:
                reader.fail(f'node {node} is half a leaf', lineno)
            if not 0.0 <= tree.probability[node] <= 1.0:
                reader.fail(f'leaf {node} probability {tree.probability[node]} outside [0, 1]', lineno)
            continue
        for child in (left, right):
            if not node < child < n:
                reader.fail(f'node {node} has dangling child index {child}', lineno)
        if not 0 <= feature < feature_count:
            reader.fail(f'node {node} splits on feature {feature} of a {feature_count}-feature model', lineno)


def read_model(stream) -> ForestModel:
    reader = _ModelReader(stream)
    lineno, tokens = reader.next(MODEL_MAGIC, 2)
    if tokens[1] != str(MODEL_VERSION):
        reader.fail(f'model version {tokens[1]} does not match supported version {MODEL_VERSION}', lineno)

    lineno, tokens = reader.next('cue', 2)
    try:
        cue = Cue(tokens[1])
    except ValueError:
        reader.fail(f'unknown cue {tokens[1]!r}', lineno)
    lineno, tokens = reader.next('feature_count', 2)
    feature_count = reader.number(tokens[1], int, lineno, 'feature count')
    if not 0 < feature_count <= len(FEATURE_NAMES):
        reader.fail(f'feature count {feature_count} out of range', lineno)
    lineno, tokens = reader.next('features')
    if tuple(tokens[1:]) != FEATURE_NAMES[:feature_count]:
        reader.fail('feature header does not match the frozen feature order', lineno)
    lineno, tokens = reader.next('seed', 2)
    seed = reader.number(tokens[1], int, lineno, 'seed')

    metadata = {}
    while reader.pos < len(reader.lines) and reader.lines[reader.pos][1].startswith('meta '):
        lineno, tokens = reader.next('meta', 3)
        metadata[tokens[1]] = tokens[2]

    lineno, tokens = reader.next('trees', 2)
    n_trees = reader.number(tokens[1], int, lineno, 'tree count')
    if n_trees < 1:
        reader.fail('a model needs at least one tree', lineno)

    trees = []
    for index in range(n_trees):
        lineno, tokens = reader.next('tree', 3)
        if reader.number(tokens[1], int, lineno, 'tree index') != index:
            reader.fail(f'expected tree {index}', lineno)
        node_count = reader.number(tokens[2], int, lineno, 'node count')
        if node_count < 1:
            reader.fail('a tree needs at least one node', lineno)
        columns = [[] for _ in range(7)]
        for node in range(node_count):
            node_line, fields = reader.next(count=8)
            if reader.number(fields[0], int, node_line, 'node index') != node:
                reader.fail(f'expected node {node}', node_line)
            kinds = (int, float, int, int, float, float, int)
            for column, kind, token in zip(columns, kinds, fields[1:]):
                column.append(reader.number(token, kind, node_line, 'node field'))
        tree = DecisionTree(*columns)
        _validate_tree(reader, tree, feature_count, lineno)
        trees.append(tree)

    if reader.pos != len(reader.lines):
        reader.fail('trailing content after the last tree')
    return ForestModel(cue, feature_count, seed, trees, metadata)


# ------------------------------------------------------------------ hypotheses

_INT_COLUMNS = ('det_cnt', 'hyp_cnt', 'n', 'frame', 'source_id', 'label')


def hypotheses_to_frame(hypotheses: Iterable[Hypothesis]) -> pd.DataFrame:
    rows = []
    for h in hypotheses:
        row = dict.fromkeys(HYPOTHESIS_COLUMNS)
        if h.features is not None:
            row.update(zip(FEATURE_NAMES, h.features.as_array().tolist()))
        row.update(r=h.confidence, n=h.track_length, cue=h.cue.value, sequence=h.sequence, frame=h.frame,
                   source_id=h.source_id, x1=h.box.x1, y1=h.box.y1, x2=h.box.x2, y2=h.box.y2,
                   label=h.label, score=h.score)
        rows.append(row)
    table = pd.DataFrame(rows, columns=list(HYPOTHESIS_COLUMNS))
    dtypes = {c: 'Int64' for c in _INT_COLUMNS}
    dtypes.update({c: 'float64' for c in HYPOTHESIS_COLUMNS
                   if c not in _INT_COLUMNS and c not in ('cue', 'sequence')})
    dtypes.update(cue='object', sequence='object')
    return table.astype(dtypes)


def write_hypotheses_csv(hypotheses: Iterable[Hypothesis], stream):
    hypotheses_to_frame(hypotheses).to_csv(stream, index=False, lineterminator='\n')


def read_hypotheses_csv(stream) -> List[Hypothesis]:
    path = _name(stream)
    header = stream.readline().strip()
    if tuple(header.split(',')) != HYPOTHESIS_COLUMNS:
        raise FormatError(f'unexpected hypothesis header {header!r}; expected {",".join(HYPOTHESIS_COLUMNS)}',
                          path, 1)
    body = stream.read()
    if not body.strip():
        return []
    table = pd.read_csv(io.StringIO(body), header=None, names=list(HYPOTHESIS_COLUMNS),
                        float_precision='round_trip', dtype={'cue': str, 'sequence': str},
                        keep_default_na=False, na_values=[''])

    hypotheses = []
    for offset, row in enumerate(table.itertuples(index=False), 2):
        values = row._asdict()
        try:
            features = None
            if not any(pd.isna(values[name]) for name in DERIVED_FEATURES):
                features = FeatureVector.from_values([values[name] for name in FEATURE_NAMES])
            hypotheses.append(Hypothesis(
                box=BBox(values['x1'], values['y1'], values['x2'], values['y2']),
                confidence=float(values['r']),
                cue=Cue(values['cue']),
                frame=int(values['frame']),
                track_length=int(values['n']),
                source_id=int(values['source_id']),
                sequence='' if pd.isna(values['sequence']) else str(values['sequence']),
                features=features,
                label=None if pd.isna(values['label']) else int(values['label']),
                score=None if pd.isna(values['score']) else float(values['score']),
            ))
        except (ValueError, TypeError) as e:
            raise FormatError(str(e), path, offset) from None
    return hypotheses


# --------------------------------------------------------------------- dataset

def read_seqmap(stream) -> List[tuple]:
    """Lines "sequence_id width height n_frames"."""
    path = _name(stream)
    entries = []
    for lineno, line in _lines(stream):
        tokens = line.split()
        if len(tokens) != 4:
            raise FormatError(f'expected "sequence_id width height n_frames", got {len(tokens)} fields',
                              path, lineno)
        width, height, n_frames = (_number(t, int, path, lineno, 'size') for t in tokens[1:])
        if width <= 0 or height <= 0 or n_frames < 0:
            raise FormatError('image size must be positive and frame count non-negative', path, lineno)
        entries.append((tokens[0], width, height, n_frames))
    return entries


def write_seqmap(entries, stream):
    for sequence_id, width, height, n_frames in entries:
        stream.write(f'{sequence_id} {width} {height} {n_frames}\n')


def _read_optional(path, parser, mode='r'):
    if not os.path.exists(path):
        return None
    with open(path, mode) as f:
        return parser(f)


def _check_frames(items, frames, path):
    if items is None:
        return
    known = set(frames)
    for frame in items:
        if frame not in known:
            raise FormatError(f'frame {frame} is not part of the sequence', path)


def load_sequence(root, sequence_id, image_width, image_height, n_frames, min_height=25,
                  collapse_classes=True, disparity_dir='disparity') -> SequenceDataset:
    seq_dir = os.path.join(root, sequence_id)
    if not os.path.isdir(seq_dir):
        raise FileNotFoundError(f'sequence directory {seq_dir} does not exist')
    frames = list(range(n_frames))
    paths = {name: os.path.join(seq_dir, name) for name in (
        'labels.txt', 'detections_left.txt', 'detections_right.txt', 'tracklets.txt', 'poses.csv')}

    left = _read_optional(paths['detections_left.txt'], parse_detections)
    if left is None:
        raise FileNotFoundError(f'{paths["detections_left.txt"]} is required')
    dataset = SequenceDataset(
        sequence_id=sequence_id, image_width=image_width, image_height=image_height, frames=frames, root=seq_dir,
        detections_left=left,
        detections_right=_read_optional(paths['detections_right.txt'], parse_detections),
        tracklets=_read_optional(paths['tracklets.txt'], parse_tracklets),
        ground_truth=_read_optional(
            paths['labels.txt'], lambda f: parse_kitti_labels(f, min_height, collapse_classes)),
        poses=_read_optional(paths['poses.csv'], read_poses),
        oracle_misses=_read_optional(os.path.join(seq_dir, 'oracle_misses.txt'), parse_oracle_misses),
    )
    for name, items in (('detections_left.txt', dataset.detections_left),
                        ('detections_right.txt', dataset.detections_right),
                        ('tracklets.txt', dataset.tracklets), ('labels.txt', dataset.ground_truth)):
        _check_frames(items, frames, paths[name])

    for frame in frames:
        candidate = os.path.join(seq_dir, disparity_dir, f'{frame:06d}.pgm')
        if os.path.exists(candidate):
            dataset.disparity_paths[frame] = candidate
    return dataset
