import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from cues.features import FEATURE_COUNTS, FEATURE_NAMES, FeatureVector
from cues.temporal import Cue
from samplers import BootstrapSampler

LEAF = -1


@dataclass(eq=False)
class DecisionTree:
    """One tree as flat node arrays; node 0 is the root and children always
    have larger indices than their parent. Leaves have feature == LEAF."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    probability: np.ndarray
    impurity: np.ndarray
    n_samples: np.ndarray

    def __post_init__(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.probability = np.asarray(self.probability, dtype=np.float64)
        self.impurity = np.asarray(self.impurity, dtype=np.float64)
        self.n_samples = np.asarray(self.n_samples, dtype=np.int64)

    @classmethod
    def leaf(cls, probability, n_samples=0):
        return cls([LEAF], [-2.0], [LEAF], [LEAF], [probability], [0.0], [n_samples])

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def is_leaf(self, node) -> bool:
        return self.left[node] == LEAF

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row of X (compared in float32, the precision splits were searched in)."""
        X = np.asarray(X, dtype=np.float32)
        nodes = np.zeros(len(X), dtype=np.int64)
        active = ~(self.left[nodes] == LEAF)
        while np.any(active):
            idx = np.nonzero(active)[0]
            current = nodes[idx]
            go_left = X[idx, self.feature[current]] <= self.threshold[current]
            nodes[idx] = np.where(go_left, self.left[current], self.right[current])
            active = ~(self.left[nodes] == LEAF)
        return nodes

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.probability[self.apply(X)]


@dataclass(eq=False)
class ForestModel:
    cue: Cue
    feature_count: int
    seed: int
    trees: List[DecisionTree]
    metadata: Dict[str, str] = field(default_factory=dict)

    @property
    def feature_names(self):
        return FEATURE_NAMES[:self.feature_count]


@dataclass(frozen=True)
class FeatureImportances:
    weights: np.ndarray
    degenerate: bool = False

    def as_dict(self, names):
        return {name: float(w) for name, w in zip(names, self.weights)}


def canonical_key(sample):
    return sample.hypothesis.sort_key()


def _from_sklearn(clf: DecisionTreeClassifier) -> DecisionTree:
    tree = clf.tree_
    value = tree.value[:, 0, :]
    classes = list(clf.classes_)
    if 1 in classes:
        probability = value[:, classes.index(1)] / value.sum(axis=1)
    else:
        probability = np.zeros(tree.node_count)
    is_leaf = tree.children_left == LEAF
    return DecisionTree(
        feature=np.where(is_leaf, LEAF, tree.feature),
        threshold=np.where(is_leaf, -2.0, tree.threshold),
        left=tree.children_left,
        right=tree.children_right,
        probability=probability,
        impurity=tree.impurity,
        n_samples=tree.n_node_samples,
    )


def training_matrix(samples, feature_count):
    X = np.stack([s.features.as_array(feature_count) for s in samples])
    y = np.asarray([int(s.label) for s in samples], dtype=np.int64)
    return X, y


def train_forest(samples: Sequence, n_trees: int = 30, seed: int = 0, min_samples_split: int = 2,
                 workers: int = 1) -> ForestModel:
    """Bagged Gini trees, ceil(sqrt(d)) candidate features per split, grown to purity.

    Samples are sorted canonically first so the model does not depend on the
    order they were supplied in. Tree t draws its bootstrap and split features
    from seed + t.
    """
    if not samples:
        raise ValueError('cannot train a forest on an empty sample set')
    cues = {s.hypothesis.cue for s in samples}
    if len(cues) != 1:
        raise ValueError(f'training samples mix cues {sorted(c.value for c in cues)}')
    cue = cues.pop()
    feature_count = FEATURE_COUNTS[cue]
    ordered = sorted(samples, key=canonical_key)
    X, y = training_matrix(ordered, feature_count)
    max_features = math.ceil(math.sqrt(feature_count))

    metadata = {
        'criterion': 'gini',
        'max_features': str(max_features),
        'min_samples_split': str(min_samples_split),
        'n_trees': str(n_trees),
        'n_train_samples': str(len(y)),
        'n_positive': str(int(y.sum())),
    }

    if len(np.unique(y)) < 2:
        warnings.warn(f'training set for the {cue.value} cue holds a single class; '
                      'falling back to a single-leaf model')
        metadata['degenerate'] = '1'
        return ForestModel(cue, feature_count, seed, [DecisionTree.leaf(float(y[0]), len(y))], metadata)

    def grow(tree_index):
        sampler = BootstrapSampler(len(y), seed)
        sampler.set_tree(tree_index)
        idx = sampler.indices()
        clf = DecisionTreeClassifier(
            criterion='gini',
            max_features=max_features,
            min_samples_split=min_samples_split,
            random_state=seed + tree_index,
        )
        clf.fit(X[idx].astype(np.float32), y[idx])
        return _from_sklearn(clf)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(grow, range(n_trees)))
    else:
        trees = [grow(t) for t in range(n_trees)]
    return ForestModel(cue, feature_count, seed, trees, metadata)


def _as_matrix(model: ForestModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.feature_count:
        raise ValueError(f'{model.cue.value} model expects {model.feature_count} features, got {X.shape[1]}')
    return X


def predict_batch(model: ForestModel, X) -> np.ndarray:
    X = _as_matrix(model, X)
    total = np.zeros(len(X), dtype=np.float64)
    for tree in model.trees:
        total += tree.predict_batch(X)
    return total / len(model.trees)


def predict(model: ForestModel, features) -> float:
    """Mean leaf probability over the trees. A FeatureVector is cut down to the
    model's feature count; raw arrays must match it exactly."""
    if isinstance(features, FeatureVector):
        features = features.as_array(model.feature_count)
    return float(predict_batch(model, [features])[0])


def feature_importances(model: ForestModel) -> FeatureImportances:
    """Mean decrease in Gini impurity per feature, normalized per tree and over the forest."""
    total = np.zeros(model.feature_count, dtype=np.float64)
    for tree in model.trees:
        gains = np.zeros(model.feature_count, dtype=np.float64)
        for node in range(tree.node_count):
            if tree.is_leaf(node):
                continue
            l, r = tree.left[node], tree.right[node]
            gains[tree.feature[node]] += (tree.n_samples[node] * tree.impurity[node]
                                          - tree.n_samples[l] * tree.impurity[l]
                                          - tree.n_samples[r] * tree.impurity[r])
        if gains.sum() > 0:
            total += gains / gains.sum()
    if total.sum() <= 0:
        return FeatureImportances(np.full(model.feature_count, 1.0 / model.feature_count), degenerate=True)
    return FeatureImportances(total / total.sum())
