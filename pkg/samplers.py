import numpy as np


class BootstrapSampler:
    """Sampler that draws a with-replacement resample of the training set for
    each tree of a forest.

    The resample for tree t only depends on seed + t, so trees can be trained
    in any order or in parallel and still come out identical.
    """

    def __init__(self, num_samples, seed=0):
        if num_samples <= 0:
            raise ValueError("BootstrapSampler needs at least one sample")
        self.num_samples = num_samples
        self.seed = seed
        self.tree = 0

    def indices(self):
        rng = np.random.default_rng(self.seed + self.tree)
        return rng.integers(0, self.num_samples, size=self.num_samples)

    def set_tree(self, tree):
        self.tree = tree


def split_sequences(sequence_ids, num_train):
    """First `num_train` sequences (sorted by id) train, the rest evaluate."""
    ordered = sorted(sequence_ids)
    if not 0 <= num_train <= len(ordered):
        raise ValueError(f'cannot take {num_train} training sequences out of {len(ordered)}')
    return ordered[:num_train], ordered[num_train:]


def select_split(sequence_ids, split, num_train):
    if split == 'all':
        return sorted(sequence_ids)
    train, test = split_sequences(sequence_ids, num_train)
    if split == 'train':
        return train
    elif split == 'test':
        return test
    else:
        raise NotImplementedError(f'Not supported split {split}')
