import datetime
import json
import os
import random
import sys
import time
from collections import defaultdict, deque

import matplotlib
import numpy as np
import torch

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402


def set_deterministic(_seed_: int = 0):
    random.seed(_seed_)
    np.random.seed(_seed_)
    torch.manual_seed(_seed_)


class SmoothedValue:
    """Track a series of values and provide access to smoothed values over a
    window or the global series average.
    """

    def __init__(self, window_size=20, fmt=None):
        if fmt is None:
            fmt = "{median:.4f} ({global_avg:.4f})"
        self.deque = deque(maxlen=window_size)
        self.total = 0.0
        self.count = 0
        self.fmt = fmt

    def update(self, value, n=1):
        self.deque.append(value)
        self.count += n
        self.total += value * n

    @property
    def median(self):
        d = torch.tensor(list(self.deque), dtype=torch.float64)
        return d.median().item()

    @property
    def avg(self):
        d = torch.tensor(list(self.deque), dtype=torch.float64)
        return d.mean().item()

    @property
    def global_avg(self):
        return self.total / self.count if self.count else 0.0

    @property
    def max(self):
        return max(self.deque)

    @property
    def value(self):
        return self.deque[-1]

    def __str__(self):
        return self.fmt.format(
            median=self.median, avg=self.avg, global_avg=self.global_avg, max=self.max, value=self.value
        )


class MetricLogger:
    def __init__(self, delimiter="\t"):
        self.meters = defaultdict(SmoothedValue)
        self.delimiter = delimiter

    def update(self, **kwargs):
        for k, v in kwargs.items():
            if isinstance(v, (np.integer, np.floating)):
                v = v.item()
            assert isinstance(v, (float, int))
            self.meters[k].update(v)

    def __getattr__(self, attr):
        if attr in self.meters:
            return self.meters[attr]
        if attr in self.__dict__:
            return self.__dict__[attr]
        raise AttributeError(f"'{type(self).__name__}' object has no attribute '{attr}'")

    def __str__(self):
        meter_str = []
        for name, meter in self.meters.items():
            meter_str.append(f"{name}: {str(meter)}")
        return self.delimiter.join(meter_str)

    def log_every(self, iterable, print_freq, header=None):
        i = 0
        if not header:
            header = ""
        start_time = time.time()
        end = time.time()
        iter_time = SmoothedValue(fmt="{avg:.4f}")
        space_fmt = ":" + str(len(str(len(iterable)))) + "d"
        log_msg = self.delimiter.join([header, "[{0" + space_fmt + "}/{1}]", "eta: {eta}", "{meters}", "time: {time}"])
        for obj in iterable:
            yield obj
            iter_time.update(time.time() - end)
            if print_freq > 0 and i % print_freq == 0:
                eta_seconds = iter_time.global_avg * (len(iterable) - i)
                eta_string = str(datetime.timedelta(seconds=int(eta_seconds)))
                print(log_msg.format(i, len(iterable), eta=eta_string, meters=str(self), time=str(iter_time)))
            i += 1
            end = time.time()
        total_time = time.time() - start_time
        total_time_str = str(datetime.timedelta(seconds=int(total_time)))
        print(f"{header} Total time: {total_time_str}")


def save_args(args, log_dir, configs=None):
    with open(os.path.join(log_dir, 'args.txt'), 'w', encoding='utf-8') as args_txt:
        args_txt.write(str(args))
        args_txt.write('\n')
        args_txt.write(' '.join(sys.argv))
        args_txt.write('\n')
        for name, config in (configs or {}).items():
            args_txt.write(f'[{name}]\n{config}\n')


def write_summary(log_dir, stage, summary):
    """Machine-readable counts of one stage, summary_<stage>.json."""
    path = os.path.join(log_dir, f'summary_{stage}.json')
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def plot_pr_curves(curves, path, title='precision / recall'):
    """`curves` maps a legend label to a list of PR points (or one point for a baseline)."""
    fig, ax = plt.subplots(figsize=(5, 4), dpi=150)
    for label, points in curves.items():
        recall = [p.recall for p in points]
        precision = [p.precision for p in points]
        if len(points) == 1:
            ax.scatter(recall, precision, label=label, marker='x')
        else:
            ax.step(recall, precision, where='post', label=label)
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel('recall')
    ax.set_ylabel('precision')
    ax.set_title(title)
    ax.legend(loc='lower left')
    fig.savefig(path, metadata={'Software': None})
    plt.close(fig)


def plot_heatmap(table, bin_size_m, path):
    """Error rate per map cell from a heatmap table (cell_x_m, cell_y_m, rate)."""
    fig, ax = plt.subplots(figsize=(5, 4), dpi=150)
    scatter = ax.scatter(table['cell_x_m'] + bin_size_m / 2, table['cell_y_m'] + bin_size_m / 2,
                         c=table['rate'], cmap='inferno', marker='s')
    fig.colorbar(scatter, ax=ax, label='errors per frame')
    ax.set_xlabel('x [m]')
    ax.set_ylabel('y [m]')
    ax.set_aspect('equal')
    fig.savefig(path, metadata={'Software': None})
    plt.close(fig)
