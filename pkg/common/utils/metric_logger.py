import json
from collections import OrderedDict, deque

import numpy as np
import torch


def _as_value_count(value):
    """Scalar sum and element count of a number, tensor or array."""
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    if isinstance(value, (np.ndarray, np.generic)):
        return float(np.sum(value)), int(np.size(value))
    if isinstance(value, (bool, int, float)):
        return float(value), 1
    raise TypeError('Cannot log value of type {}'.format(type(value).__name__))


class AverageMeter(object):
    """Sum/count accumulator with a moving window.

    ``avg`` is taken over the last ``window_size`` updates and ``global_avg``
    over everything since the last ``reset``. Each update carries a count, so
    an update of (correct, total) gives a ratio rather than a mean of ratios.
    """
    default_fmt = '{avg:.4f} ({global_avg:.4f})'
    default_summary_fmt = '{global_avg:.4f}'

    def __init__(self, window_size=20, fmt=None, summary_fmt=None):
        self.window = deque(maxlen=window_size)
        self.sum = 0.0
        self.count = 0
        self.fmt = fmt or self.default_fmt
        self.summary_fmt = summary_fmt or self.default_summary_fmt

    def update(self, value, count=1):
        self.window.append((value, count))
        self.sum += value
        self.count += count

    @property
    def avg(self):
        total = sum(c for _, c in self.window)
        return sum(v for v, _ in self.window) / total if total else float('nan')

    @property
    def global_avg(self):
        return self.sum / self.count if self.count else float('nan')

    def reset(self):
        self.window.clear()
        self.sum = 0.0
        self.count = 0

    def __str__(self):
        return self.fmt.format(avg=self.avg, global_avg=self.global_avg)

    @property
    def summary_str(self):
        return self.summary_fmt.format(global_avg=self.global_avg)


class MetricLogger(object):
    """Named meters, created on first update.

    Meters added with ``add_meter(s)`` (e.g. accuracy metrics with their own
    ``update_dict``) must provide ``__str__``, ``summary_str``, ``global_avg``
    and ``reset``.
    """
    # wall-clock meters, left out of ``as_dict``
    timing_meters = ('time', 'data')

    def __init__(self, delimiter='\t'):
        self.meters = OrderedDict()
        self.delimiter = delimiter

    def update(self, **kwargs):
        for name, value in kwargs.items():
            value, count = _as_value_count(value)
            if name not in self.meters:
                self.meters[name] = AverageMeter()
            self.meters[name].update(value, count)

    def add_meter(self, name, meter):
        self.meters[name] = meter

    def add_meters(self, meters):
        if not isinstance(meters, (list, tuple)):
            meters = [meters]
        for meter in meters:
            self.add_meter(meter.name, meter)

    def as_dict(self, prefix=''):
        """Global averages keyed by ``prefix + name``, without timing meters."""
        return OrderedDict((prefix + name, meter.global_avg) for name, meter in self.meters.items()
                           if name not in self.timing_meters)

    def __str__(self):
        return self.delimiter.join('{}: {}'.format(name, meter) for name, meter in self.meters.items())

    @property
    def summary_str(self):
        return self.delimiter.join('{}: {}'.format(name, meter.summary_str) for name, meter in self.meters.items())

    def reset(self):
        for meter in self.meters.values():
            meter.reset()


class JsonlWriter(object):
    """Append-only JSON-lines log.

    One record per line with sorted keys and no timestamps, so that runs with
    identical seeds produce identical files.
    """

    def __init__(self, path, append=True):
        self.path = path
        self._file = open(path, 'a' if append else 'w') if path else None

    def write(self, **record):
        if self._file is None:
            return
        for k, v in record.items():
            if isinstance(v, (torch.Tensor, np.ndarray, np.generic)):
                record[k] = v.item()
        self._file.write(json.dumps(record, sort_keys=True) + '\n')
        self._file.flush()

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
