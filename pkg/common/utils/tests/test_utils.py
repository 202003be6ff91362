import hashlib
import json
import os

import numpy as np
import pytest
import torch

from common.utils.io import atomic_open, get_md5
from common.utils.metric_logger import AverageMeter, JsonlWriter, MetricLogger
from common.utils.sampler import BucketBatchSampler
from common.utils.torch_util import resolve_seed


def test_bucket_batch_sampler_covers_every_index():
    lengths = np.random.RandomState(0).randint(1, 40, size=103)
    sampler = BucketBatchSampler(lengths, batch_size=8, shuffle=True, bucket_size=4, seed=3)
    batches = list(sampler)
    assert len(batches) == len(sampler) == 13
    flat = sorted(i for batch in batches for i in batch)
    assert flat == list(range(103))
    for batch in batches:
        batch_lengths = lengths[batch]
        assert list(batch_lengths) == sorted(batch_lengths)


def test_bucket_batch_sampler_is_seeded_per_epoch():
    lengths = list(range(50))
    a = BucketBatchSampler(lengths, batch_size=4, seed=7)
    b = BucketBatchSampler(lengths, batch_size=4, seed=7)
    assert list(a) == list(b)
    first = list(a)
    a.set_epoch(1)
    assert list(a) != first


def test_bucket_batch_sampler_drop_last_and_order():
    sampler = BucketBatchSampler([3, 1, 2, 5, 4], batch_size=2, shuffle=False, drop_last=True)
    assert list(sampler) == [[1, 2], [0, 4]]
    with pytest.raises(ValueError):
        BucketBatchSampler([1], batch_size=0)


def test_metric_logger_averages():
    logger = MetricLogger(delimiter='  ')
    logger.update(loss=torch.tensor(2.0), acc=1)
    logger.update(loss=4.0, acc=0)
    assert logger.meters['loss'].global_avg == pytest.approx(3.0)
    assert logger.meters['acc'].global_avg == pytest.approx(0.5)
    assert 'loss' in logger.summary_str
    logger.reset()
    assert np.isnan(logger.meters['loss'].global_avg)

    meter = AverageMeter()
    meter.update(3.0, 2)
    assert meter.global_avg == pytest.approx(1.5)


def test_jsonl_writer(tmp_path):
    path = str(tmp_path / 'metrics.jsonl')
    with JsonlWriter(path, append=False) as writer:
        writer.write(step=1, loss=torch.tensor(0.5, dtype=torch.float64), type='train')
        writer.write(step=2, lr=np.float64(0.25))
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == '{"loss": 0.5, "step": 1, "type": "train"}'
    assert json.loads(lines[1]) == {'lr': 0.25, 'step': 2}

    # an empty path writes nothing
    JsonlWriter('').write(step=1)


def test_resolve_seed():
    assert resolve_seed(5) == 5
    seed = resolve_seed(-1)
    assert 0 <= seed < 2 ** 32


def test_atomic_open_leaves_target_on_error(tmp_path):
    path = str(tmp_path / 'tag')
    with atomic_open(path) as f:
        f.write('first')
    with pytest.raises(RuntimeError):
        with atomic_open(path) as f:
            f.write('second')
            raise RuntimeError('interrupted')
    with open(path) as f:
        assert f.read() == 'first'
    assert not os.path.exists(path + '.tmp')
    assert get_md5(path) == hashlib.md5(b'first').hexdigest()
