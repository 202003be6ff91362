# Copyright (c) Facebook, Inc. and its affiliates. All Rights Reserved.
# Modified by Jiayuan Gu
"""Checkpoints.

Parameters are stored in a small versioned binary format so that saving,
averaging and loading are bit-exact round trips:

    magic            4 bytes   b'R3D1'
    header length    uint32    little-endian
    header           UTF-8 JSON {"config": ..., "meta": ...}, sorted keys
    tensor count     uint32
    per tensor:
        name length  uint32
        name         UTF-8
        rank         uint32
        dims         rank x uint32
        data         prod(dims) x little-endian float64, C order

Optimizer and scheduler states live next to the parameters in
``<name>.states.pth`` (torch.save) and are only needed to resume training.
"""
import json
import logging
import os
import struct
from collections import OrderedDict

import numpy as np
import torch

from .io import atomic_open, get_md5

MAGIC = b'R3D1'
PARAMS_EXT = '.r3d'
STATES_EXT = '.states.pth'


class CheckpointError(ValueError):
    pass


def _to_numpy(value):
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    return np.ascontiguousarray(value, dtype='<f8')


def save_params(path, params, config=None, meta=None):
    """Write named float tensors to ``path``.

    Args:
        params (dict): name -> torch.Tensor or np.ndarray, written in iteration order.
        config: JSON-serialisable config (e.g. a CfgNode converted to dict).
        meta (dict): extra JSON-serialisable data such as epoch or metrics.
    """
    header = json.dumps({'config': config, 'meta': meta or {}}, sort_keys=True).encode('utf-8')
    with atomic_open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack('<I', len(header)))
        f.write(header)
        f.write(struct.pack('<I', len(params)))
        for name, value in params.items():
            array = _to_numpy(value)
            encoded = name.encode('utf-8')
            f.write(struct.pack('<I', len(encoded)))
            f.write(encoded)
            f.write(struct.pack('<I', array.ndim))
            f.write(struct.pack('<{}I'.format(array.ndim), *array.shape))
            f.write(array.tobytes(order='C'))


class _Reader(object):
    def __init__(self, buffer, path):
        self.buffer = buffer
        self.path = path
        self.pos = 0

    def read(self, size):
        if self.pos + size > len(self.buffer):
            raise CheckpointError('{}: truncated checkpoint at byte {}'.format(self.path, self.pos))
        chunk = self.buffer[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def uint32(self):
        return struct.unpack('<I', self.read(4))[0]

    def uint32s(self, count):
        return struct.unpack('<{}I'.format(count), self.read(4 * count))


def load_params(path):
    """Read a parameter file.

    Returns:
        params (OrderedDict): name -> np.ndarray float64
        header (dict): {'config': ..., 'meta': ...}
    """
    with open(path, 'rb') as f:
        reader = _Reader(f.read(), path)
    magic = reader.read(4)
    if magic != MAGIC:
        raise CheckpointError('{}: bad magic {!r}, expected {!r}'.format(path, magic, MAGIC))
    header = json.loads(reader.read(reader.uint32()).decode('utf-8'))
    params = OrderedDict()
    for _ in range(reader.uint32()):
        name = reader.read(reader.uint32()).decode('utf-8')
        rank = reader.uint32()
        shape = reader.uint32s(rank)
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(reader.read(8 * size), dtype='<f8').reshape(shape)
        params[name] = data.astype(np.float64)
    if reader.pos != len(reader.buffer):
        raise CheckpointError('{}: {} trailing bytes'.format(path, len(reader.buffer) - reader.pos))
    return params, header


def average_checkpoints(paths):
    """Parameter-wise arithmetic mean of checkpoints with identical layouts.

    Returns:
        params (OrderedDict), header of the first checkpoint
    """
    if not paths:
        raise ValueError('No checkpoints to average.')
    total, header = load_params(paths[0])
    total = OrderedDict((k, v.copy()) for k, v in total.items())
    for path in paths[1:]:
        params, _ = load_params(path)
        if list(params.keys()) != list(total.keys()):
            raise CheckpointError('{}: parameter names differ from {}'.format(path, paths[0]))
        for name, value in params.items():
            if value.shape != total[name].shape:
                raise CheckpointError('{}: shape of {} is {}, expected {}'.format(
                    path, name, value.shape, total[name].shape))
            total[name] += value
    averaged = OrderedDict((k, v / len(paths)) for k, v in total.items())
    return averaged, header


def load_model_params(model, params, strict=True):
    state_dict = OrderedDict((k, torch.from_numpy(np.array(v))) for k, v in params.items())
    return model.load_state_dict(state_dict, strict=strict)


class Checkpointer(object):
    """Checkpoint the model and relevant states.

    Supported features:
    1. Resume optimizer and scheduler
    2. Resume last saved checkpoint

    """

    def __init__(self,
                 model,
                 optimizer=None,
                 scheduler=None,
                 save_dir='',
                 logger=None,
                 config=None,
                 ):
        self.model = model
        self.optimizer = optimizer
        self.scheduler = scheduler
        self.save_dir = save_dir
        self.config = config
        # logging
        self.logger = logger
        self._print = logger.info if logger else print

    def save(self, name, tag=True, **kwargs):
        if not self.save_dir:
            return

        save_file = os.path.join(self.save_dir, name + PARAMS_EXT)
        self._print('Saving checkpoint to {}'.format(os.path.abspath(save_file)))
        save_params(save_file, self.model.state_dict(), config=self.config, meta=kwargs)

        states = dict(kwargs)
        if self.optimizer is not None:
            states['optimizer'] = self.optimizer.state_dict()
        if self.scheduler is not None:
            states['scheduler'] = self.scheduler.state_dict()
        torch.save(states, os.path.join(self.save_dir, name + STATES_EXT))
        if tag:
            self.tag_last_checkpoint(save_file)
        return save_file

    def load(self, path=None, resume=True, resume_states=True):
        if resume and self.has_checkpoint():
            # override argument with existing checkpoint
            path = self.get_checkpoint_file()
        if not path:
            # no checkpoint could be found
            self._print('No checkpoint found. Initializing model from scratch')
            return {}

        self._print('Loading checkpoint from {}, MD5: {}'.format(path, get_md5(path)))
        params, header = load_params(path)
        load_model_params(self.model, params)
        checkpoint = dict(header.get('meta') or {})

        states_file = path[:-len(PARAMS_EXT)] + STATES_EXT if path.endswith(PARAMS_EXT) else ''
        if resume_states and states_file and os.path.exists(states_file):
            states = torch.load(states_file, map_location=torch.device('cpu'))
            if 'optimizer' in states and self.optimizer:
                self._print('Loading optimizer from {}'.format(states_file))
                self.optimizer.load_state_dict(states.pop('optimizer'))
            if 'scheduler' in states and self.scheduler:
                self._print('Loading scheduler from {}'.format(states_file))
                self.scheduler.load_state_dict(states.pop('scheduler'))
            checkpoint.update(states)
        elif not resume_states:
            checkpoint = {}

        # return any further checkpoint data
        return checkpoint

    def has_checkpoint(self):
        save_file = os.path.join(self.save_dir, 'last_checkpoint')
        return os.path.exists(save_file)

    def get_checkpoint_file(self):
        save_file = os.path.join(self.save_dir, 'last_checkpoint')
        try:
            with open(save_file, 'r') as f:
                last_saved = f.read().strip()
            # If not absolute path, add save_dir as prefix
            if not os.path.isabs(last_saved):
                last_saved = os.path.join(self.save_dir, last_saved)
        except IOError:
            # If file doesn't exist, maybe because it has just been
            # deleted by a separate process
            last_saved = ''
        return last_saved

    def tag_last_checkpoint(self, last_filename):
        save_file = os.path.join(self.save_dir, 'last_checkpoint')
        with atomic_open(save_file) as f:
            f.write(os.path.basename(last_filename))


def _remove_checkpoint(path):
    for file in (path, path[:-len(PARAMS_EXT)] + STATES_EXT):
        try:
            os.remove(file)
        except OSError as e:
            logging.warning('Ignoring: %s', str(e))


class CheckpointerV2(Checkpointer):
    """Keep the last ``max_to_keep`` checkpoints and the ``keep_best`` best ones.

    Best checkpoints are ranked by a validation metric (higher is better);
    ties keep the earlier checkpoint. The ranking is persisted in
    ``best_checkpoints`` as ``<metric>\\t<file>`` lines.
    """

    def __init__(self, *args, max_to_keep=1, keep_best=7, **kwargs):
        super(CheckpointerV2, self).__init__(*args, **kwargs)
        self.max_to_keep = max_to_keep
        self.keep_best = keep_best
        self._last_checkpoints = []
        self._best_checkpoints = []
        if self.save_dir:
            best_file = os.path.join(self.save_dir, 'best_checkpoints')
            if os.path.exists(best_file):
                self._best_checkpoints = self._load_best_checkpoints(best_file)

    def get_checkpoint_file(self):
        save_file = os.path.join(self.save_dir, 'last_checkpoint')
        try:
            self._last_checkpoints = self._load_last_checkpoints(save_file)
            last_saved = self._last_checkpoints[-1]
        except (IOError, IndexError):
            last_saved = ''
        return last_saved

    def tag_last_checkpoint(self, last_filename):
        save_file = os.path.join(self.save_dir, 'last_checkpoint')
        # Remove first from list if the same name was used before.
        if last_filename in self._last_checkpoints:
            self._last_checkpoints.remove(last_filename)
        self._last_checkpoints.append(last_filename)
        # If more than max_to_keep, remove the oldest.
        while len(self._last_checkpoints) > self.max_to_keep:
            _remove_checkpoint(self._last_checkpoints.pop(0))
        self._save_checkpoint_file(save_file)

    def save_best(self, name, metric, **kwargs):
        """Save as a best-k candidate; returns True if it entered the ranking."""
        if not self.save_dir or self.keep_best <= 0:
            return False
        ranked = self._best_checkpoints
        if len(ranked) >= self.keep_best and metric <= ranked[-1][0]:
            return False
        save_file = self.save(name, tag=False, **kwargs)
        ranked = [item for item in ranked if item[1] != save_file]
        ranked.append((metric, save_file))
        # stable sort keeps the earlier checkpoint first on ties
        ranked.sort(key=lambda item: -item[0])
        while len(ranked) > self.keep_best:
            _remove_checkpoint(ranked.pop()[1])
        self._best_checkpoints = ranked
        self._save_best_file(os.path.join(self.save_dir, 'best_checkpoints'))
        return True

    def best_checkpoint_files(self):
        return [path for _, path in self._best_checkpoints]

    def _save_checkpoint_file(self, path):
        with atomic_open(path) as f:
            f.write('\n'.join(os.path.basename(p) for p in self._last_checkpoints))

    def _load_last_checkpoints(self, path):
        with open(path, 'r') as f:
            return [os.path.join(self.save_dir, p.strip()) for p in f if p.strip()]

    def _save_best_file(self, path):
        with atomic_open(path) as f:
            f.write('\n'.join('{!r}\t{}'.format(metric, os.path.basename(p))
                              for metric, p in self._best_checkpoints))

    def _load_best_checkpoints(self, path):
        ranked = []
        with open(path, 'r') as f:
            for line in f:
                if not line.strip():
                    continue
                metric, name = line.rstrip('\n').split('\t')
                ranked.append((float(metric), os.path.join(self.save_dir, name)))
        return ranked
