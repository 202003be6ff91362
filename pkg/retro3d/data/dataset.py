import logging
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import torch
from torch.utils.data import Dataset
from tqdm import tqdm

from .example import assemble
from .reaction_io import DataError
from .vocab import PAD_INDEX

logger = logging.getLogger(__name__)


def num_threads():
    """Worker threads for preprocessing, capped by ``R3D_THREADS``."""
    value = os.environ.get('R3D_THREADS', '')
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            raise ValueError('R3D_THREADS must be an integer, got {!r}'.format(value))
    return os.cpu_count() or 1


def example_rng(seed, epoch, index):
    entropy = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(epoch), int(index)])
    return np.random.RandomState(entropy.generate_state(1)[0])


class ReactionDataset(Dataset):
    """Assembled reactions.

    Every record is assembled once at construction; rejected reactions are
    dropped and counted per reason in ``rejected``. With ``augment`` the
    product is re-rooted on the fly, deterministically per (seed, epoch,
    index); call ``set_epoch`` between epochs.
    """

    def __init__(self, records, vocab, conformers=None, on_missing='zero', use_class=False, max_length=512,
                 augment=False, seed=0, threads=None):
        self.vocab = vocab
        self.conformers = conformers
        self.kwargs = dict(on_missing=on_missing, use_class=use_class, max_length=max_length)
        self.augment = augment
        self.seed = seed
        self.epoch = 0

        def build(record):
            try:
                return assemble(record, vocab, conformers, **self.kwargs), None
            except DataError as e:
                return None, e.reason or str(e)

        threads = threads or num_threads()
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(tqdm(pool.map(build, records), total=len(records), desc='assemble',
                                disable=len(records) < 1000))
        self.records = []
        self.examples = []
        self.rejected = Counter()
        for record, (example, reason) in zip(records, results):
            if example is None:
                self.rejected[reason] += 1
                continue
            self.records.append(record)
            self.examples.append(example)
        if self.rejected:
            logger.info('kept %d of %d reactions; rejected: %s', len(self.examples), len(records),
                        ', '.join('{} ({})'.format(k, v) for k, v in sorted(self.rejected.items())))

    def set_epoch(self, epoch):
        self.epoch = epoch

    def lengths(self):
        return [max(ex.num_src, ex.num_tgt) for ex in self.examples]

    def __getitem__(self, index):
        if not self.augment:
            return self.examples[index]
        rng = example_rng(self.seed, self.epoch, index)
        try:
            return assemble(self.records[index], self.vocab, self.conformers, rng=rng, **self.kwargs)
        except DataError as e:
            logger.debug('augmentation of %s failed (%s); using the original', self.records[index].id, e)
            return self.examples[index]

    def __len__(self):
        return len(self.examples)


def collate(examples):
    """Pad a list of TokenizedReaction into one batch dict of tensors.

    Atom indices are shifted so that atoms of all examples share one table.
    """
    batch_size = len(examples)
    num_src = max(ex.num_src for ex in examples)
    num_tgt = max(ex.num_tgt for ex in examples)

    src_ids = np.full((batch_size, num_src), PAD_INDEX, dtype=np.int64)
    tgt_in = np.full((batch_size, num_tgt), PAD_INDEX, dtype=np.int64)
    tgt_out = np.full((batch_size, num_tgt), PAD_INDEX, dtype=np.int64)
    sam = np.zeros((batch_size, num_tgt, num_src), dtype=np.float64)
    dist = np.zeros((batch_size, num_src, num_src), dtype=np.float64)
    bond_type = np.zeros((batch_size, num_src, num_src), dtype=np.int64)
    pair_mask = np.zeros((batch_size, num_src, num_src), dtype=bool)
    token_atom = np.full((batch_size, num_src), -1, dtype=np.int64)
    atom_types, pairs, geo = [], [], []

    atom_offset = 0
    for b, ex in enumerate(examples):
        m, t = ex.num_src, ex.num_tgt
        src_ids[b, :m] = ex.src_ids
        tgt_in[b, :t] = ex.tgt_ids[:-1]
        tgt_out[b, :t] = ex.tgt_ids[1:]
        sam[b, :t, :m] = ex.sam
        dist[b, :m, :m] = ex.dist
        bond_type[b, :m, :m] = ex.bond_type
        pair_mask[b, :m, :m] = ex.pair_mask
        token_atom[b, :m] = np.where(ex.token_atom >= 0, ex.token_atom + atom_offset, -1)
        atom_types.append(ex.atom_types)
        pairs.append(ex.pairs + atom_offset)
        geo.append(ex.geo)
        atom_offset += ex.num_atoms

    return {
        'ids': [ex.id for ex in examples],
        'src_ids': torch.from_numpy(src_ids),
        'tgt_in': torch.from_numpy(tgt_in),
        'tgt_out': torch.from_numpy(tgt_out),
        'sam': torch.from_numpy(sam),
        'dist': torch.from_numpy(dist),
        'bond_type': torch.from_numpy(bond_type),
        'pair_mask': torch.from_numpy(pair_mask),
        'token_atom': torch.from_numpy(token_atom),
        'atom_types': torch.from_numpy(np.concatenate(atom_types)),
        'pairs': torch.from_numpy(np.concatenate(pairs).reshape(-1, 2)),
        'geo': torch.from_numpy(np.concatenate(geo)),
    }
