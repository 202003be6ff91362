import logging
import os

from torch.utils.data.dataloader import DataLoader

from common.utils.sampler import BucketBatchSampler
from retro3d.conformer import read_conformer_file
from .dataset import ReactionDataset, collate
from .reaction_io import read_reactions
from .vocab import Vocab, build_vocab

logger = logging.getLogger(__name__)


def load_conformers(cfg):
    path = cfg.DATASET.CONFORMERS
    if not path:
        return None
    return read_conformer_file(path)


def build_dataset(cfg, mode, vocab, conformers=None):
    assert mode in ['train', 'val', 'test']
    is_train = (mode == 'train')
    path = cfg.DATASET[mode.upper()]
    records = read_reactions(path)
    dataset = ReactionDataset(records, vocab,
                              conformers=conformers,
                              on_missing=cfg.DATASET.ON_MISSING_CONFORMER,
                              use_class=cfg.DATASET.USE_CLASS,
                              max_length=cfg.MODEL.Retro3D.max_length,
                              augment=is_train and cfg.TRAIN.AUGMENT,
                              seed=max(cfg.RNG_SEED, 0))
    logger.info('{} dataset: {} reactions from {}'.format(mode, len(dataset), path))
    return dataset


def build_dataloader(cfg, mode, vocab, conformers=None):
    dataset = build_dataset(cfg, mode, vocab, conformers)
    is_train = (mode == 'train')
    batch_size = cfg[mode.upper()].BATCH_SIZE
    batch_sampler = BucketBatchSampler(dataset.lengths(),
                                       batch_size=batch_size,
                                       shuffle=is_train,
                                       drop_last=is_train and cfg.DATALOADER.DROP_LAST,
                                       bucket_size=cfg.DATALOADER.BUCKET_SIZE,
                                       seed=max(cfg.RNG_SEED, 0))
    dataloader = DataLoader(
        dataset,
        batch_sampler=batch_sampler,
        collate_fn=collate,
        num_workers=cfg.DATALOADER.NUM_WORKERS,
    )
    return dataloader


def load_vocab(cfg, save_dir=''):
    """Vocabulary from ``DATASET.VOCAB`` if it exists, else built from the training set.

    A built vocabulary is written to ``<save_dir>/vocab.txt``.
    """
    path = cfg.DATASET.VOCAB
    if path and os.path.exists(path):
        vocab = Vocab.load(path)
        logger.info('Loaded vocabulary of {} tokens from {}'.format(len(vocab), path))
        return vocab
    vocab = build_vocab(read_reactions(cfg.DATASET.TRAIN), with_classes=cfg.DATASET.USE_CLASS)
    if save_dir:
        path = os.path.join(save_dir, 'vocab.txt')
        vocab.save(path)
        logger.info('Saved vocabulary of {} tokens to {}'.format(len(vocab), path))
    return vocab
