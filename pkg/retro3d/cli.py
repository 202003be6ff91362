#!/usr/bin/env python
"""Command-line interface.

Subcommands: prep, vocab, train, average, predict, evaluate, dump-attention.
Config options are overridden by trailing KEY VALUE pairs, e.g.

    python retro3d/cli.py --cfg configs/uspto50k/retro3d_desk.yaml train TRAIN.MAX_STEPS 100

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric divergence.
"""
import os
import os.path as osp
import sys
import argparse
import json
import logging
import time
from collections import Counter

import numpy as np
import torch
from tabulate import tabulate

# Assume that the script is run at the root directory
_ROOT_DIR = os.path.abspath(osp.dirname(__file__) + '/..')
sys.path.insert(0, _ROOT_DIR)

from common.utils.checkpoint import CheckpointError, average_checkpoints, save_params
from common.utils.logger import setup_logger

from retro3d import ops
from retro3d.chem import SmilesParseError, validity_check
from retro3d.conformer import ConformerError, load_conformer, read_conformer_file, synthetic_conformer
from retro3d.data import (DataError, ReactionDataset, build_vocab, collate, load_conformers, num_threads,
                          product_example, read_reactions)
from retro3d.models.attention import head_weights

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

logger = logging.getLogger('retro3d.cli')


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------- #
# Configuration
# ---------------------------------------------------------------------------- #
def load_cfg(args):
    # import on-the-fly to avoid overwriting cfg
    from common.config import purge_cfg
    from retro3d.config.retro3d import cfg, validate_cfg
    cfg = cfg.clone()
    if args.config_file:
        cfg.merge_from_file(args.config_file)
    cfg.merge_from_list(args.opts or [])
    if args.seed is not None:
        cfg.RNG_SEED = args.seed
    purge_cfg(cfg)
    validate_cfg(cfg)
    cfg.freeze()
    return cfg


def resolve_output_dir(cfg, config_file, override=''):
    output_dir = override or cfg.OUTPUT_DIR
    if output_dir and '@' in output_dir:
        if not config_file:
            raise ValueError('OUTPUT_DIR "@" needs --cfg')
        config_path = osp.splitext(config_file)[0]
        output_dir = output_dir.replace('@', config_path.replace('configs', 'outputs'))
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    return output_dir


def _conformer_for(product, args, on_missing):
    if args.conformer:
        records = read_conformer_file(args.conformer)
        if args.id:
            if args.id not in records:
                raise DataError('no conformer with id {!r}'.format(args.id), path=args.conformer)
            record = records[args.id]
        elif len(records) == 1:
            record = next(iter(records.values()))
        else:
            raise DataError('{} conformers found; pass --id'.format(len(records)), path=args.conformer)
        return load_conformer(record, product)
    if on_missing == 'skip':
        raise DataError('no conformer given for {}'.format(product))
    if on_missing == 'synthetic':
        return synthetic_conformer(product, seed=0)
    return None


# ---------------------------------------------------------------------------- #
# Subcommands
# ---------------------------------------------------------------------------- #
def cmd_prep(args, cfg):
    """Filter and assemble a reaction file; write a root-aligned cache and a filter report."""
    records = read_reactions(args.input)
    vocab = build_vocab(records, with_classes=cfg.DATASET.USE_CLASS)
    dataset = ReactionDataset(records, vocab,
                              conformers=load_conformers(cfg),
                              on_missing=cfg.DATASET.ON_MISSING_CONFORMER,
                              use_class=cfg.DATASET.USE_CLASS,
                              max_length=cfg.MODEL.Retro3D.max_length,
                              threads=num_threads())
    output = args.output or osp.splitext(args.input)[0] + '.prep.jsonl'
    with open(output, 'w') as f:
        for record, example in zip(dataset.records, dataset.examples):
            f.write(json.dumps({
                'id': example.id,
                'class': record.reaction_class,
                'reaction': '{}>>{}'.format(example.reactants, example.product),
                'src_length': example.num_src,
                'tgt_length': example.num_tgt + 1,
                'num_atoms': int(example.num_atoms),
                'has_conformer': example.has_conformer,
            }, sort_keys=True) + '\n')

    report = Counter(dataset.rejected)
    report['kept'] = len(dataset)
    table = tabulate(sorted(report.items()), headers=['reason', 'count'], tablefmt='psql')
    with open(output + '.report.txt', 'w') as f:
        f.write(table + '\n')
    logger.info('Kept {} of {} reactions, cache written to {}\n{}'.format(len(dataset), len(records), output, table))
    return EXIT_OK


def cmd_vocab(args, cfg):
    records = []
    for path in args.inputs:
        records.extend(read_reactions(path))
    vocab = build_vocab(records, with_classes=cfg.DATASET.USE_CLASS)
    vocab.save(args.output)
    logger.info('Saved vocabulary of {} tokens to {}'.format(len(vocab), args.output))
    return EXIT_OK


def cmd_train(args, cfg):
    from retro3d.train_retro3d import train
    output_dir = resolve_output_dir(cfg, args.config_file, args.output_dir)
    setup_logger('retro3d', output_dir, comment='train.{}'.format(time.strftime('%m-%d_%H-%M-%S')))
    logger.info('Running with config:\n{}'.format(cfg))
    result = train(cfg, output_dir, run_name='cli')
    logger.info('Training stopped: {}'.format(result['stop_reason']))
    return EXIT_OK


def cmd_average(args, cfg):
    params, header = average_checkpoints(args.checkpoints)
    meta = dict(header.get('meta') or {})
    meta['averaged'] = [osp.basename(p) for p in args.checkpoints]
    save_params(args.output, params, config=header.get('config'), meta=meta)
    logger.info('Averaged {} checkpoints into {}'.format(len(args.checkpoints), args.output))
    return EXIT_OK


def cmd_predict(args, cfg):
    from retro3d.test_retro3d import candidate_smiles, decode_examples, load_checkpoint_model
    model, vocab = load_checkpoint_model(cfg, args.weight, logger)
    try:
        conformer = _conformer_for(args.smiles, args, cfg.DATASET.ON_MISSING_CONFORMER)
        example = product_example(args.smiles, vocab, conformer, args.reaction_class, model.max_length)
    except (SmilesParseError, ConformerError) as e:
        raise DataError(str(e))
    beam = args.beam or cfg.TEST.BEAM
    result = decode_examples(model, [example], beam, cfg.TEST.MAX_LENGTH)[0]
    rows = []
    for rank, (seq, score) in enumerate(result.candidates[:args.topk], 1):
        smiles = candidate_smiles(vocab, seq)
        rows.append([rank, smiles or '', '{:.4f}'.format(score), validity_check(smiles)])
    print(tabulate(rows, headers=['rank', 'reactants', 'log-prob', 'valid'], tablefmt='psql'))
    return EXIT_OK


def cmd_evaluate(args, cfg):
    from retro3d.test_retro3d import test
    if args.weight:
        cfg.defrost()
        cfg.TEST.WEIGHT = args.weight
        cfg.freeze()
    output_dir = resolve_output_dir(cfg, args.config_file, args.output_dir)
    setup_logger('retro3d', output_dir, comment='test.{}'.format(time.strftime('%m-%d_%H-%M-%S')))
    metric = test(cfg, output_dir)
    print(metric.table())
    return EXIT_OK


def _save_matrix(path, matrix):
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), delimiter=',', fmt='%.6g')


def cmd_dump_attention(args, cfg):
    """Attention maps of one test reaction as CSV matrices."""
    from retro3d.data import assemble
    from retro3d.test_retro3d import load_checkpoint_model
    model, vocab = load_checkpoint_model(cfg, args.weight, logger)
    records = read_reactions(args.input or cfg.DATASET.TEST)
    if args.id:
        records = [r for r in records if r.id == args.id]
        if not records:
            raise DataError('no reaction with id {!r}'.format(args.id))
    example = assemble(records[0], vocab, load_conformers(cfg),
                       on_missing=cfg.DATASET.ON_MISSING_CONFORMER,
                       use_class=cfg.DATASET.USE_CLASS,
                       max_length=model.max_length)
    data_batch = collate([example])
    model.eval()
    with torch.no_grad():
        enc = model.encode(data_batch)
        _, cross_attn = model.decode(data_batch['tgt_in'], enc['memory'], enc['src_pad'])

    output_dir = args.output_dir or 'attention.{}'.format(example.id)
    os.makedirs(output_dir, exist_ok=True)
    for layer, attn in enumerate(enc['enc_attn']):
        for head in range(attn.shape[1]):
            _save_matrix(osp.join(output_dir, 'encoder_layer{}_head{}.csv'.format(layer, head)), attn[0, head])
    _save_matrix(osp.join(output_dir, 'distance.csv'), example.dist)
    if enc['phi'] is not None:
        phi = head_weights(enc['phi'], model.spatial_heads)[0]
        for head in range(phi.shape[-1]):
            _save_matrix(osp.join(output_dir, 'phi_head{}.csv'.format(head)), phi[..., head])
    _save_matrix(osp.join(output_dir, 'cross_attention.csv'), cross_attn[0].mean(0))
    _save_matrix(osp.join(output_dir, 'sam.csv'), example.sam)
    with open(osp.join(output_dir, 'tokens.json'), 'w') as f:
        json.dump({
            'id': example.id,
            'source': vocab.decode(example.src_ids, strip_specials=False),
            'target': vocab.decode(example.tgt_ids[:-1], strip_specials=False),
        }, f, indent=2)
    logger.info('Attention maps of reaction {} written to {}'.format(example.id, output_dir))
    return EXIT_OK


# ---------------------------------------------------------------------------- #
# Entry point
# ---------------------------------------------------------------------------- #
def build_parser():
    parser = ArgumentParser(prog='retro3d', description='Retro3D retrosynthesis')
    parser.add_argument('--cfg', dest='config_file', default='', metavar='FILE', help='path to config file')
    parser.add_argument('--seed', type=int, default=None, help='override RNG_SEED')
    parser.add_argument('--device', default='none', choices=['none', 'cpu'], help='computation runs on CPU')
    subparsers = parser.add_subparsers(dest='command', parser_class=ArgumentParser)

    def add(name, func, help_text):
        sub = subparsers.add_parser(name, help=help_text)
        sub.set_defaults(func=func)
        return sub

    sub = add('prep', cmd_prep, 'filter and assemble a reaction file')
    sub.add_argument('input')
    sub.add_argument('--output', default='')

    sub = add('vocab', cmd_vocab, 'build a vocabulary file')
    sub.add_argument('inputs', nargs='+')
    sub.add_argument('--output', required=True)

    sub = add('train', cmd_train, 'train a model')
    sub.add_argument('--output-dir', default='')

    sub = add('average', cmd_average, 'average checkpoint parameters')
    sub.add_argument('checkpoints', nargs='+')
    sub.add_argument('--output', required=True)

    sub = add('predict', cmd_predict, 'predict reactants of one product')
    sub.add_argument('smiles')
    sub.add_argument('--weight', required=True)
    sub.add_argument('--conformer', default='', help='JSON-lines conformer file')
    sub.add_argument('--id', default='', help='conformer record id')
    sub.add_argument('--reaction-class', type=int, default=None)
    sub.add_argument('--beam', type=int, default=0)
    sub.add_argument('--topk', type=int, default=10)

    sub = add('evaluate', cmd_evaluate, 'top-k accuracy on the test set')
    sub.add_argument('--weight', default='')
    sub.add_argument('--output-dir', default='')

    sub = add('dump-attention', cmd_dump_attention, 'write attention maps of one reaction')
    sub.add_argument('--weight', required=True)
    sub.add_argument('--input', default='', help='reaction file, defaults to DATASET.TEST')
    sub.add_argument('--id', default='')
    sub.add_argument('--output-dir', default='')

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        # trailing KEY VALUE pairs override config options
        args, opts = parser.parse_known_args(argv)
        unknown = [o for o in opts if o.startswith('--')]
        if unknown:
            raise UsageError('unrecognized arguments: {}'.format(' '.join(unknown)))
        if args.command is None:
            raise UsageError('a subcommand is required')
        args.opts = opts
        cfg = load_cfg(args)
    except (UsageError, ValueError, KeyError, AssertionError, OSError) as e:
        print('retro3d: error: {}'.format(e), file=sys.stderr)
        return EXIT_USAGE

    if args.command not in ('train', 'evaluate'):
        setup_logger('retro3d', '')
    try:
        return args.func(args, cfg)
    except ops.NonFiniteError as e:
        logger.error('Numeric divergence: {}'.format(e))
        return EXIT_NUMERIC
    except (DataError, SmilesParseError, ConformerError, CheckpointError, OSError) as e:
        logger.error('Data error: {}'.format(e))
        return EXIT_DATA
    except ValueError as e:
        logger.error('Usage error: {}'.format(e))
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
