#!/usr/bin/env python
import os
import os.path as osp
import sys
import argparse
import logging
import time
import socket
import warnings

import torch
from torch import nn

# Assume that the script is run at the root directory
_ROOT_DIR = os.path.abspath(osp.dirname(__file__) + '/..')
sys.path.insert(0, _ROOT_DIR)

from common.solver.build import build_optimizer, build_scheduler
from common.utils.checkpoint import CheckpointerV2, average_checkpoints, save_params
from common.utils.logger import setup_logger
from common.utils.metric_logger import MetricLogger, JsonlWriter
from common.utils.torch_util import resolve_seed, set_random_seed

from retro3d import ops
from retro3d.chem import strip_atom_maps
from retro3d.data import build_dataloader, load_conformers, load_vocab
from retro3d.models.build import build_model
from retro3d.models.loss import rdrop_forward, total_loss
from retro3d.models.metric import TopKAccuracy
from retro3d.test_retro3d import candidate_smiles, decode_examples


def parse_args():
    parser = argparse.ArgumentParser(description='Retro3D training')
    parser.add_argument(
        '--cfg',
        dest='config_file',
        default='',
        metavar='FILE',
        help='path to config file',
        type=str,
    )
    parser.add_argument(
        'opts',
        help='Modify config options using the command-line',
        default=None,
        nargs=argparse.REMAINDER,
    )
    args = parser.parse_args()
    return args


def train_step(model, loss_fn, data_batch, optimizer, seed, step, max_grad_norm=0.0):
    """One R-Drop step: two seeded passes, tape backward, optimizer update.

    Returns:
        preds (list of dict), loss_dict (dict), loss (torch.Tensor)
    """
    params = [p for p in model.parameters() if p.requires_grad]
    with ops.Tape():
        preds = rdrop_forward(model, data_batch, seed, step)
        loss_dict = loss_fn(preds, data_batch)
        loss = total_loss(loss_dict)
        grads = ops.backward(loss, params)
    optimizer.zero_grad()
    for param, grad in zip(params, grads):
        param.grad = grad.detach()
    if max_grad_norm > 0:
        nn.utils.clip_grad_norm_(params, max_norm=max_grad_norm)
    optimizer.step()
    return preds, loss_dict, loss


def validate(model, loss_fn, val_dataloader, val_metric, vocab, cfg):
    """Loss and token accuracy on ground-truth prefixes, plus decoded top-1 exact match.

    Returns:
        MetricLogger
    """
    val_metric_logger = MetricLogger(delimiter='  ')
    val_metric_logger.add_meters(val_metric)
    val_metric_logger.reset()
    model.eval()
    loss_fn.eval()
    with torch.no_grad():
        for data_batch in val_dataloader:
            preds = model(data_batch)
            loss_dict = loss_fn(preds, data_batch)
            val_metric_logger.update(loss=total_loss(loss_dict), **loss_dict)
            for metric in val_metric:
                metric.update_dict(preds, data_batch)

    examples = val_dataloader.dataset.examples
    if cfg.VAL.MAX_EXAMPLES > 0:
        examples = examples[:cfg.VAL.MAX_EXAMPLES]
    model_cfg = cfg.MODEL[cfg.MODEL.TYPE]
    results = decode_examples(model, examples, cfg.VAL.BEAM, model_cfg.max_length - 1)
    topk = TopKAccuracy(topk=(1,))
    for example, result in zip(examples, results):
        topk.update([candidate_smiles(vocab, seq) for seq in result.sequences[:1]],
                    strip_atom_maps(example.reactants))
    val_metric_logger.update(top1=topk.accuracy(1))
    return val_metric_logger


def train(cfg, output_dir='', run_name=''):
    # ---------------------------------------------------------------------------- #
    # Build models, optimizer, scheduler, checkpointer, etc.
    # ---------------------------------------------------------------------------- #
    logger = logging.getLogger('retro3d.train')

    seed = resolve_seed(cfg.RNG_SEED)
    vocab = load_vocab(cfg, output_dir)

    # build model
    set_random_seed(seed)
    model, loss_fn, train_metric, val_metric = build_model(cfg, len(vocab))
    logger.info('Build model:\n{}'.format(str(model)))
    num_params = sum(param.numel() for param in model.parameters())
    logger.info('#Parameters: {:.2e}'.format(num_params))

    # build optimizer
    optimizer = build_optimizer(cfg, model)

    # build lr scheduler
    scheduler = build_scheduler(cfg, optimizer)

    # build checkpointer
    # Note that checkpointer will load state_dict of model, optimizer and scheduler.
    checkpointer = CheckpointerV2(model,
                                  optimizer=optimizer,
                                  scheduler=scheduler,
                                  save_dir=output_dir,
                                  logger=logger,
                                  config={'cfg': cfg, 'vocab': vocab.itos},
                                  max_to_keep=1,
                                  keep_best=cfg.TRAIN.MAX_TO_KEEP)
    checkpoint_data = checkpointer.load(cfg.RESUME_PATH, resume=cfg.AUTO_RESUME, resume_states=cfg.RESUME_STATES)

    # build data loader
    # Reset the random seed again in case the initialization of models changes the random state.
    set_random_seed(seed)
    conformers = load_conformers(cfg)
    train_dataloader = build_dataloader(cfg, 'train', vocab, conformers)
    val_period = cfg.VAL.PERIOD
    val_dataloader = build_dataloader(cfg, 'val', vocab, conformers) if (val_period > 0 and cfg.DATASET.VAL) else None

    metrics_writer = JsonlWriter(osp.join(output_dir, 'metrics.jsonl') if output_dir else '')

    # ---------------------------------------------------------------------------- #
    # Train
    # ---------------------------------------------------------------------------- #
    max_epoch = cfg.TRAIN.MAX_EPOCH
    max_steps = cfg.TRAIN.MAX_STEPS
    start_epoch = checkpoint_data.get('epoch', 0)
    global_step = checkpoint_data.get('step', 0)
    best_metric_name = 'best_{}'.format(cfg.VAL.METRIC)
    best_metric = checkpoint_data.get(best_metric_name, None)
    num_bad_epochs = checkpoint_data.get('num_bad_epochs', 0)
    logger.info('Start training from epoch {} (step {})'.format(start_epoch, global_step))

    # add metrics
    if not isinstance(train_metric, (list, tuple)):
        train_metric = [train_metric]
    if not isinstance(val_metric, (list, tuple)):
        val_metric = [val_metric]
    train_metric_logger = MetricLogger(delimiter='  ')
    train_metric_logger.add_meters(train_metric)

    def setup_train():
        # set training mode
        model.train()
        loss_fn.train()
        # reset metric
        train_metric_logger.reset()

    stop_reason = 'max epoch'
    cur_epoch = start_epoch
    for epoch in range(start_epoch, max_epoch):
        cur_epoch = epoch + 1
        train_dataloader.dataset.set_epoch(epoch)
        train_dataloader.batch_sampler.set_epoch(epoch)
        setup_train()
        start_time = time.time()
        end = time.time()
        for iteration, data_batch in enumerate(train_dataloader):
            data_time = time.time() - end
            try:
                preds, loss_dict, loss = train_step(model, loss_fn, data_batch, optimizer, seed, global_step,
                                                    cfg.OPTIMIZER.MAX_GRAD_NORM)
            except ops.NonFiniteError as e:
                logger.error('Divergence at epoch {} step {} (batch {}): {}'.format(
                    cur_epoch, global_step + 1, ', '.join(data_batch['ids']), e))
                metrics_writer.close()
                raise
            lr = optimizer.param_groups[0]['lr']
            global_step += 1

            with torch.no_grad():
                train_metric_logger.update(loss=loss, **loss_dict)
                for metric in train_metric:
                    metric.update_dict(preds, data_batch)
            metrics_writer.write(type='train', epoch=cur_epoch, step=global_step, loss=loss, lr=lr,
                                 **{k: v for k, v in loss_dict.items()})

            batch_time = time.time() - end
            train_metric_logger.update(time=batch_time, data=data_time)

            # log
            cur_iter = iteration + 1
            if global_step == 1 or (cfg.TRAIN.LOG_PERIOD > 0 and global_step % cfg.TRAIN.LOG_PERIOD == 0):
                logger.info(
                    train_metric_logger.delimiter.join(
                        [
                            'epoch: {epoch}',
                            'iter: {iter:4d}',
                            'step: {step:6d}',
                            '{meters}',
                            'lr: {lr:.2e}',
                        ]
                    ).format(
                        epoch=cur_epoch,
                        iter=cur_iter,
                        step=global_step,
                        meters=str(train_metric_logger),
                        lr=lr,
                    )
                )

            # since pytorch v1.1.0, lr_scheduler is called after optimization.
            if scheduler is not None:
                scheduler.step()
            end = time.time()
            if 0 < max_steps <= global_step:
                break

        epoch_time = time.time() - start_time
        logger.info('Epoch[{}]-Train {}  total_time: {:.2f}s'.format(
            cur_epoch, train_metric_logger.summary_str, epoch_time))

        checkpoint_data.update(epoch=cur_epoch, step=global_step, num_bad_epochs=num_bad_epochs)
        checkpoint_data[best_metric_name] = best_metric

        # ---------------------------------------------------------------------------- #
        # validate for one epoch
        # ---------------------------------------------------------------------------- #
        if val_dataloader is not None and cur_epoch % val_period == 0:
            start_time_val = time.time()
            val_metric_logger = validate(model, loss_fn, val_dataloader, val_metric, vocab, cfg)
            logger.info('Epoch[{}]-Val {}  total_time: {:.2f}s'.format(
                cur_epoch, val_metric_logger.summary_str, time.time() - start_time_val))
            metrics_writer.write(type='val', epoch=cur_epoch, step=global_step,
                                 **val_metric_logger.as_dict('val_'))

            # best validation
            cur_metric = val_metric_logger.meters[cfg.VAL.METRIC].global_avg
            if best_metric is None or cur_metric > best_metric:
                best_metric = cur_metric
                num_bad_epochs = 0
            else:
                num_bad_epochs += 1
            checkpoint_data.update(num_bad_epochs=num_bad_epochs)
            checkpoint_data[best_metric_name] = best_metric
            checkpointer.save_best('model_best_{:04d}'.format(cur_epoch), cur_metric, **checkpoint_data)

        checkpointer.save('model_{:04d}'.format(cur_epoch), **checkpoint_data)

        if num_bad_epochs >= cfg.TRAIN.PATIENCE:
            stop_reason = 'no improvement of val-{} for {} validations'.format(cfg.VAL.METRIC, num_bad_epochs)
            break
        if 0 < max_steps <= global_step:
            stop_reason = 'max steps'
            break

    metrics_writer.close()
    logger.info('Stop training after epoch {} (step {}): {}'.format(cur_epoch, global_step, stop_reason))
    logger.info('Best val-{} = {}'.format(cfg.VAL.METRIC, best_metric))

    # ---------------------------------------------------------------------------- #
    # Average the best checkpoints
    # ---------------------------------------------------------------------------- #
    average_path = ''
    paths = []
    if output_dir:
        paths = checkpointer.best_checkpoint_files() or [p for p in [checkpointer.get_checkpoint_file()] if p]
    if paths:
        params, _ = average_checkpoints(paths)
        average_path = osp.join(output_dir, 'model_average.r3d')
        save_params(average_path, params, config={'cfg': cfg, 'vocab': vocab.itos},
                    meta={'averaged': [osp.basename(p) for p in paths], best_metric_name: best_metric})
        logger.info('Averaged {} checkpoints into {}'.format(len(paths), average_path))

    return {
        'model': model,
        'vocab': vocab,
        'epoch': cur_epoch,
        'step': global_step,
        'best_metric': best_metric,
        'stop_reason': stop_reason,
        'average_path': average_path,
    }


def main():
    args = parse_args()

    # load the configuration
    # import on-the-fly to avoid overwriting cfg
    from common.config import purge_cfg
    from retro3d.config.retro3d import cfg, validate_cfg
    cfg.merge_from_file(args.config_file)
    cfg.merge_from_list(args.opts)
    purge_cfg(cfg)
    validate_cfg(cfg)
    cfg.freeze()

    output_dir = cfg.OUTPUT_DIR
    # replace '@' with config path
    if output_dir:
        config_path = osp.splitext(args.config_file)[0]
        output_dir = output_dir.replace('@', config_path.replace('configs', 'outputs'))
        if osp.isdir(output_dir):
            warnings.warn('Output directory exists.')
        os.makedirs(output_dir, exist_ok=True)

    # run name
    timestamp = time.strftime('%m-%d_%H-%M-%S')
    hostname = socket.gethostname()
    run_name = '{:s}.{:s}'.format(timestamp, hostname)

    logger = setup_logger('retro3d', output_dir, comment='train.{:s}'.format(run_name))
    logger.info('Using {} torch threads'.format(torch.get_num_threads()))
    logger.info(args)

    logger.info('Loaded configuration file {:s}'.format(args.config_file))
    logger.info('Running with config:\n{}'.format(cfg))

    assert cfg.TASK == 'retro3d'
    train(cfg, output_dir, run_name)


if __name__ == '__main__':
    main()
