"""Build optimizers and schedulers from OPTIMIZER / SCHEDULER config groups"""
import logging

import torch
from . import lr_scheduler

logger = logging.getLogger(__name__)


def _options(group, name):
    """Keyword arguments of the ``name`` sub-group, if any."""
    return dict(group.get(name, dict()))


def build_optimizer(cfg, model):
    name = cfg.OPTIMIZER.TYPE
    if not name:
        logger.warning('No optimizer is built.')
        return None
    if not hasattr(torch.optim, name):
        raise ValueError('Unsupported type of optimizer: {}'.format(name))
    params = [p for p in model.parameters() if p.requires_grad]
    logger.info('Optimizing {} parameter tensors with {}'.format(len(params), name))
    return getattr(torch.optim, name)(
        params,
        lr=cfg.OPTIMIZER.BASE_LR,
        weight_decay=cfg.OPTIMIZER.WEIGHT_DECAY,
        **_options(cfg.OPTIMIZER, name)
    )


def build_scheduler(cfg, optimizer):
    name = cfg.SCHEDULER.TYPE
    if not name:
        logger.warning('No scheduler is built.')
        return None
    # project schedules shadow torch ones of the same name
    for module in (lr_scheduler, torch.optim.lr_scheduler):
        if hasattr(module, name):
            return getattr(module, name)(optimizer, **_options(cfg.SCHEDULER, name))
    raise ValueError('Unsupported type of scheduler: {}'.format(name))
