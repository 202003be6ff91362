from __future__ import division
from torch.optim.lr_scheduler import _LRScheduler


class NoamLR(_LRScheduler):
    """Inverse square-root schedule with linear warmup.

    lr = base_lr * factor * model_size^-0.5 * min(step^-0.5, step * warmup_steps^-1.5),
    where step counts optimisation steps from 1.
    """

    def __init__(self, optimizer, model_size, warmup_steps=8000, factor=1.0, last_epoch=-1):
        if model_size < 1:
            raise ValueError('model_size must be positive, got {}'.format(model_size))
        if warmup_steps < 1:
            raise ValueError('warmup_steps must be positive, got {}'.format(warmup_steps))
        self.model_size = model_size
        self.warmup_steps = warmup_steps
        self.factor = factor
        super(NoamLR, self).__init__(optimizer, last_epoch)

    def rate(self, step):
        return self.factor * self.model_size ** -0.5 * min(step ** -0.5, step * self.warmup_steps ** -1.5)

    def get_lr(self):
        step = self.last_epoch + 1
        return [base_lr * self.rate(step) for base_lr in self.base_lrs]
