import logging

import torch
from torch import nn

from retro3d import ops

logger = logging.getLogger(__name__)


def rdrop_forward(model, data_batch, seed, step):
    """Two forward passes of one step with independent dropout masks."""
    preds = []
    for pass_index in range(2):
        with ops.DropoutScope(seed, step, pass_index):
            preds.append(model(data_batch))
    return preds


def total_loss(loss_dict):
    losses = list(loss_dict.values())
    total = losses[0]
    for loss in losses[1:]:
        total = ops.add(total, loss)
    return total


class Retro3DLoss(nn.Module):
    """CE + alpha * symmetric KL (R-Drop) + beta * SMILES alignment loss.

    ``forward`` takes the predictions of both R-Drop passes. The alignment
    term is the row-wise cross-entropy between the head-averaged final-layer
    cross-attention and the row-normalised alignment map, over output rows
    with at least one aligned source token.
    """

    def __init__(self, alpha=0.5, beta=1.0, pad_index=0):
        super(Retro3DLoss, self).__init__()
        if alpha < 0 or beta < 0:
            raise ValueError('loss weights must be non-negative, got alpha={} beta={}'.format(alpha, beta))
        self.alpha = alpha
        self.beta = beta
        self.pad_index = pad_index
        self.sam_empty = False

    def _alignment_loss(self, cross_attn, sam):
        attn = ops.mean(cross_attn, dim=1)
        row_sum = sam.sum(-1, keepdim=True)
        row_mask = row_sum.squeeze(-1) > 0
        target = sam / row_sum.clamp(min=1.0)
        return ops.alignment_cross_entropy(attn, target, row_mask)

    def forward(self, preds, labels):
        if isinstance(preds, dict):
            preds = [preds, preds]
        first, second = preds
        tgt_out = labels['tgt_out']
        flat_targets = tgt_out.reshape(-1)
        vocab_size = first['logits'].shape[-1]

        loss_dict = dict()
        ce = [ops.cross_entropy(ops.reshape(p['logits'], (-1, vocab_size)), flat_targets, self.pad_index)
              for p in (first, second)]
        loss_dict['ce_loss'] = ops.scale(ops.add(ce[0], ce[1]), 0.5)

        kl = ops.kl_divergence(first['logits'], second['logits'], tgt_out != self.pad_index)
        loss_dict['kl_loss'] = ops.scale(kl, self.alpha)

        sam = labels.get('sam')
        self.sam_empty = sam is None or not bool((sam.sum(-1) > 0).any())
        if self.beta > 0 and not self.sam_empty and first['cross_attn'] is not None:
            sa = [self._alignment_loss(p['cross_attn'], sam) for p in (first, second)]
            loss_dict['sa_loss'] = ops.scale(ops.add(sa[0], sa[1]), 0.5 * self.beta)
        else:
            if self.sam_empty:
                logger.debug('alignment map is empty; alignment loss skipped')
            loss_dict['sa_loss'] = torch.zeros((), dtype=torch.float64)
        return loss_dict
