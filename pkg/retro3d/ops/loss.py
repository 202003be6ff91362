import torch

from .tape import recorded, DimensionError

ALIGNMENT_EPS = 1e-5


class CrossEntropyFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, logits, targets, mask):
        num_valid = mask.sum().to(logits.dtype)
        log_prob = logits - torch.logsumexp(logits, dim=-1, keepdim=True)
        nll = -log_prob.gather(-1, targets.clamp(min=0).unsqueeze(-1)).squeeze(-1)
        ctx.save_for_backward(log_prob, targets, mask)
        ctx.num_valid = num_valid
        return (nll * mask).sum() / num_valid

    @staticmethod
    def backward(ctx, grad_output):
        log_prob, targets, mask = ctx.saved_tensors
        grad = torch.exp(log_prob)
        grad.scatter_add_(-1, targets.clamp(min=0).unsqueeze(-1),
                          -torch.ones_like(targets, dtype=grad.dtype).unsqueeze(-1))
        grad = grad * mask.unsqueeze(-1).to(grad.dtype) / ctx.num_valid
        return grad * grad_output, None, None


@recorded('cross_entropy')
def cross_entropy(logits, targets, pad_index):
    """Mean negative log-likelihood over positions whose target is not padding.

    Args:
        logits (torch.Tensor): (N, V)
        targets (torch.Tensor): (N,) long
        pad_index (int): target value excluded from the mean

    Returns:
        torch.Tensor: scalar

    """
    targets = torch.as_tensor(targets, dtype=torch.long)
    if logits.dim() != 2 or targets.shape != logits.shape[:1]:
        raise DimensionError('cross_entropy expects (N, V) logits and (N,) targets, got {} and {}'.format(
            tuple(logits.shape), tuple(targets.shape)))
    mask = targets != pad_index
    if not bool(mask.any()):
        raise ValueError('cross_entropy: every target is padding')
    valid_targets = targets[mask]
    if int(valid_targets.min()) < 0 or int(valid_targets.max()) >= logits.shape[-1]:
        raise DimensionError('cross_entropy target out of vocabulary range [0, {})'.format(logits.shape[-1]))
    return CrossEntropyFunction.apply(logits, targets, mask)


class SymmetricKLFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, p_logits, q_logits, mask):
        log_p = p_logits - torch.logsumexp(p_logits, dim=-1, keepdim=True)
        log_q = q_logits - torch.logsumexp(q_logits, dim=-1, keepdim=True)
        p, q = torch.exp(log_p), torch.exp(log_q)
        diff = log_p - log_q
        per_row = 0.5 * ((p * diff).sum(-1) - (q * diff).sum(-1))
        weight = mask.to(p_logits.dtype)
        num_valid = weight.sum()
        ctx.save_for_backward(p, q, diff, weight)
        ctx.num_valid = num_valid
        return (per_row * weight).sum() / num_valid

    @staticmethod
    def backward(ctx, grad_output):
        p, q, diff, weight = ctx.saved_tensors
        row_scale = (weight / ctx.num_valid * grad_output).unsqueeze(-1)
        grad_p = 0.5 * (p * (diff - (p * diff).sum(-1, keepdim=True)) + p - q)
        grad_q = 0.5 * (q * (-diff + (q * diff).sum(-1, keepdim=True)) + q - p)
        return grad_p * row_scale, grad_q * row_scale, None


@recorded('kl_divergence')
def kl_divergence(p_logits, q_logits, mask=None):
    """Symmetric KL, (KL(p||q) + KL(q||p)) / 2, averaged over masked rows.

    Both inputs are unnormalised logits over the last dim. ``mask`` selects
    the rows (all leading positions) that contribute; default is all rows.
    """
    if p_logits.shape != q_logits.shape:
        raise DimensionError('kl_divergence shapes differ: {} vs {}'.format(
            tuple(p_logits.shape), tuple(q_logits.shape)))
    if mask is None:
        mask = torch.ones(p_logits.shape[:-1], dtype=torch.bool)
    mask = torch.as_tensor(mask, dtype=torch.bool)
    if mask.shape != p_logits.shape[:-1]:
        raise DimensionError('kl_divergence mask must be {}'.format(tuple(p_logits.shape[:-1])))
    if not bool(mask.any()):
        raise ValueError('kl_divergence: empty mask')
    return SymmetricKLFunction.apply(p_logits, q_logits, mask)


class AlignmentCrossEntropyFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, attn, target, row_mask):
        smoothed = attn * (1.0 - ALIGNMENT_EPS) + ALIGNMENT_EPS
        weight = row_mask.to(attn.dtype)
        num_rows = weight.sum()
        per_row = -(target * torch.log(smoothed)).sum(-1)
        ctx.save_for_backward(smoothed, target, weight)
        ctx.num_rows = num_rows
        return (per_row * weight).sum() / num_rows

    @staticmethod
    def backward(ctx, grad_output):
        smoothed, target, weight = ctx.saved_tensors
        grad = -target / smoothed * (1.0 - ALIGNMENT_EPS)
        grad = grad * (weight / ctx.num_rows * grad_output).unsqueeze(-1)
        return grad, None, None


@recorded('alignment_cross_entropy')
def alignment_cross_entropy(attn, target, row_mask):
    """Row-wise cross-entropy between attention rows and target distributions.

    Args:
        attn (torch.Tensor): (..., S) attention probabilities
        target (torch.Tensor): (..., S) row-normalised alignment targets
        row_mask (torch.Tensor): (...,) bool, rows that contribute

    Returns:
        torch.Tensor: scalar mean over the selected rows

    """
    if attn.shape != target.shape or row_mask.shape != attn.shape[:-1]:
        raise DimensionError('alignment_cross_entropy shapes: attn {}, target {}, mask {}'.format(
            tuple(attn.shape), tuple(target.shape), tuple(row_mask.shape)))
    if not bool(row_mask.any()):
        raise ValueError('alignment_cross_entropy: no aligned rows')
    return AlignmentCrossEntropyFunction.apply(attn, target.to(attn.dtype), row_mask.to(torch.bool))
