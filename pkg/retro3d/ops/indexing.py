import torch

from .tape import recorded, DimensionError


class EmbeddingLookupFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, weight, index):
        valid = index >= 0
        safe_index = index.clamp(min=0)
        out = weight[safe_index] * valid.unsqueeze(-1).to(weight.dtype)
        ctx.save_for_backward(index)
        ctx.num_rows = weight.shape[0]
        return out

    @staticmethod
    def backward(ctx, grad_output):
        index, = ctx.saved_tensors
        flat_index = index.reshape(-1)
        flat_grad = grad_output.reshape(-1, grad_output.shape[-1])
        valid = flat_index >= 0
        grad_weight = grad_output.new_zeros((ctx.num_rows, grad_output.shape[-1]))
        grad_weight.index_add_(0, flat_index[valid], flat_grad[valid])
        return grad_weight, None


@recorded('embedding_lookup')
def embedding_lookup(weight, index):
    """Gather rows of ``weight``; index -1 yields an all-zero row.

    Args:
        weight (torch.Tensor): (num_rows, dim)
        index (torch.Tensor): long tensor of any shape, values in [-1, num_rows)

    Returns:
        torch.Tensor: index.shape + (dim,)

    """
    if weight.dim() != 2:
        raise DimensionError('embedding_lookup expects a 2D table, got {}'.format(tuple(weight.shape)))
    index = torch.as_tensor(index, dtype=torch.long)
    if index.numel() > 0 and (int(index.max()) >= weight.shape[0] or int(index.min()) < -1):
        raise DimensionError('embedding_lookup index out of range [-1, {})'.format(weight.shape[0]))
    return EmbeddingLookupFunction.apply(weight, index)


class IndexAddFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, source, index, size):
        ctx.save_for_backward(index)
        out = source.new_zeros((size,) + tuple(source.shape[1:]))
        out.index_add_(0, index, source)
        return out

    @staticmethod
    def backward(ctx, grad_output):
        index, = ctx.saved_tensors
        return grad_output[index], None, None


@recorded('index_add')
def index_add(source, index, size):
    """Scatter-sum rows of ``source`` into ``size`` buckets given by ``index``."""
    index = torch.as_tensor(index, dtype=torch.long)
    if index.dim() != 1 or index.shape[0] != source.shape[0]:
        raise DimensionError('index_add index must be ({},), got {}'.format(source.shape[0], tuple(index.shape)))
    if index.numel() > 0 and (int(index.max()) >= size or int(index.min()) < 0):
        raise DimensionError('index_add index out of range [0, {})'.format(size))
    return IndexAddFunction.apply(source, index, int(size))
