import torch

from .tape import recorded, DimensionError


def _sum_to_shape(grad, shape):
    """Reduce a gradient over leading dimensions down to ``shape``."""
    lead = grad.dim() - len(shape)
    if lead > 0:
        grad = grad.sum(dim=tuple(range(lead)))
    return grad


class MatMulFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a, b)
        return torch.matmul(a, b)

    @staticmethod
    def backward(ctx, grad_output):
        a, b = ctx.saved_tensors
        grad_a = grad_b = None
        if ctx.needs_input_grad[0]:
            grad_a = torch.matmul(grad_output, b.transpose(-1, -2))
        if ctx.needs_input_grad[1]:
            grad_b = torch.matmul(a.transpose(-1, -2), grad_output)
            grad_b = _sum_to_shape(grad_b, b.shape)
        return grad_a, grad_b


@recorded('matmul')
def matmul(a, b):
    """Matrix product.

    Args:
        a (torch.Tensor): (..., n, k)
        b (torch.Tensor): (k, m) shared across the leading dims of ``a``,
            or (..., k, m) with exactly the leading dims of ``a``.

    Returns:
        torch.Tensor: (..., n, m)

    """
    if a.dim() < 2 or b.dim() < 2:
        raise DimensionError('matmul expects matrices, got {} and {}'.format(tuple(a.shape), tuple(b.shape)))
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError('matmul inner dimensions differ: {} vs {}'.format(tuple(a.shape), tuple(b.shape)))
    if b.dim() > 2 and a.shape[:-2] != b.shape[:-2]:
        raise DimensionError('batched matmul needs equal leading dims: {} vs {}'.format(
            tuple(a.shape), tuple(b.shape)))
    return MatMulFunction.apply(a, b)


class ReshapeFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, shape):
        ctx.in_shape = x.shape
        return x.reshape(shape).clone()

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output.reshape(ctx.in_shape), None


@recorded('reshape')
def reshape(x, shape):
    shape = tuple(shape)
    known = 1
    for s in shape:
        if s != -1:
            known *= s
    numel = x.numel()
    if (-1 not in shape and known != numel) or (-1 in shape and (known == 0 or numel % known != 0)):
        raise DimensionError('cannot reshape {} into {}'.format(tuple(x.shape), shape))
    return ReshapeFunction.apply(x, shape)


class PermuteFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, dims):
        ctx.dims = dims
        return x.permute(*dims).contiguous()

    @staticmethod
    def backward(ctx, grad_output):
        inverse = [0] * len(ctx.dims)
        for i, d in enumerate(ctx.dims):
            inverse[d] = i
        return grad_output.permute(*inverse).contiguous(), None


@recorded('permute')
def permute(x, dims):
    dims = tuple(int(d) % x.dim() for d in dims)
    if sorted(dims) != list(range(x.dim())):
        raise DimensionError('invalid permutation {} for rank {}'.format(dims, x.dim()))
    return PermuteFunction.apply(x, dims)


def transpose(x, dim0=-2, dim1=-1):
    dims = list(range(x.dim()))
    dim0, dim1 = dim0 % x.dim(), dim1 % x.dim()
    dims[dim0], dims[dim1] = dims[dim1], dims[dim0]
    return permute(x, dims)
