import torch

from .tape import recorded


class SumFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, dim, keepdim, divisor):
        ctx.in_shape = x.shape
        ctx.dim = dim
        ctx.keepdim = keepdim
        ctx.divisor = divisor
        if dim is None:
            out = x.sum()
        else:
            out = x.sum(dim=dim, keepdim=keepdim)
        return out / divisor

    @staticmethod
    def backward(ctx, grad_output):
        grad = grad_output / ctx.divisor
        if ctx.dim is not None and not ctx.keepdim:
            grad = grad.unsqueeze(ctx.dim)
        return grad.expand(ctx.in_shape).clone(), None, None, None


def _normalize_dim(x, dim):
    if dim is None:
        return None
    return dim % x.dim()


@recorded('sum')
def sum(x, dim=None, keepdim=False):  # noqa: A001
    return SumFunction.apply(x, _normalize_dim(x, dim), keepdim, 1.0)


@recorded('mean')
def mean(x, dim=None, keepdim=False):
    dim = _normalize_dim(x, dim)
    divisor = float(x.numel() if dim is None else x.shape[dim])
    return SumFunction.apply(x, dim, keepdim, divisor)
