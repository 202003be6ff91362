import math

import torch

from .tape import recorded, DimensionError
from .linalg import _sum_to_shape


def _check_trailing(a, b, op_name):
    if b.dim() > a.dim() or tuple(a.shape[a.dim() - b.dim():]) != tuple(b.shape):
        raise DimensionError('{}: shape {} does not match {} or its trailing dims'.format(
            op_name, tuple(b.shape), tuple(a.shape)))


class AddFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.b_shape = b.shape
        return a + b

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output, _sum_to_shape(grad_output, ctx.b_shape)


@recorded('add')
def add(a, b):
    """a + b, where b has the shape of a or of its trailing dims (bias)."""
    _check_trailing(a, b, 'add')
    return AddFunction.apply(a, b)


class MulFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx.save_for_backward(a, b)
        return a * b

    @staticmethod
    def backward(ctx, grad_output):
        a, b = ctx.saved_tensors
        grad_a = grad_b = None
        if ctx.needs_input_grad[0]:
            grad_a = grad_output * b
        if ctx.needs_input_grad[1]:
            grad_b = _sum_to_shape(grad_output * a, b.shape)
        return grad_a, grad_b


@recorded('mul')
def mul(a, b):
    """Elementwise a * b, where b has the shape of a or of its trailing dims."""
    _check_trailing(a, b, 'mul')
    return MulFunction.apply(a, b)


class ScaleFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, s):
        ctx.save_for_backward(x, s)
        return x * s.reshape(())

    @staticmethod
    def backward(ctx, grad_output):
        x, s = ctx.saved_tensors
        grad_x = grad_s = None
        if ctx.needs_input_grad[0]:
            grad_x = grad_output * s.reshape(())
        if ctx.needs_input_grad[1]:
            grad_s = (grad_output * x).sum().reshape(s.shape)
        return grad_x, grad_s


@recorded('scale')
def scale(x, s):
    """Multiply by a scalar: a python number or a one-element tensor."""
    if not isinstance(s, torch.Tensor):
        s = torch.tensor(float(s), dtype=x.dtype)
    if s.numel() != 1:
        raise DimensionError('scale expects a scalar, got shape {}'.format(tuple(s.shape)))
    return ScaleFunction.apply(x, s)


class ConcatFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, *tensors):
        ctx.sizes = [t.shape[-1] for t in tensors]
        return torch.cat(tensors, dim=-1)

    @staticmethod
    def backward(ctx, grad_output):
        return tuple(torch.split(grad_output, ctx.sizes, dim=-1))


@recorded('concat_lastdim')
def concat_lastdim(tensors):
    tensors = list(tensors)
    if not tensors:
        raise DimensionError('concat_lastdim needs at least one tensor')
    lead = tensors[0].shape[:-1]
    for t in tensors[1:]:
        if t.shape[:-1] != lead:
            raise DimensionError('concat_lastdim leading dims differ: {} vs {}'.format(
                tuple(lead), tuple(t.shape[:-1])))
    return ConcatFunction.apply(*tensors)


class OuterSumFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, a, b):
        return a.unsqueeze(-2) + b.unsqueeze(-3)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output.sum(-2), grad_output.sum(-3)


@recorded('outer_sum')
def outer_sum(a, b):
    """Pairwise sum: out[..., i, j, :] = a[..., i, :] + b[..., j, :]."""
    if a.dim() < 2 or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-1]:
        raise DimensionError('outer_sum shapes {} and {} are incompatible'.format(
            tuple(a.shape), tuple(b.shape)))
    return OuterSumFunction.apply(a, b)


class GELUFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return 0.5 * x * (1.0 + torch.erf(x / math.sqrt(2.0)))

    @staticmethod
    def backward(ctx, grad_output):
        x, = ctx.saved_tensors
        cdf = 0.5 * (1.0 + torch.erf(x / math.sqrt(2.0)))
        pdf = torch.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        return grad_output * (cdf + x * pdf)


@recorded('gelu')
def gelu(x):
    """Exact (erf) GELU."""
    return GELUFunction.apply(x)


class ReLUFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        mask = x > 0
        ctx.save_for_backward(mask)
        return x * mask

    @staticmethod
    def backward(ctx, grad_output):
        mask, = ctx.saved_tensors
        return grad_output * mask


@recorded('relu')
def relu(x):
    return ReLUFunction.apply(x)


class SoftmaxFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        shifted = x - x.max(dim=-1, keepdim=True)[0]
        exp = torch.exp(shifted)
        y = exp / exp.sum(dim=-1, keepdim=True)
        ctx.save_for_backward(y)
        return y

    @staticmethod
    def backward(ctx, grad_output):
        y, = ctx.saved_tensors
        return y * (grad_output - (grad_output * y).sum(dim=-1, keepdim=True))


@recorded('softmax_lastdim')
def softmax_lastdim(x):
    if x.dim() == 0 or x.shape[-1] < 1:
        raise DimensionError('softmax_lastdim needs a non-empty last dimension')
    return SoftmaxFunction.apply(x)


class LayerNormFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, weight, bias, eps):
        mean = x.mean(dim=-1, keepdim=True)
        var = ((x - mean) ** 2).mean(dim=-1, keepdim=True)
        rstd = 1.0 / torch.sqrt(var + eps)
        x_hat = (x - mean) * rstd
        ctx.save_for_backward(x_hat, rstd, weight)
        return x_hat * weight + bias

    @staticmethod
    def backward(ctx, grad_output):
        x_hat, rstd, weight = ctx.saved_tensors
        n = x_hat.shape[-1]
        grad_x_hat = grad_output * weight
        grad_x = rstd / n * (n * grad_x_hat
                             - grad_x_hat.sum(dim=-1, keepdim=True)
                             - x_hat * (grad_x_hat * x_hat).sum(dim=-1, keepdim=True))
        grad_weight = _sum_to_shape(grad_output * x_hat, weight.shape)
        grad_bias = _sum_to_shape(grad_output, weight.shape)
        return grad_x, grad_weight, grad_bias, None


@recorded('layernorm')
def layernorm(x, weight, bias, eps=1e-5):
    """Normalize over the last dim, then apply the affine (weight, bias)."""
    if weight.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise DimensionError('layernorm affine shape must be ({},)'.format(x.shape[-1]))
    return LayerNormFunction.apply(x, weight, bias, eps)


class DropoutFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, keep, scale_factor):
        ctx.save_for_backward(keep)
        ctx.scale_factor = scale_factor
        return x * keep * scale_factor

    @staticmethod
    def backward(ctx, grad_output):
        keep, = ctx.saved_tensors
        return grad_output * keep * ctx.scale_factor, None, None


@recorded('dropout')
def _dropout(x, p, seed):
    generator = torch.Generator()
    generator.manual_seed(int(seed))
    keep = (torch.rand(x.shape, generator=generator, dtype=torch.float64) >= p).to(x.dtype)
    return DropoutFunction.apply(x, keep, 1.0 / (1.0 - p))


def dropout(x, p, seed):
    """Inverted dropout with a mask drawn from an explicitly seeded generator.

    The same (shape, p, seed) always yields the same mask; ``p == 0`` returns
    ``x`` itself.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError('dropout rate must be in [0, 1), got {}'.format(p))
    if p == 0.0:
        return x
    return _dropout(x, p, seed)


class MaskedFillFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, mask, value):
        ctx.save_for_backward(mask)
        return x.masked_fill(mask, value)

    @staticmethod
    def backward(ctx, grad_output):
        mask, = ctx.saved_tensors
        return grad_output.masked_fill(mask, 0.0), None, None


@recorded('masked_fill')
def masked_fill(x, mask, value):
    """Replace entries where ``mask`` is true by a constant."""
    mask = mask.to(torch.bool).expand_as(x)
    return MaskedFillFunction.apply(x, mask, float(value))
