"""Parameterised building blocks running on retro3d.ops."""
import torch
from torch import nn

from retro3d import ops
from common.nn.init import xavier_uniform


class Linear(nn.Module):
    """y = x W + b with W stored as (in_features, out_features)."""

    def __init__(self, in_features, out_features, bias=True):
        super(Linear, self).__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = nn.Parameter(torch.empty(in_features, out_features, dtype=torch.float64))
        if bias:
            self.bias = nn.Parameter(torch.zeros(out_features, dtype=torch.float64))
        else:
            self.register_parameter('bias', None)
        self.reset_parameters()

    def reset_parameters(self):
        xavier_uniform(self)

    def forward(self, x):
        y = ops.matmul(x, self.weight)
        if self.bias is not None:
            y = ops.add(y, self.bias)
        return y

    def extra_repr(self):
        return 'in_features={}, out_features={}, bias={}'.format(
            self.in_features, self.out_features, self.bias is not None)


class LayerNorm(nn.Module):
    def __init__(self, dim, eps=1e-5):
        super(LayerNorm, self).__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(dim, dtype=torch.float64))
        self.bias = nn.Parameter(torch.zeros(dim, dtype=torch.float64))

    def forward(self, x):
        return ops.layernorm(x, self.weight, self.bias, self.eps)


class SeededDropout(nn.Module):
    """Dropout whose mask seed comes from the active ``ops.DropoutScope``.

    ``site`` identifies the call site; the owning model numbers its dropout
    modules in registration order. Outside a scope, or in eval mode, this is
    the identity.
    """

    def __init__(self, p):
        super(SeededDropout, self).__init__()
        self.p = float(p)
        self.site = 0

    def forward(self, x):
        if not self.training or self.p == 0.0:
            return x
        scope = ops.current_scope()
        if scope is None:
            return x
        return ops.dropout(x, self.p, scope.seed_for(self.site))

    def extra_repr(self):
        return 'p={}, site={}'.format(self.p, self.site)


def assign_dropout_sites(module):
    """Number every SeededDropout of ``module`` in registration order."""
    count = 0
    for m in module.modules():
        if isinstance(m, SeededDropout):
            m.site = count
            count += 1
    return count


_ACTIVATIONS = {
    'relu': ops.relu,
    'gelu': ops.gelu,
}


class MLP(nn.Module):
    """Two linear layers with an activation in between."""

    def __init__(self, in_channels, hidden_channels, out_channels, activation='relu', dropout=0.0):
        super(MLP, self).__init__()
        if activation not in _ACTIVATIONS:
            raise ValueError('Unsupported activation: {}'.format(activation))
        self.fc1 = Linear(in_channels, hidden_channels)
        self.fc2 = Linear(hidden_channels, out_channels)
        self.activation = activation
        self.dropout = SeededDropout(dropout)

    def forward(self, x):
        x = _ACTIVATIONS[self.activation](self.fc1(x))
        x = self.dropout(x)
        return self.fc2(x)
