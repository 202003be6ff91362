"""Distance-weighted multi-head attention.

The encoder splits its heads into normal heads and spatial heads (the last
``spatial_heads`` heads). A spatial head multiplies its scaled dot-product
logits by a learned per-pair weight Phi derived from 3D distances:

    psi_k(i, j) = gaussian_basis(d_ij; gamma[b_ij], beta[b_ij], mu_k, sigma_k)
    Phi(i, j)   = W2 GELU(W1 psi(i, j))          (K channels)

The K channels are averaged in contiguous blocks to one scalar per spatial
head. After every encoder layer but the last, Phi is refined with a residual
pairwise update from the new hidden states.
"""
import math

import torch
from torch import nn

from retro3d import ops
from retro3d.chem.graph import NUM_BOND_TYPES
from .layers import Linear, SeededDropout

MASK_VALUE = -1e9


class GaussianKernel(nn.Module):
    """Gaussian basis over distances with per-bond-type affine transform.

    Bond type 0 is the "no bond" row used by non-bonded atom pairs.
    """

    def __init__(self, num_kernels, num_bond_types=NUM_BOND_TYPES, max_distance=10.0, negate=True):
        super(GaussianKernel, self).__init__()
        self.num_kernels = num_kernels
        self.negate = negate
        self.mu = nn.Parameter(torch.linspace(0.0, max_distance, num_kernels, dtype=torch.float64))
        self.sigma = nn.Parameter(torch.ones(num_kernels, dtype=torch.float64))
        self.gamma = nn.Parameter(torch.ones(num_bond_types, 1, dtype=torch.float64))
        self.beta = nn.Parameter(torch.zeros(num_bond_types, 1, dtype=torch.float64))

    def forward(self, dist, bond_type):
        """

        Args:
            dist (torch.Tensor): (..., M, M) distances
            bond_type (torch.Tensor): (..., M, M) long bond-type index

        Returns:
            torch.Tensor: (..., M, M, K)

        """
        shape = tuple(dist.shape)
        gamma = ops.reshape(ops.embedding_lookup(self.gamma, bond_type), shape)
        beta = ops.reshape(ops.embedding_lookup(self.beta, bond_type), shape)
        return ops.gaussian_basis(dist, gamma, beta, self.mu, self.sigma, negate=self.negate)


class DistanceWeight(nn.Module):
    """Phi^0 = W2(GELU(W1(psi))), zero wherever a token of the pair is not an atom."""

    def __init__(self, num_kernels, negate_gaussian=True):
        super(DistanceWeight, self).__init__()
        self.kernel = GaussianKernel(num_kernels, negate=negate_gaussian)
        self.fc1 = Linear(num_kernels, num_kernels)
        self.fc2 = Linear(num_kernels, num_kernels)

    def forward(self, dist, bond_type, pair_mask):
        psi = self.kernel(dist, bond_type)
        phi = self.fc2(ops.gelu(self.fc1(psi)))
        return mask_pairs(phi, pair_mask)


def mask_pairs(phi, pair_mask):
    """Zero Phi at pairs where ``pair_mask`` (..., M, M) is false."""
    return ops.masked_fill(phi, (~pair_mask).unsqueeze(-1), 0.0)


def head_weights(phi, spatial_heads):
    """Block-average K channels to one weight per spatial head: (..., M, M, H_s)."""
    num_kernels = phi.shape[-1]
    if num_kernels % spatial_heads != 0:
        raise ops.DimensionError('{} kernels cannot be split over {} spatial heads'.format(
            num_kernels, spatial_heads))
    blocks = ops.reshape(phi, tuple(phi.shape[:-1]) + (spatial_heads, num_kernels // spatial_heads))
    return ops.mean(blocks, dim=-1)


class WeightRefine(nn.Module):
    """Phi^{l+1}(i, j) = Phi^l(i, j) + FC([h_i; h_j]).

    The FC over the concatenated pair is split into its h_i and h_j halves and
    combined with a pairwise sum.
    """

    def __init__(self, dim, num_kernels):
        super(WeightRefine, self).__init__()
        self.fc_i = Linear(dim, num_kernels)
        self.fc_j = Linear(dim, num_kernels, bias=False)

    def forward(self, phi, h, pair_mask=None):
        update = ops.outer_sum(self.fc_i(h), self.fc_j(h))
        phi = ops.add(phi, update)
        if pair_mask is not None:
            phi = mask_pairs(phi, pair_mask)
        return phi


class MultiHeadAttention(nn.Module):
    def __init__(self, dim, num_heads, spatial_heads=0, dropout=0.0):
        super(MultiHeadAttention, self).__init__()
        if dim % num_heads != 0:
            raise ValueError('dim {} is not divisible by {} heads'.format(dim, num_heads))
        if not 0 <= spatial_heads < num_heads:
            raise ValueError('spatial heads must be in [0, {}), got {}'.format(num_heads, spatial_heads))
        self.dim = dim
        self.num_heads = num_heads
        self.spatial_heads = spatial_heads
        self.head_dim = dim // num_heads
        self.q_proj = Linear(dim, dim)
        self.k_proj = Linear(dim, dim)
        self.v_proj = Linear(dim, dim)
        self.out_proj = Linear(dim, dim)
        self.dropout = SeededDropout(dropout)

    def _split(self, x):
        b, n = x.shape[0], x.shape[1]
        return ops.permute(ops.reshape(x, (b, n, self.num_heads, self.head_dim)), (0, 2, 1, 3))

    def forward(self, query, key, mask=None, spatial_weight=None):
        """

        Args:
            query (torch.Tensor): (B, Lq, D)
            key (torch.Tensor): (B, Lk, D), also used as value
            mask (torch.Tensor, optional): bool, True = blocked, broadcastable
                to (B, H, Lq, Lk)
            spatial_weight (torch.Tensor, optional): (B, Lq, Lk, H_s) weights
                of the spatial heads; without it every head is a normal head

        Returns:
            out (torch.Tensor): (B, Lq, D)
            attn (torch.Tensor): (B, H, Lq, Lk) attention probabilities

        """
        b, lq = query.shape[0], query.shape[1]
        q = self._split(self.q_proj(query))
        k = ops.permute(self._split(self.k_proj(key)), (0, 1, 3, 2))
        v = self._split(self.v_proj(key))

        scores = ops.scale(ops.matmul(q, k), 1.0 / math.sqrt(self.head_dim))
        if spatial_weight is not None and self.spatial_heads > 0:
            if spatial_weight.shape[-1] != self.spatial_heads:
                raise ops.DimensionError('expected {} spatial weights, got {}'.format(
                    self.spatial_heads, spatial_weight.shape[-1]))
            ones = torch.ones(tuple(spatial_weight.shape[:-1]) + (self.num_heads - self.spatial_heads,),
                              dtype=spatial_weight.dtype)
            factor = ops.permute(ops.concat_lastdim([ones, spatial_weight]), (0, 3, 1, 2))
            scores = ops.mul(scores, factor)
        if mask is not None:
            scores = ops.masked_fill(scores, mask, MASK_VALUE)
        attn = ops.softmax_lastdim(scores)
        context = ops.matmul(self.dropout(attn), v)
        context = ops.reshape(ops.permute(context, (0, 2, 1, 3)), (b, lq, self.dim))
        return self.out_proj(context), attn
