"""Token, 3D position and fusion embeddings of the encoder input."""
import math

import numpy as np
import torch
from torch import nn

from common.nn.init import embedding_normal
from retro3d import ops
from retro3d.chem.graph import ELEMENTS
from retro3d.conformer.features import NUM_FREQUENCIES
from .layers import MLP

# atom types: atomic number, offset by len(ELEMENTS) for aromatic atoms
NUM_ATOM_TYPES = 2 * len(ELEMENTS)
GEO_FEATURE_DIM = 8 * NUM_FREQUENCIES


def atom_type_index(atom):
    return atom.atomic_number + (len(ELEMENTS) if atom.aromatic else 0)


def sinusoidal_pe(length, dim):
    """Fixed sin/cos position table.

    pe[pos, 2i] = sin(pos / 10000^(2i/dim)), pe[pos, 2i+1] = cos(same).

    Returns:
        torch.Tensor: (length, dim) float64

    """
    if dim % 2 != 0:
        raise ValueError('Sinusoidal position embedding needs an even dim, got {}'.format(dim))
    position = np.arange(length, dtype=np.float64)[:, None]
    div_term = np.exp(np.arange(0, dim, 2, dtype=np.float64) * (-math.log(10000.0) / dim))
    pe = np.zeros((length, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(position * div_term)
    pe[:, 1::2] = np.cos(position * div_term)
    return torch.from_numpy(pe)


class ComENetLite(nn.Module):
    """Per-atom 3D embedding by message passing over bonded neighbours.

    Each round computes messages f([v_j, lift(d, theta, phi, tau)]) for every
    ordered bonded pair (i, j), sums them per atom i and applies a residual
    update v_i += g([v_i, m_i]). Atoms without bonded neighbours keep their
    type embedding. There is no pooling; the output is per atom.
    """

    def __init__(self, dim, num_layers=3, geo_dim=GEO_FEATURE_DIM, num_atom_types=NUM_ATOM_TYPES):
        super(ComENetLite, self).__init__()
        self.dim = dim
        self.num_layers = num_layers
        self.atom_embedding = nn.Parameter(torch.empty(num_atom_types, dim, dtype=torch.float64))
        self.message_mlps = nn.ModuleList([MLP(dim + geo_dim, dim, dim) for _ in range(num_layers)])
        self.update_mlps = nn.ModuleList([MLP(2 * dim, dim, dim) for _ in range(num_layers)])
        self.reset_parameters()

    def reset_parameters(self):
        embedding_normal(self.atom_embedding)

    def forward(self, atom_types, pairs, geo):
        """

        Args:
            atom_types (torch.Tensor): (N,) long, atoms of the whole batch
            pairs (torch.Tensor): (E, 2) long, ordered bonded pairs (i, j)
            geo (torch.Tensor): (E, geo_dim) lifted geometric features

        Returns:
            torch.Tensor: (N, dim)

        """
        num_atoms = atom_types.shape[0]
        if pairs.shape[0] != geo.shape[0]:
            raise ops.DimensionError('{} bonded pairs but {} feature rows'.format(pairs.shape[0], geo.shape[0]))
        v = ops.embedding_lookup(self.atom_embedding, atom_types)
        isolated = torch.ones(num_atoms, dtype=torch.bool)
        isolated[pairs[:, 0]] = False
        isolated = isolated.unsqueeze(-1)
        for message_mlp, update_mlp in zip(self.message_mlps, self.update_mlps):
            neighbour = ops.embedding_lookup(v, pairs[:, 1])
            messages = message_mlp(ops.concat_lastdim([neighbour, geo]))
            aggregated = ops.index_add(messages, pairs[:, 0], num_atoms)
            update = update_mlp(ops.concat_lastdim([v, aggregated]))
            v = ops.add(v, ops.masked_fill(update, isolated, 0.0))
        return v


def pad_to_tokens(p3d, token_atom):
    """Scatter per-atom rows to token positions; non-atom tokens get zeros.

    Args:
        p3d (torch.Tensor): (N, D) atom embeddings
        token_atom (torch.Tensor): (..., M) long, atom row per token or -1

    Returns:
        torch.Tensor: (..., M, D)

    """
    if p3d.shape[0] == 0:
        if bool((token_atom >= 0).any()):
            raise ops.DimensionError('atom tokens bound but no atom embeddings given')
        return torch.zeros(tuple(token_atom.shape) + (p3d.shape[-1],), dtype=p3d.dtype)
    return ops.embedding_lookup(p3d, token_atom)


def fuse(padded_p3d, token_emb, lambda1, lambda2):
    """lambda1 * padded_p3d + lambda2 * token_emb."""
    if padded_p3d.shape != token_emb.shape:
        raise ops.DimensionError('fuse shapes differ: {} vs {}'.format(
            tuple(padded_p3d.shape), tuple(token_emb.shape)))
    return ops.add(ops.scale(padded_p3d, lambda1), ops.scale(token_emb, lambda2))


class AtomAlignFusion(nn.Module):
    def __init__(self, init_lambda1=1.0, init_lambda2=1.0):
        super(AtomAlignFusion, self).__init__()
        self.lambda1 = nn.Parameter(torch.tensor([init_lambda1], dtype=torch.float64))
        self.lambda2 = nn.Parameter(torch.tensor([init_lambda2], dtype=torch.float64))

    def forward(self, padded_p3d, token_emb):
        return fuse(padded_p3d, token_emb, self.lambda1, self.lambda2)
