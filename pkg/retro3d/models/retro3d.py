"""Retro3D: product SMILES plus conformer in, reactant SMILES out.

Encoder input is the Atom-align Fusion of token embeddings and per-atom 3D
embeddings. Encoder self-attention uses distance-weighted spatial heads; the
decoder is a standard causal transformer decoder whose final-layer
cross-attention is guided towards the SMILES alignment map during training.

Batch layout (B examples, M source tokens, T target positions, N atoms):
    src_ids (B, M), tgt_in (B, T), tgt_out (B, T): long token ids
    token_atom (B, M): long, batch-global atom row of each source token or -1
    atom_types (N,), pairs (E, 2), geo (E, 128): atoms and bonded pairs
    dist (B, M, M), bond_type (B, M, M), pair_mask (B, M, M): token-pair geometry
    sam (B, T, M): float alignment of output positions to source tokens
"""
from collections import OrderedDict

import torch
from torch import nn

from common.nn.init import embedding_normal
from retro3d import ops
from .attention import DistanceWeight, WeightRefine, head_weights
from .embedding import ComENetLite, AtomAlignFusion, pad_to_tokens, sinusoidal_pe
from .layers import Linear, SeededDropout, assign_dropout_sites
from .loss import Retro3DLoss
from .metric import TokenAccuracy
from .transformer import EncoderLayer, DecoderLayer


class Retro3D(nn.Module):
    def __init__(self,
                 vocab_size,
                 dim=512,
                 num_encoder_layers=6,
                 num_decoder_layers=6,
                 num_heads=8,
                 spatial_heads=4,
                 ffn_dim=2048,
                 num_kernels=512,
                 dropout=0.1,
                 attention_dropout=0.1,
                 embedding_dropout=0.1,
                 max_length=512,
                 comenet_layers=3,
                 use_fusion=True,
                 use_distance_attention=True,
                 refine=True,
                 negate_gaussian=True,
                 spatial_cutoff=0.0,
                 pad_index=0,
                 bos_index=1,
                 eos_index=2,
                 ):
        super(Retro3D, self).__init__()
        if dim % num_heads != 0:
            raise ValueError('dim {} is not divisible by {} heads'.format(dim, num_heads))
        if use_distance_attention and num_kernels % spatial_heads != 0:
            raise ValueError('{} kernels cannot be split over {} spatial heads'.format(num_kernels, spatial_heads))

        self.vocab_size = vocab_size
        self.dim = dim
        self.num_heads = num_heads
        self.spatial_heads = spatial_heads
        self.max_length = max_length
        self.use_fusion = use_fusion
        self.use_distance_attention = use_distance_attention
        self.refine = refine
        self.spatial_cutoff = spatial_cutoff
        self.pad_index = pad_index
        self.bos_index = bos_index
        self.eos_index = eos_index

        # shared between source and target
        self.embedding = nn.Parameter(torch.empty(vocab_size, dim, dtype=torch.float64))
        self.register_buffer('position_table', sinusoidal_pe(max_length, dim), persistent=False)
        self.embedding_dropout = SeededDropout(embedding_dropout)

        self.comenet = ComENetLite(dim, comenet_layers)
        self.fusion = AtomAlignFusion()
        self.distance_weight = DistanceWeight(num_kernels, negate_gaussian=negate_gaussian)
        self.refine_layers = nn.ModuleList([WeightRefine(dim, num_kernels)
                                            for _ in range(max(num_encoder_layers - 1, 0))])

        self.encoder_layers = nn.ModuleList([
            EncoderLayer(dim, num_heads, ffn_dim, spatial_heads, dropout, attention_dropout)
            for _ in range(num_encoder_layers)])
        self.decoder_layers = nn.ModuleList([
            DecoderLayer(dim, num_heads, ffn_dim, dropout, attention_dropout)
            for _ in range(num_decoder_layers)])
        self.generator = Linear(dim, vocab_size)

        self.num_dropout_sites = assign_dropout_sites(self)
        self.reset_parameters()

    def reset_parameters(self):
        embedding_normal(self.embedding)

    def parameter_groups(self):
        """Parameters grouped by their top-level module name."""
        groups = OrderedDict()
        for name, param in self.named_parameters():
            groups.setdefault(name.split('.')[0], []).append((name, param))
        return groups

    # ---------------------------------------------------------------------------- #
    # Embedding
    # ---------------------------------------------------------------------------- #
    def _embed(self, ids, extra=None):
        length = ids.shape[1]
        if length > self.max_length:
            raise ValueError('sequence of {} tokens exceeds max length {}'.format(length, self.max_length))
        x = ops.embedding_lookup(self.embedding, ids)
        if extra is not None:
            x = extra(x)
        x = ops.add(x, self.position_table[:length])
        return self.embedding_dropout(x)

    def _fuse_3d(self, data_batch):
        def fuse(token_emb):
            p3d = self.comenet(data_batch['atom_types'], data_batch['pairs'], data_batch['geo'])
            padded = pad_to_tokens(p3d, data_batch['token_atom'])
            return self.fusion(padded, token_emb)
        return fuse

    # ---------------------------------------------------------------------------- #
    # Encoder
    # ---------------------------------------------------------------------------- #
    def _encoder_mask(self, data_batch):
        src_pad = data_batch['src_ids'] == self.pad_index
        mask = src_pad[:, None, None, :]
        if self.use_distance_attention and self.spatial_cutoff > 0:
            far = data_batch['pair_mask'] & (data_batch['dist'] > self.spatial_cutoff)
            spatial = torch.zeros(self.num_heads, dtype=torch.bool)
            spatial[self.num_heads - self.spatial_heads:] = True
            mask = mask | (far[:, None, :, :] & spatial[None, :, None, None])
        return mask

    def encode(self, data_batch):
        """

        Returns:
            dict: memory (B, M, D), phi (B, M, M, K) of the last encoder layer
                or None, enc_attn (list of (B, H, M, M)), src_pad (B, M)

        """
        src_ids = data_batch['src_ids']
        x = self._embed(src_ids, self._fuse_3d(data_batch) if self.use_fusion else None)
        mask = self._encoder_mask(data_batch)

        phi = None
        pair_mask = data_batch.get('pair_mask')
        if self.use_distance_attention:
            phi = self.distance_weight(data_batch['dist'], data_batch['bond_type'], pair_mask)

        enc_attn = []
        num_layers = len(self.encoder_layers)
        for i, layer in enumerate(self.encoder_layers):
            spatial_weight = None if phi is None else head_weights(phi, self.spatial_heads)
            x, attn = layer(x, mask, spatial_weight)
            enc_attn.append(attn)
            if self.refine and phi is not None and i < num_layers - 1:
                phi = self.refine_layers[i](phi, x, pair_mask)

        return {
            'memory': x,
            'phi': phi,
            'enc_attn': enc_attn,
            'src_pad': src_ids == self.pad_index,
        }

    # ---------------------------------------------------------------------------- #
    # Decoder
    # ---------------------------------------------------------------------------- #
    def decode(self, tgt_in, memory, src_pad):
        """

        Args:
            tgt_in (torch.Tensor): (B, T) decoder input ids starting with BOS
            memory (torch.Tensor): (B, M, D)
            src_pad (torch.Tensor): (B, M) bool

        Returns:
            logits (torch.Tensor): (B, T, V)
            cross_attn (torch.Tensor): (B, H, T, M) of the final decoder layer

        """
        length = tgt_in.shape[1]
        y = self._embed(tgt_in)
        causal = torch.ones(length, length, dtype=torch.bool).triu(diagonal=1)
        self_mask = causal[None, None, :, :] | (tgt_in == self.pad_index)[:, None, None, :]
        memory_mask = src_pad[:, None, None, :]
        cross_attn = None
        for layer in self.decoder_layers:
            y, cross_attn = layer(y, memory, self_mask, memory_mask)
        return self.generator(y), cross_attn

    def decode_step(self, prefix, memory, src_pad):
        """Logits for the next token after each prefix.

        Args:
            prefix (torch.Tensor): (B, t) ids, each row starting with BOS
            memory (torch.Tensor): (B, M, D)
            src_pad (torch.Tensor): (B, M)

        Returns:
            logits (torch.Tensor): (B, V)
            cross_attn (torch.Tensor): (B, H, M)

        """
        if prefix.shape[1] > self.max_length:
            raise ValueError('prefix of {} tokens exceeds max length {}'.format(prefix.shape[1], self.max_length))
        logits, cross_attn = self.decode(prefix, memory, src_pad)
        last = prefix.shape[1] - 1
        return logits[:, last], (None if cross_attn is None else cross_attn[:, :, last])

    def forward(self, data_batch):
        enc = self.encode(data_batch)
        logits, cross_attn = self.decode(data_batch['tgt_in'], enc['memory'], enc['src_pad'])
        preds = {
            'logits': logits,
            'cross_attn': cross_attn,
            'phi': enc['phi'],
            'enc_attn': enc['enc_attn'],
        }
        return preds

    def get_loss(self, cfg):
        return Retro3DLoss(alpha=cfg.LOSS.ALPHA, beta=cfg.LOSS.BETA, pad_index=self.pad_index)

    def get_metric(self, cfg):
        return TokenAccuracy(self.pad_index), TokenAccuracy(self.pad_index)
