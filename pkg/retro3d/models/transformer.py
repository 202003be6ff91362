"""Post-LN transformer encoder and decoder layers."""
from torch import nn

from retro3d import ops
from .attention import MultiHeadAttention
from .layers import LayerNorm, MLP, SeededDropout


class EncoderLayer(nn.Module):
    def __init__(self, dim, num_heads, ffn_dim, spatial_heads=0, dropout=0.1, attention_dropout=0.1):
        super(EncoderLayer, self).__init__()
        self.self_attn = MultiHeadAttention(dim, num_heads, spatial_heads, dropout=attention_dropout)
        self.dropout1 = SeededDropout(dropout)
        self.norm1 = LayerNorm(dim)
        self.ffn = MLP(dim, ffn_dim, dim, activation='relu', dropout=dropout)
        self.dropout2 = SeededDropout(dropout)
        self.norm2 = LayerNorm(dim)

    def forward(self, x, mask=None, spatial_weight=None):
        h, attn = self.self_attn(x, x, mask, spatial_weight)
        x = self.norm1(ops.add(x, self.dropout1(h)))
        x = self.norm2(ops.add(x, self.dropout2(self.ffn(x))))
        return x, attn


class DecoderLayer(nn.Module):
    def __init__(self, dim, num_heads, ffn_dim, dropout=0.1, attention_dropout=0.1):
        super(DecoderLayer, self).__init__()
        self.self_attn = MultiHeadAttention(dim, num_heads, dropout=attention_dropout)
        self.dropout1 = SeededDropout(dropout)
        self.norm1 = LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, num_heads, dropout=attention_dropout)
        self.dropout2 = SeededDropout(dropout)
        self.norm2 = LayerNorm(dim)
        self.ffn = MLP(dim, ffn_dim, dim, activation='relu', dropout=dropout)
        self.dropout3 = SeededDropout(dropout)
        self.norm3 = LayerNorm(dim)

    def forward(self, y, memory, self_mask=None, memory_mask=None):
        h, _ = self.self_attn(y, y, self_mask)
        y = self.norm1(ops.add(y, self.dropout1(h)))
        h, cross_attn = self.cross_attn(y, memory, memory_mask)
        y = self.norm2(ops.add(y, self.dropout2(h)))
        y = self.norm3(ops.add(y, self.dropout3(self.ffn(y))))
        return y, cross_attn
