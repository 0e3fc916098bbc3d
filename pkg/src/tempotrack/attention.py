"""Scaled dot-product and multi-head attention over token sequences.

Spatial maps interoperate with the token form through map_to_tokens /
tokens_to_map, which flatten the H x W positions into L = H*W tokens with
channels last.
"""

import math

import torch
from torch import nn


def map_to_tokens(x):
    """Flatten a (B, C, H, W) map into (B, H*W, C) tokens."""
    return x.flatten(2).transpose(1, 2)


def tokens_to_map(tokens, shape):
    """Reshape (B, L, C) tokens back into a (B, C, H, W) map; shape is (H, W)."""
    h, w = shape
    b, l, c = tokens.shape
    if l != h * w:
        raise ValueError(f"cannot reshape {l} tokens to a {h}x{w} map")
    return tokens.transpose(1, 2).reshape(b, c, h, w)


def scaled_dot_attention(query, key, value, scale=None):
    """Softmax(Q K^T / sqrt(d)) V along the last two dimensions.

    query, key, value: (..., L, C) token sequences; key and value must have
    equal length and all three the same channel count. scale is d and
    defaults to the channel count. Output has query's length, and each
    output token is a convex combination of value tokens.
    """
    if query.shape[-1] != key.shape[-1] or key.shape[-1] != value.shape[-1]:
        raise ValueError(
            f"channel mismatch: query {query.shape[-1]}, key {key.shape[-1]}, "
            f"value {value.shape[-1]}")
    if key.shape[-2] != value.shape[-2]:
        raise ValueError(
            f"key length {key.shape[-2]} != value length {value.shape[-2]}")
    for name, t in (("query", query), ("key", key), ("value", value)):
        if not torch.isfinite(t).all():
            raise FloatingPointError(f"non-finite entries in {name}")
    d = query.shape[-1] if scale is None else scale
    if d <= 0:
        raise ValueError(f"scale must be positive, got {d}")
    logits = query @ key.transpose(-2, -1) / math.sqrt(d)
    # torch.softmax subtracts the row max internally, keeping this stable
    weights = torch.softmax(logits, dim=-1)
    return weights @ value


class MultiHeadAttention(nn.Module):
    """Per-head projected attention, concatenated and linearly recombined.

    The head projections tile the channel dimension, so the head count must
    divide the channel count. The per-head scale defaults to the head width.
    Accepts (L, C) or (B, L, C) inputs.
    """

    def __init__(self, channels, heads=6, scale=None):
        super().__init__()
        if channels % heads != 0:
            raise ValueError(f"{heads} heads do not divide {channels} channels")
        self.channels = channels
        self.heads = heads
        self.head_dim = channels // heads
        self.scale = self.head_dim if scale is None else scale
        self.proj_query = nn.Linear(channels, channels, bias=False)
        self.proj_key = nn.Linear(channels, channels, bias=False)
        self.proj_value = nn.Linear(channels, channels, bias=False)
        self.proj_out = nn.Linear(channels, channels, bias=False)

    def forward(self, query, key, value):
        if query.shape[-1] != self.channels:
            raise ValueError(
                f"expected {self.channels} channels, got {query.shape[-1]}")
        squeeze = query.dim() == 2
        if squeeze:
            query, key, value = (t.unsqueeze(0) for t in (query, key, value))
        b = query.shape[0]

        def split_heads(proj, t):
            out = proj(t).reshape(b, t.shape[1], self.heads, self.head_dim)
            return out.transpose(1, 2)

        att = scaled_dot_attention(
            split_heads(self.proj_query, query),
            split_heads(self.proj_key, key),
            split_heads(self.proj_value, value),
            self.scale)
        att = att.transpose(1, 2).reshape(b, query.shape[1], self.channels)
        out = self.proj_out(att)
        return out.squeeze(0) if squeeze else out
