"""Encoder-decoder refinement of similarity maps with temporal context.

The encoder folds the previous temporal prior and the current similarity map
into the current prior; a gated fusion stage can suppress the temporal branch
when past context would mislead (occlusion, blur). The decoder refines the
similarity map by attending into the produced prior. The prior has the same
fixed shape as the similarity map for the whole sequence.
"""

import torch
from torch import nn

from .attention import MultiHeadAttention, map_to_tokens, tokens_to_map


class FeedForward(nn.Module):
    """Two-layer MLP over the channel dimension with ReLU."""

    def __init__(self, channels, expansion=2):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(channels, expansion * channels), nn.ReLU(),
            nn.Linear(expansion * channels, channels))

    def forward(self, x):
        return self.net(x)


class PriorEncoder(nn.Module):
    """Produces the current temporal prior from the previous prior and the
    current similarity map.

    By default the previous prior is the query and the current map supplies
    keys and values, which weights the fused prior toward current evidence;
    swap_query reverses the roles (kept as an ablation hook). Layer norms are
    post-residual and unshared.
    """

    def __init__(self, channels, heads=6):
        super().__init__()
        self.cross = MultiHeadAttention(channels, heads)
        self.self_mid = MultiHeadAttention(channels, heads)
        self.self_out = MultiHeadAttention(channels, heads)
        self.norm1 = nn.LayerNorm(channels)
        self.norm2 = nn.LayerNorm(channels)
        self.norm3 = nn.LayerNorm(channels)
        self.gate_proj = nn.Conv2d(channels, channels, 1)
        self.gate = FeedForward(channels)
        self.fuse = nn.Conv2d(2 * channels, channels, 1)

    def forward(self, prior, fmap, swap_query=False):
        if prior.shape != fmap.shape:
            raise ValueError(
                f"prior {tuple(prior.shape)} and map {tuple(fmap.shape)} differ")
        hw = fmap.shape[-2:]
        p = map_to_tokens(prior)
        f = map_to_tokens(fmap)
        cross = self.cross(f, p, p) if swap_query else self.cross(p, f, f)
        f1 = self.norm1(f + cross)
        f2 = self.norm2(f1 + self.self_mid(f1, f1, f1))
        f1_map = tokens_to_map(f1, hw)
        f2_map = tokens_to_map(f2, hw)
        # per-channel gate from the global descriptor of the first stage
        alpha = self.gate(self.gate_proj(f1_map).mean(dim=(2, 3)))
        fused = f2_map + self.fuse(torch.cat([f2_map, f1_map], dim=1)) \
            * alpha[:, :, None, None]
        ft = map_to_tokens(fused)
        out = self.norm3(ft + self.self_out(ft, ft, ft))
        return tokens_to_map(out, hw)


class MapDecoder(nn.Module):
    """Refines the similarity map by attending into the temporal prior."""

    def __init__(self, channels, heads=6):
        super().__init__()
        self.self_att = MultiHeadAttention(channels, heads)
        self.cross = MultiHeadAttention(channels, heads)
        self.ffn = FeedForward(channels)
        self.norm1 = nn.LayerNorm(channels)
        self.norm2 = nn.LayerNorm(channels)
        self.norm3 = nn.LayerNorm(channels)

    def forward(self, prior, fmap):
        if prior.shape != fmap.shape:
            raise ValueError(
                f"prior {tuple(prior.shape)} and map {tuple(fmap.shape)} differ")
        hw = fmap.shape[-2:]
        f = map_to_tokens(fmap)
        m = map_to_tokens(prior)
        f3 = self.norm1(f + self.self_att(f, f, f))
        f4 = self.norm2(f3 + self.cross(f3, m, m))
        out = self.norm3(f4 + self.ffn(f4))
        return tokens_to_map(out, hw)


class SimilarityRefiner(nn.Module):
    """Encoder-decoder pair plus the first-frame prior initialization.

    The prior is seeded with a 1x1 convolution of the first frame's raw
    correlation map, so it starts from the tracked object's own semantics
    rather than a shared learned constant.
    """

    def __init__(self, in_channels, channels=192, heads=6):
        super().__init__()
        self.channels = channels
        self.proj_init = nn.Conv2d(in_channels, channels, 1)
        self.encoder = PriorEncoder(channels, heads)
        self.decoder = MapDecoder(channels, heads)

    def init_prior(self, raw_map):
        """Initial prior from the first frame's raw similarity map."""
        return self.proj_init(raw_map)

    def encode(self, prior, fmap, swap_query=False):
        return self.encoder(prior, fmap, swap_query)

    def decode(self, prior, fmap):
        return self.decoder(prior, fmap)

    def step(self, prior, fmap, swap_query=False):
        """Encode the new prior, then decode the refined map with it."""
        new_prior = self.encode(prior, fmap, swap_query)
        return new_prior, self.decode(new_prior, fmap)
