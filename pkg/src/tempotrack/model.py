"""End-to-end tracker network and its per-sequence temporal state."""

import io
from dataclasses import dataclass

import torch
from torch import nn

from .backbone import TrackingBackbone, depthwise_correlation
from .config import ModelConfig
from .heads import PredictionHeads
from .refinement import SimilarityRefiner


@dataclass
class TrackerState:
    """Per-sequence temporal state: backbone calibration state plus the
    similarity-level prior. Both are fixed-size, so the serialized form has
    the same byte length no matter how many frames have been tracked."""

    backbone: object
    prior: torch.Tensor

    def detached(self):
        def det(obj):
            if obj is None:
                return None
            if torch.is_tensor(obj):
                return obj.detach()
            return type(obj)(det(o) for o in obj)

        return TrackerState(det(self.backbone), self.prior.detach())

    def serialize(self):
        """Stable binary form of the state tensors (for size accounting and
        checkpointing of in-flight sequences)."""
        state = self.detached()
        buf = io.BytesIO()
        torch.save({"backbone": state.backbone, "prior": state.prior}, buf)
        return buf.getvalue()


class TrackerNet(nn.Module):
    """Siamese features, depth-wise correlation, temporal refinement, heads.

    The raw correlation map is adjusted by a channel-preserving 1x1 conv and
    then adapted to the refinement width (divisible by the head count).
    """

    def __init__(self, widths=(96, 256, 384, 384, 256), temporal_mode="attention",
                 pool_size=4, queue_window=3, refine_channels=192, heads=6,
                 head_hidden=None, size_bias=64.0, swap_encoder_query=False):
        super().__init__()
        self.backbone = TrackingBackbone(widths, temporal_mode, pool_size,
                                         queue_window)
        c = self.backbone.out_channels
        self.adjust = nn.Conv2d(c, c, 1)
        self.adapter = nn.Conv2d(c, refine_channels, 1)
        self.refiner = SimilarityRefiner(c, refine_channels, heads)
        self.heads = PredictionHeads(refine_channels, head_hidden, size_bias)
        self.swap_encoder_query = swap_encoder_query

    @classmethod
    def from_config(cls, cfg: ModelConfig):
        return cls(widths=tuple(cfg.backbone_widths),
                   temporal_mode=cfg.temporal_mode,
                   pool_size=cfg.pool_size,
                   queue_window=cfg.queue_window,
                   refine_channels=cfg.refine_channels,
                   heads=cfg.attention_heads,
                   head_hidden=cfg.head_hidden,
                   size_bias=cfg.size_bias,
                   swap_encoder_query=cfg.swap_encoder_query)

    def embed_template(self, template):
        """Template features; computed once per sequence."""
        return self.backbone.forward_template(template)

    def similarity(self, template_feat, search_feat):
        """Raw correlation map and its adapted refinement-width form."""
        raw = depthwise_correlation(template_feat, search_feat)
        return raw, self.adapter(self.adjust(raw))

    def init_sequence(self, template_feat, first_search):
        """Seed calibration state and prior from a sequence's first frame."""
        feat, bstate = self.backbone.forward_search(first_search, None)
        raw, _ = self.similarity(template_feat, feat)
        return TrackerState(bstate, self.refiner.init_prior(raw))

    def track_frame(self, template_feat, search, state: TrackerState):
        """One tracking step; returns (new state, head outputs, refined map)."""
        feat, bstate = self.backbone.forward_search(search, state.backbone)
        _, adapted = self.similarity(template_feat, feat)
        prior = self.refiner.encode(state.prior, adapted,
                                    self.swap_encoder_query)
        refined = self.refiner.decode(prior, adapted)
        return TrackerState(bstate, prior), self.heads(refined), refined
