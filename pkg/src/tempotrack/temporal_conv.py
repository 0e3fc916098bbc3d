"""Temporally calibrated convolution.

A fixed-size state accumulates past frame features through cross-attention;
per-frame weight and bias multipliers derived from that state rescale a base
convolution. A descriptor-queue variant of the calibration is kept for
ablation comparisons.
"""

import torch
from torch import nn
from torch.nn import functional as F

from .attention import map_to_tokens, scaled_dot_attention, tokens_to_map


def _zero_init(layer):
    nn.init.zeros_(layer.weight)
    if layer.bias is not None:
        nn.init.zeros_(layer.bias)
    return layer


class TemporalCalibration(nn.Module):
    """Maintains a fixed-size temporal state and derives calibration factors.

    The state is a (B, reduce_channels, pool_size, pool_size) map whose shape
    never changes over a sequence, regardless of its length. The factor heads
    are zero-initialized, so a freshly constructed module yields all-ones
    factors and the calibrated convolution equals its base convolution.
    """

    def __init__(self, in_channels, out_channels, pool_size=4,
                 reduce_channels=None, head_reduction=4):
        super().__init__()
        if pool_size < 1:
            raise ValueError(f"pool size must be >= 1, got {pool_size}")
        if reduce_channels is None:
            reduce_channels = max(1, in_channels // 4)
        self.pool_size = pool_size
        self.reduce_channels = reduce_channels
        self.proj_query = nn.Conv2d(in_channels, reduce_channels, 1)
        self.proj_key = nn.Conv2d(reduce_channels, reduce_channels, 1)
        self.proj_value = nn.Conv2d(reduce_channels, reduce_channels, 1)
        self.proj_init = nn.Conv2d(in_channels, reduce_channels, 1)
        hidden = max(1, reduce_channels // head_reduction)
        self.weight_head = nn.Sequential(
            nn.Linear(reduce_channels, hidden), nn.ReLU(),
            _zero_init(nn.Linear(hidden, out_channels)))
        self.bias_head = nn.Sequential(
            nn.Linear(reduce_channels, hidden), nn.ReLU(),
            _zero_init(nn.Linear(hidden, out_channels)))

    def _pool(self, x):
        if x.shape[-2] < self.pool_size or x.shape[-1] < self.pool_size:
            raise ValueError(
                f"input {tuple(x.shape[-2:])} smaller than pooled size "
                f"{self.pool_size}x{self.pool_size}")
        return F.adaptive_max_pool2d(x, self.pool_size)

    def init_state(self, x):
        """Seed the state from the first frame's features."""
        return self.proj_init(self._pool(x))

    def update_state(self, state, x):
        """Cross-attend the pooled current features into the previous state."""
        pooled = self._pool(x)
        q = map_to_tokens(self.proj_query(pooled))
        k = map_to_tokens(self.proj_key(state))
        v = map_to_tokens(self.proj_value(state))
        att = scaled_dot_attention(q, k, v, self.reduce_channels)
        new_state = tokens_to_map(att, (self.pool_size, self.pool_size))
        if new_state.shape != state.shape:
            raise RuntimeError("temporal state changed shape across frames")
        return new_state

    def factors(self, state):
        """Per-output-channel (weight, bias) multipliers, all ones at init."""
        descriptor = state.mean(dim=(2, 3))
        return (self.weight_head(descriptor) + 1.0,
                self.bias_head(descriptor) + 1.0)


class CalibratedConv2d(nn.Module):
    """Conv2d whose effective weight and bias are rescaled per output channel.

    Scaling a whole output-channel filter commutes with the convolution, so
    the weight factor multiplies the unbiased convolution output instead of
    the kernel; this also supports a distinct factor per batch sample.
    """

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0):
        super().__init__()
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {kernel_size}")
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size,
                              stride=stride, padding=padding)

    def forward(self, x, factors=None):
        if factors is None:
            return self.conv(x)
        weight_scale, bias_scale = factors
        out = F.conv2d(x, self.conv.weight, None,
                       self.conv.stride, self.conv.padding)
        bias = self.conv.bias * bias_scale
        return out * weight_scale[:, :, None, None] + bias[:, :, None, None]


class QueueCalibration(nn.Module):
    """Ablation variant: factors from a 1-D conv over queued frame descriptors.

    The queue holds global-average descriptors of the most recent frames, so
    memory grows with the window hyper-parameter rather than staying fixed.
    """

    def __init__(self, in_channels, out_channels, window=3, head_reduction=4):
        super().__init__()
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        hidden = max(1, in_channels // head_reduction)
        self.body = nn.Conv1d(in_channels, hidden, kernel_size=window)
        self.weight_head = _zero_init(nn.Conv1d(hidden, out_channels, 1))
        self.bias_head = _zero_init(nn.Conv1d(hidden, out_channels, 1))

    @staticmethod
    def descriptor(x):
        """Global average descriptor of a (B, C, H, W) feature map."""
        return x.mean(dim=(2, 3))

    def factors(self, queue):
        """Factors from the most recent descriptors; empty queue means all ones."""
        if len(queue) == 0:
            return None
        recent = list(queue)[-self.window:]
        while len(recent) < self.window:
            recent.insert(0, recent[0])
        stacked = torch.stack(recent, dim=2)
        h = F.relu(self.body(stacked))
        return (self.weight_head(h)[:, :, 0] + 1.0,
                self.bias_head(h)[:, :, 0] + 1.0)
