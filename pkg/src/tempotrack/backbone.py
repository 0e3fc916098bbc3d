"""Stride-8 siamese feature extractor and depth-wise correlation."""

from torch import nn
from torch.nn import functional as F

from .temporal_conv import CalibratedConv2d, QueueCalibration, TemporalCalibration

TEMPLATE_SIZE = 127
SEARCH_SIZE = 287
TOTAL_STRIDE = 8
TEMPLATE_FEAT_SIZE = 6
SEARCH_FEAT_SIZE = 26
RESPONSE_SIZE = 21

DEFAULT_WIDTHS = (96, 256, 384, 384, 256)


def depthwise_correlation(template_feat, search_feat):
    """Per-channel valid cross-correlation of template over search features.

    template_feat: (B, C, Hz, Wz), search_feat: (B, C, Hx, Wx) with
    Hz <= Hx and Wz <= Wx. Output spatial size is (Hx-Hz+1, Wx-Wz+1).
    """
    b, c, hz, wz = template_feat.shape
    bx, cx, hx, wx = search_feat.shape
    if b != bx or c != cx:
        raise ValueError(
            f"template {tuple(template_feat.shape)} and search "
            f"{tuple(search_feat.shape)} disagree in batch or channels")
    if hz > hx or wz > wx:
        raise ValueError("template features larger than search features")
    x = search_feat.reshape(1, b * c, hx, wx)
    kernel = template_feat.reshape(b * c, 1, hz, wz)
    out = F.conv2d(x, kernel, groups=b * c)
    return out.reshape(b, c, out.shape[-2], out.shape[-1])


class TrackingBackbone(nn.Module):
    """AlexNet-like five-conv stack with total stride 8.

    The last two convolutions are calibrated per frame, either from a
    fixed-size temporal state ("attention"), from a descriptor queue
    ("queue", ablation), or not at all ("none", the temporally blind twin).
    127x127 inputs map to 6x6 features and 287x287 inputs to 26x26.
    """

    def __init__(self, widths=DEFAULT_WIDTHS, temporal_mode="attention",
                 pool_size=4, queue_window=3):
        super().__init__()
        if temporal_mode not in ("attention", "queue", "none"):
            raise ValueError(f"unknown temporal mode {temporal_mode!r}")
        c1, c2, c3, c4, c5 = widths
        self.temporal_mode = temporal_mode
        self.out_channels = c5
        self.conv1 = nn.Conv2d(3, c1, 11, stride=2)
        self.conv2 = nn.Conv2d(c1, c2, 5)
        self.conv3 = nn.Conv2d(c2, c3, 3)
        self.conv4 = CalibratedConv2d(c3, c4, 3)
        self.conv5 = CalibratedConv2d(c4, c5, 3)
        self.pool = nn.MaxPool2d(3, stride=2)
        if temporal_mode == "attention":
            self.calib4 = TemporalCalibration(c3, c4, pool_size)
            self.calib5 = TemporalCalibration(c4, c5, pool_size)
        elif temporal_mode == "queue":
            self.calib4 = QueueCalibration(c3, c4, queue_window)
            self.calib5 = QueueCalibration(c4, c5, queue_window)

    def _stem(self, x):
        h = self.pool(F.relu(self.conv1(x)))
        h = self.pool(F.relu(self.conv2(h)))
        return F.relu(self.conv3(h))

    def forward_template(self, z):
        """Template features with neutral calibration (a single frame has no
        temporal context)."""
        h = self._stem(z)
        h = F.relu(self.conv4(h))
        return self.conv5(h)

    def forward_search(self, x, state=None):
        """Search-region features plus the updated per-sequence state.

        Pass state=None on a sequence's first frame; it is seeded from that
        frame before the first update. The state layout depends on the
        temporal mode and its shape stays constant across frames.
        """
        h = self._stem(x)
        if self.temporal_mode == "none":
            h = F.relu(self.conv4(h))
            return self.conv5(h), None
        if self.temporal_mode == "attention":
            s4, s5 = (None, None) if state is None else state
            if s4 is None:
                s4 = self.calib4.init_state(h)
            s4 = self.calib4.update_state(s4, h)
            h = F.relu(self.conv4(h, self.calib4.factors(s4)))
            if s5 is None:
                s5 = self.calib5.init_state(h)
            s5 = self.calib5.update_state(s5, h)
            return self.conv5(h, self.calib5.factors(s5)), (s4, s5)
        q4, q5 = ([], []) if state is None else state
        q4 = (list(q4) + [self.calib4.descriptor(h)])[-self.calib4.window:]
        h = F.relu(self.conv4(h, self.calib4.factors(q4)))
        q5 = (list(q5) + [self.calib5.descriptor(h)])[-self.calib5.window:]
        return self.conv5(h, self.calib5.factors(q5)), (q4, q5)
