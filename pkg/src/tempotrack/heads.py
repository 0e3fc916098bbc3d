"""Prediction branches, response-grid box decoding, and training targets."""

from typing import NamedTuple

import torch
from torch import nn

from .backbone import RESPONSE_SIZE, SEARCH_SIZE, TOTAL_STRIDE

MIN_BOX_SIZE = 1e-4


class HeadOutputs(NamedTuple):
    foreground: torch.Tensor  # (B, 2, N, N) logits
    quality: torch.Tensor     # (B, 1, N, N) logits
    location: torch.Tensor    # (B, 4, N, N) box fields


class PredictionHeads(nn.Module):
    """Three shallow conv branches over the refined similarity map.

    Each branch is a padded 3x3 conv, ReLU, then a 1x1 projection, preserving
    the spatial size; zero input yields spatially constant, bias-only output.
    The size channels of the location branch start at size_bias so predicted
    boxes begin at a plausible scale instead of the clamp floor.
    """

    def __init__(self, channels, hidden=None, size_bias=64.0):
        super().__init__()
        hidden = channels if hidden is None else hidden

        def branch(out_channels):
            return nn.Sequential(
                nn.Conv2d(channels, hidden, 3, padding=1), nn.ReLU(),
                nn.Conv2d(hidden, out_channels, 1))

        self.cls_fg = branch(2)
        self.cls_quality = branch(1)
        self.loc = branch(4)
        with torch.no_grad():
            self.loc[-1].bias[2:].fill_(size_bias)

    def forward(self, refined):
        return HeadOutputs(self.cls_fg(refined),
                           self.cls_quality(refined),
                           self.loc(refined))


def grid_coordinates(map_size=RESPONSE_SIZE, stride=TOTAL_STRIDE,
                     image_size=SEARCH_SIZE, device=None, dtype=None):
    """Image-plane (x, y) coordinates of each response-grid cell."""
    center = (image_size - 1) / 2.0
    idx = torch.arange(map_size, device=device, dtype=dtype or torch.get_default_dtype())
    coords = center + (idx - (map_size - 1) / 2.0) * stride
    grid_y, grid_x = torch.meshgrid(coords, coords, indexing="ij")
    return grid_x, grid_y


def decode_boxes(location, stride=TOTAL_STRIDE, image_size=SEARCH_SIZE):
    """Decode (B, 4, N, N) location fields into per-cell center-format boxes.

    Channels are (dx, dy, w, h): center offsets in pixels from the cell's
    image coordinate, and raw sizes clamped to MIN_BOX_SIZE.
    """
    grid_x, grid_y = grid_coordinates(location.shape[-1], stride, image_size,
                                      device=location.device,
                                      dtype=location.dtype)
    cx = grid_x + location[:, 0]
    cy = grid_y + location[:, 1]
    w = location[:, 2].clamp(min=MIN_BOX_SIZE)
    h = location[:, 3].clamp(min=MIN_BOX_SIZE)
    return torch.stack([cx, cy, w, h], dim=1)


def make_targets(gt_boxes, map_size=RESPONSE_SIZE, stride=TOTAL_STRIDE,
                 image_size=SEARCH_SIZE):
    """Grid supervision for a batch of center-format (B, 4) ground-truth boxes.

    Returns (labels, quality, mask): labels are 1 where the cell's image
    coordinate falls inside the box, quality is a centerness-style score in
    [0, 1] on those cells, and mask marks the cells the box losses average
    over (identical support to the labels).
    """
    if (gt_boxes[:, 2] <= 0).any() or (gt_boxes[:, 3] <= 0).any():
        raise ValueError("ground-truth box sizes must be positive")
    grid_x, grid_y = grid_coordinates(map_size, stride, image_size,
                                      device=gt_boxes.device,
                                      dtype=gt_boxes.dtype)
    x, y, w, h = (gt_boxes[:, i].reshape(-1, 1, 1) for i in range(4))
    left = grid_x - (x - w / 2)
    right = (x + w / 2) - grid_x
    top = grid_y - (y - h / 2)
    bottom = (y + h / 2) - grid_y
    inside = (left >= 0) & (right >= 0) & (top >= 0) & (bottom >= 0)
    lr_min = torch.minimum(left, right)
    lr_max = torch.maximum(left, right)
    tb_min = torch.minimum(top, bottom)
    tb_max = torch.maximum(top, bottom)
    ratio = (lr_min * tb_min).clamp(min=0) / (lr_max * tb_max).clamp(min=1e-12)
    quality = torch.where(inside, ratio.sqrt(), torch.zeros_like(ratio))
    return inside.long(), quality, inside.to(gt_boxes.dtype)
