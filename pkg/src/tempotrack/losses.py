"""Training losses: two classification terms and two box-regression terms.

The overlap term is a 1 - IoU penalty; summing raw IoU would reward low
overlap, so the loss keeps the sign that actually decreases with better
boxes.
"""

from typing import NamedTuple

import torch
from torch.nn import functional as F

from .heads import HeadOutputs, decode_boxes, make_targets


def box_iou(a, b):
    """IoU between broadcastable center-format (..., 4) box tensors."""
    ax1, ax2 = a[..., 0] - a[..., 2] / 2, a[..., 0] + a[..., 2] / 2
    ay1, ay2 = a[..., 1] - a[..., 3] / 2, a[..., 1] + a[..., 3] / 2
    bx1, bx2 = b[..., 0] - b[..., 2] / 2, b[..., 0] + b[..., 2] / 2
    by1, by2 = b[..., 1] - b[..., 3] / 2, b[..., 1] + b[..., 3] / 2
    iw = (torch.minimum(ax2, bx2) - torch.maximum(ax1, bx1)).clamp(min=0)
    ih = (torch.minimum(ay2, by2) - torch.maximum(ay1, by1)).clamp(min=0)
    inter = iw * ih
    union = a[..., 2] * a[..., 3] + b[..., 2] * b[..., 3] - inter
    return inter / union.clamp(min=1e-12)


def _masked_mean(values, mask):
    denom = mask.sum()
    if denom == 0:
        return values.sum() * 0.0
    return (values * mask).sum() / denom


def center_distance_loss(pred_boxes, gt_boxes, mask):
    """Masked mean of sqrt((cx-x)^2/w + (cy-y)^2/h) over grid cells.

    pred_boxes: decoded (B, 4, N, N); gt_boxes: (B, 4) center format;
    mask: (B, N, N). Zero iff every masked predicted center sits on the
    ground-truth center; an all-zero mask yields zero by convention.
    """
    w = gt_boxes[:, 2]
    h = gt_boxes[:, 3]
    if (w <= 0).any() or (h <= 0).any():
        raise ValueError("ground-truth box sizes must be positive")
    dx = pred_boxes[:, 0] - gt_boxes[:, 0].reshape(-1, 1, 1)
    dy = pred_boxes[:, 1] - gt_boxes[:, 1].reshape(-1, 1, 1)
    # the tiny floor keeps the sqrt gradient finite at exact hits
    d = (dx ** 2 / w.reshape(-1, 1, 1) + dy ** 2 / h.reshape(-1, 1, 1)) \
        .clamp(min=1e-12).sqrt()
    return _masked_mean(d, mask)


def overlap_loss(pred_boxes, gt_boxes, mask):
    """Masked mean of 1 - IoU between per-cell boxes and the ground truth."""
    per_cell = pred_boxes.movedim(1, -1)
    iou = box_iou(per_cell, gt_boxes[:, None, None, :])
    return _masked_mean(1.0 - iou, mask)


def classification_losses(fg_logits, quality_logits, labels, quality):
    """Cross-entropy on the foreground branch, BCE on the quality branch."""
    if labels.min() < 0 or labels.max() > 1:
        raise ValueError("foreground labels must be 0 or 1")
    if quality.min() < 0 or quality.max() > 1:
        raise ValueError("quality targets must lie in [0, 1]")
    ce = F.cross_entropy(fg_logits, labels)
    bce = F.binary_cross_entropy_with_logits(quality_logits.squeeze(1), quality)
    return ce, bce


class LossParts(NamedTuple):
    cls_fg: torch.Tensor
    cls_quality: torch.Tensor
    center: torch.Tensor
    overlap: torch.Tensor

    def total(self):
        """Overall loss: the unweighted sum of the four parts."""
        return self.cls_fg + self.cls_quality + self.center + self.overlap


def tracking_loss(outputs: HeadOutputs, gt_boxes, stride=None, image_size=None):
    """All four loss parts for head outputs against (B, 4) ground truth."""
    kwargs = {}
    if stride is not None:
        kwargs["stride"] = stride
    if image_size is not None:
        kwargs["image_size"] = image_size
    labels, quality, mask = make_targets(
        gt_boxes, map_size=outputs.location.shape[-1], **kwargs)
    boxes = decode_boxes(outputs.location, **kwargs)
    ce, bce = classification_losses(outputs.foreground, outputs.quality,
                                    labels, quality)
    return LossParts(ce, bce,
                     center_distance_loss(boxes, gt_boxes, mask),
                     overlap_loss(boxes, gt_boxes, mask))
