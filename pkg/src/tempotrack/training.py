"""Curriculum schedule, log-space learning-rate decay, and the multi-frame
training step."""

import math
from dataclasses import dataclass

import numpy as np
import torch

from .backbone import SEARCH_SIZE, TEMPLATE_SIZE
from .crops import (SEARCH_CONTEXT_SCALE, box_to_crop, context_side,
                    crop_subwindow, patch_to_tensor)
from .losses import tracking_loss

CHECKPOINT_VERSION = 1


@dataclass
class CurriculumSchedule:
    """Video length per training stage: lengths[0] up to the first boundary
    epoch inclusive, lengths[1] up to the second, lengths[2] afterwards."""

    boundaries: tuple = (33, 50)
    lengths: tuple = (2, 3, 4)
    total_epochs: int = 100
    freeze_epochs: int = 10
    enabled: bool = True
    fixed_length: int = 2

    def __post_init__(self):
        if list(self.lengths) != sorted(self.lengths):
            raise ValueError("curriculum lengths must be non-decreasing")
        if len(self.boundaries) + 1 != len(self.lengths):
            raise ValueError("need one more length than boundaries")


@dataclass
class LrSchedule:
    start: float = 0.005
    end: float = 0.0005
    epochs: int = 100
    momentum: float = 0.9
    batch_size: int = 124


def video_length(epoch, sched: CurriculumSchedule):
    """Training clip length for the given 1-based epoch."""
    if not 1 <= epoch <= sched.total_epochs:
        raise ValueError(f"epoch {epoch} outside 1..{sched.total_epochs}")
    if not sched.enabled:
        return sched.fixed_length
    for boundary, length in zip(sched.boundaries, sched.lengths):
        if epoch <= boundary:
            return length
    return sched.lengths[-1]


def learning_rate(epoch, sched: LrSchedule):
    """Geometric interpolation from start to end over the epoch range."""
    if not 1 <= epoch <= sched.epochs:
        raise ValueError(f"epoch {epoch} outside 1..{sched.epochs}")
    if sched.epochs == 1:
        return sched.start
    frac = (epoch - 1) / (sched.epochs - 1)
    return sched.start * (sched.end / sched.start) ** frac


def make_optimizer(model, sched: LrSchedule):
    return torch.optim.SGD(model.parameters(), lr=sched.start,
                           momentum=sched.momentum)


def set_backbone_frozen(model, frozen):
    for p in model.backbone.parameters():
        p.requires_grad_(not frozen)


def prepare_clip_batch(clips, dtype=torch.float32):
    """Crop tensors and crop-coordinate targets for a batch of clips.

    Each clip is (frames, boxes) with frames a list of (H, W, 3) uint8 arrays
    and boxes an (T, 4) center-format array. The template comes from frame 0;
    the frame-t search window is centered on the frame t-1 ground truth, the
    way the tracker re-centers on its previous prediction.

    Returns (templates, searches, targets): templates (B, 3, 127, 127),
    searches a list of T (B, 3, 287, 287) tensors, targets a list of T
    (B, 4) crop-coordinate boxes (entry 0 unused for supervision).
    """
    lengths = {len(frames) for frames, _ in clips}
    if len(lengths) != 1:
        raise ValueError("all clips in a batch must have the same length")
    t_len = lengths.pop()
    if t_len < 2:
        raise ValueError("clips need at least 2 frames for temporal supervision")
    templates, searches, targets = [], [], []
    for t in range(t_len):
        searches.append([])
        targets.append([])
    for frames, boxes in clips:
        z_side = context_side(boxes[0], 1.0)
        templates.append(patch_to_tensor(crop_subwindow(
            frames[0], boxes[0][:2], z_side, TEMPLATE_SIZE), dtype))
        for t in range(t_len):
            anchor = boxes[max(t - 1, 0)]
            side = context_side(anchor, SEARCH_CONTEXT_SCALE)
            patch = crop_subwindow(frames[t], anchor[:2], side, SEARCH_SIZE)
            searches[t].append(patch_to_tensor(patch, dtype))
            targets[t].append(box_to_crop(boxes[t], anchor[:2], side, SEARCH_SIZE))
    templates = torch.cat(templates)
    searches = [torch.cat(s) for s in searches]
    targets = [torch.as_tensor(np.stack(t), dtype=dtype) for t in targets]
    return templates, searches, targets


def train_step(model, optimizer, clips, epoch, curriculum: CurriculumSchedule,
               lr_sched: LrSchedule):
    """One momentum-SGD step over a batch of clips; returns the loss value.

    Frame 0 of each clip seeds both temporal states; the loss is averaged
    over the remaining frames. The backbone stays frozen through the first
    freeze_epochs epochs.
    """
    expected = video_length(epoch, curriculum)
    for frames, _ in clips:
        if len(frames) != expected:
            raise ValueError(
                f"clip length {len(frames)} != scheduled length {expected} "
                f"at epoch {epoch}")
    lr = learning_rate(epoch, lr_sched)
    for group in optimizer.param_groups:
        group["lr"] = lr
    set_backbone_frozen(model, epoch <= curriculum.freeze_epochs)

    dtype = next(model.parameters()).dtype
    templates, searches, targets = prepare_clip_batch(clips, dtype)
    template_feat = model.embed_template(templates)
    state = model.init_sequence(template_feat, searches[0])
    total = 0.0
    for t in range(1, len(searches)):
        state, outputs, _ = model.track_frame(template_feat, searches[t], state)
        total = total + tracking_loss(outputs, targets[t]).total()
    loss = total / (len(searches) - 1)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def save_checkpoint(path, model, config=None, epoch=0):
    torch.save({"format_version": CHECKPOINT_VERSION,
                "model": model.state_dict(),
                "config": config.to_dict() if config is not None else None,
                "epoch": epoch}, path)


def load_checkpoint(path, model):
    data = torch.load(path, weights_only=False)
    version = data.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    model.load_state_dict(data["model"])
    return data
