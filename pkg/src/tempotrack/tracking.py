"""Offline tracking loop: crop, forward, box selection, state update."""

import time

import numpy as np
import torch

from .backbone import RESPONSE_SIZE, SEARCH_SIZE, TEMPLATE_SIZE
from .crops import (SEARCH_CONTEXT_SCALE, box_to_image, context_side,
                    crop_subwindow, patch_to_tensor)
from .heads import decode_boxes


def cosine_window(size=RESPONSE_SIZE):
    w = np.hanning(size)
    return np.outer(w, w)


class SingleObjectTracker:
    """Tracks one target through a sequence of frames.

    The search window is re-centered on the previous prediction each frame;
    the output box is read at the argmax of foreground score times quality,
    blended with a cosine window that penalizes large displacements.
    """

    def __init__(self, model, window_penalty=0.3):
        self.model = model
        self.window_penalty = window_penalty
        self.window = torch.from_numpy(cosine_window())
        self.template_feat = None
        self.state = None
        self.box = None

    def _search_patch(self, frame):
        side = context_side(self.box, SEARCH_CONTEXT_SCALE)
        patch = crop_subwindow(frame, self.box[:2], side, SEARCH_SIZE)
        dtype = next(self.model.parameters()).dtype
        return patch_to_tensor(patch, dtype), side

    @torch.no_grad()
    def init(self, frame, box):
        """Start a sequence from the first frame's ground-truth box."""
        self.box = np.asarray(box, dtype=np.float64).copy()
        dtype = next(self.model.parameters()).dtype
        template = crop_subwindow(frame, self.box[:2],
                                  context_side(self.box, 1.0), TEMPLATE_SIZE)
        self.template_feat = self.model.embed_template(
            patch_to_tensor(template, dtype))
        patch, _ = self._search_patch(frame)
        self.state = self.model.init_sequence(self.template_feat, patch)
        return self.box.copy()

    @torch.no_grad()
    def update(self, frame):
        """Track one frame; returns the predicted center-format box."""
        if self.state is None:
            raise RuntimeError("tracker not initialized")
        patch, side = self._search_patch(frame)
        crop_center = self.box[:2].copy()
        self.state, outputs, _ = self.model.track_frame(
            self.template_feat, patch, self.state)
        score = (torch.softmax(outputs.foreground, dim=1)[0, 1]
                 * torch.sigmoid(outputs.quality[0, 0]))
        window = self.window.to(score.dtype)
        blended = (1 - self.window_penalty) * score + self.window_penalty * window
        idx = int(torch.argmax(blended))
        row, col = divmod(idx, blended.shape[-1])
        crop_box = decode_boxes(outputs.location)[0, :, row, col].cpu().numpy()
        box = box_to_image(crop_box, crop_center, side, SEARCH_SIZE)
        h, w = frame.shape[:2]
        box[0] = min(max(box[0], 0.0), w - 1.0)
        box[1] = min(max(box[1], 0.0), h - 1.0)
        box[2] = min(max(box[2], 2.0), float(w))
        box[3] = min(max(box[3], 2.0), float(h))
        self.box = box
        return box.copy()


def track_offline(model, seq, window_penalty=0.3):
    """Track a whole sequence, one result per frame.

    The first frame's prediction is its ground-truth box. Returns
    (boxes, latencies_ms) with per-frame processing times measured around
    the model calls.
    """
    model.eval()
    tracker = SingleObjectTracker(model, window_penalty)
    boxes = np.empty((len(seq), 4), dtype=np.float64)
    latencies = np.empty(len(seq), dtype=np.float64)
    start = time.perf_counter()
    boxes[0] = tracker.init(seq.load_frame(0), seq.boxes[0])
    latencies[0] = (time.perf_counter() - start) * 1000.0
    for i in range(1, len(seq)):
        start = time.perf_counter()
        boxes[i] = tracker.update(seq.load_frame(i))
        latencies[i] = (time.perf_counter() - start) * 1000.0
    return boxes, latencies
