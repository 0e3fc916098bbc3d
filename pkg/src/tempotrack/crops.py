"""Context-padded square crops around a target box.

The search region around a box of size (w, h) is a square of side
2 * sqrt((w + p) * (h + p)) with p = (w + h) / 2, resized to the search
input size; the template uses the same context square without the factor 2,
resized to the template input size. Out-of-frame areas are padded with the
per-channel image mean.
"""

import math

import cv2
import numpy as np
import torch

SEARCH_CONTEXT_SCALE = 2.0


def context_side(box, scale=1.0):
    """Side of the context square for a center-format (x, y, w, h) box."""
    w, h = float(box[2]), float(box[3])
    p = (w + h) / 2.0
    return scale * math.sqrt((w + p) * (h + p))


def crop_subwindow(image, center, side, out_size):
    """Square crop of the given side around center, resized to out_size.

    image: (H, W, 3) uint8 array. Returns (out_size, out_size, 3) uint8.
    """
    h, w = image.shape[:2]
    half = side / 2.0
    x1 = int(round(center[0] - half))
    y1 = int(round(center[1] - half))
    size = max(1, int(round(side)))
    x2 = x1 + size
    y2 = y1 + size
    pad_left = max(0, -x1)
    pad_top = max(0, -y1)
    pad_right = max(0, x2 - w)
    pad_bottom = max(0, y2 - h)
    patch = np.empty((size, size, 3), dtype=image.dtype)
    patch[:] = image.reshape(-1, 3).mean(axis=0).astype(image.dtype)
    sx1, sy1 = max(0, x1), max(0, y1)
    sx2, sy2 = min(w, x2), min(h, y2)
    if sx2 > sx1 and sy2 > sy1:
        patch[pad_top:size - pad_bottom, pad_left:size - pad_right] = \
            image[sy1:sy2, sx1:sx2]
    return cv2.resize(patch, (out_size, out_size), interpolation=cv2.INTER_LINEAR)


def patch_to_tensor(patch, dtype=torch.float32):
    """(H, W, 3) uint8 patch to a (1, 3, H, W) tensor in [0, 1]."""
    t = torch.from_numpy(np.ascontiguousarray(patch)).to(dtype) / 255.0
    return t.permute(2, 0, 1).unsqueeze(0)


def box_to_crop(box, crop_center, side, out_size):
    """Map an image-coordinate center box into crop coordinates."""
    scale = out_size / side
    cx = (box[0] - crop_center[0]) * scale + (out_size - 1) / 2.0
    cy = (box[1] - crop_center[1]) * scale + (out_size - 1) / 2.0
    return np.array([cx, cy, box[2] * scale, box[3] * scale], dtype=np.float64)


def box_to_image(box, crop_center, side, out_size):
    """Inverse of box_to_crop."""
    scale = side / out_size
    cx = (box[0] - (out_size - 1) / 2.0) * scale + crop_center[0]
    cy = (box[1] - (out_size - 1) / 2.0) * scale + crop_center[1]
    return np.array([cx, cy, box[2] * scale, box[3] * scale], dtype=np.float64)
