"""Synthetic moving-square videos for desk-scale training and fixtures."""

import os

import cv2
import numpy as np


def moving_square_clip(n_frames, image_size=360, square_size=48,
                       velocity=(6, 4), start=None, color=(40, 200, 90),
                       background=16, rng=None):
    """Frames and center-format boxes of a square translating at constant
    velocity, reflected off the image borders."""
    rng = np.random.default_rng() if rng is None else rng
    half = square_size / 2.0
    lo, hi = half, image_size - half
    if start is None:
        start = (rng.uniform(lo + 10, hi - 10), rng.uniform(lo + 10, hi - 10))
    x, y = float(start[0]), float(start[1])
    vx, vy = float(velocity[0]), float(velocity[1])
    frames, boxes = [], []
    for _ in range(n_frames):
        frame = np.full((image_size, image_size, 3), background, dtype=np.uint8)
        x1, y1 = int(round(x - half)), int(round(y - half))
        cv2.rectangle(frame, (x1, y1), (x1 + square_size - 1, y1 + square_size - 1),
                      color, thickness=-1)
        frames.append(frame)
        boxes.append([x, y, float(square_size), float(square_size)])
        x += vx
        y += vy
        if not lo <= x <= hi:
            vx = -vx
            x = min(max(x, lo), hi)
        if not lo <= y <= hi:
            vy = -vy
            y = min(max(y, lo), hi)
    return frames, np.array(boxes, dtype=np.float64)


def make_clip_dataset(n_clips=10, clip_len=2, image_size=360, seed=0):
    """Clips with varied square sizes, speeds, and colors; deterministic."""
    rng = np.random.default_rng(seed)
    clips = []
    for _ in range(n_clips):
        size = int(rng.integers(36, 64))
        speed = rng.uniform(4, 9)
        angle = rng.uniform(0, 2 * np.pi)
        color = tuple(int(c) for c in rng.integers(70, 255, size=3))
        clips.append(moving_square_clip(
            clip_len, image_size=image_size, square_size=size,
            velocity=(speed * np.cos(angle), speed * np.sin(angle)),
            color=color, rng=rng))
    return clips


def write_sequence_dir(path, frames, boxes):
    """Write frames and boxes as an OTB-style sequence directory.

    Images go to img/0001.jpg onwards; groundtruth.txt holds one top-left
    x,y,w,h line per frame.
    """
    img_dir = os.path.join(path, "img")
    os.makedirs(img_dir, exist_ok=True)
    for i, frame in enumerate(frames):
        cv2.imwrite(os.path.join(img_dir, f"{i + 1:04d}.jpg"), frame)
    with open(os.path.join(path, "groundtruth.txt"), "w") as f:
        for cx, cy, w, h in boxes:
            f.write(f"{cx - w / 2:.2f},{cy - h / 2:.2f},{w:.2f},{h:.2f}\n")
    return path
