"""OTB-style sequence ingestion.

A sequence directory holds ordered images (under img/ or at the top level)
and a groundtruth.txt with one comma-separated top-left x,y,w,h line per
frame. Boxes are converted to center format on load.
"""

import glob
import os
from dataclasses import dataclass, field

import cv2
import numpy as np

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp")


class IngestionError(ValueError):
    pass


@dataclass
class Sequence:
    name: str
    image_paths: list
    boxes: np.ndarray  # (n, 4) center-format x, y, w, h
    fps: float = 30.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.image_paths)

    @property
    def frame_period_ms(self):
        return 1000.0 / self.fps

    def timestamps_ms(self):
        """Arrival time of each frame at the nominal frame rate."""
        return np.arange(len(self)) * self.frame_period_ms

    def load_frame(self, index):
        path = self.image_paths[index]
        if path not in self._cache:
            image = cv2.imread(path, cv2.IMREAD_COLOR)
            if image is None:
                raise IngestionError(f"unreadable image: {path}")
            self._cache[path] = image
        return self._cache[path]


def _find_images(path):
    img_dir = os.path.join(path, "img")
    roots = [img_dir] if os.path.isdir(img_dir) else [path]
    files = []
    for root in roots:
        for entry in sorted(os.listdir(root)):
            if entry.lower().endswith(IMAGE_EXTENSIONS):
                files.append(os.path.join(root, entry))
    return files


def _find_groundtruth(path):
    for name in ("groundtruth.txt", "groundtruth_rect.txt"):
        candidate = os.path.join(path, name)
        if os.path.isfile(candidate):
            return candidate
    txts = glob.glob(os.path.join(path, "*.txt"))
    if len(txts) == 1:
        return txts[0]
    raise IngestionError(f"no groundtruth file found in {path}")


def load_sequence(path, fps=30.0):
    """Load and validate a sequence directory."""
    if fps <= 0:
        raise IngestionError(f"fps must be positive, got {fps}")
    if not os.path.isdir(path):
        raise IngestionError(f"not a directory: {path}")
    images = _find_images(path)
    gt_path = _find_groundtruth(path)
    boxes = []
    with open(gt_path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.replace("\t", ",").split(",")
            if len(parts) != 4:
                raise IngestionError(
                    f"{gt_path} line {lineno}: expected 4 comma-separated "
                    f"values, got {line!r}")
            try:
                x, y, w, h = (float(p) for p in parts)
            except ValueError:
                raise IngestionError(
                    f"{gt_path} line {lineno}: non-numeric value in {line!r}")
            if w <= 0 or h <= 0:
                raise IngestionError(
                    f"{gt_path} line {lineno}: non-positive box size "
                    f"w={w}, h={h}")
            boxes.append([x + w / 2, y + h / 2, w, h])
    if len(boxes) < 2:
        raise IngestionError(f"{path}: a sequence needs at least 2 frames")
    if len(images) != len(boxes):
        raise IngestionError(
            f"{path}: {len(images)} images but {len(boxes)} groundtruth lines")
    return Sequence(name=os.path.basename(os.path.normpath(path)),
                    image_paths=images,
                    boxes=np.array(boxes, dtype=np.float64),
                    fps=fps)
