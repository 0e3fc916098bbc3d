"""One-pass evaluation metrics for predicted vs ground-truth boxes.

Conventions: a frame counts toward precision when its center location error
is <= the pixel threshold (so a CLE of exactly 20 px passes the 20 px
threshold); the success curve uses IoU >= threshold, which makes a perfect
run score an AUC of exactly 1.0; the overlap rates SR_i use the strict
IoU > i. Normalized precision divides the CLE by the ground-truth box scale
sqrt(w * h).
"""

from dataclasses import dataclass, field

import numpy as np

PRECISION_THRESHOLDS = np.arange(0.0, 51.0, 1.0)
NORM_PRECISION_THRESHOLDS = np.linspace(0.0, 0.5, 51)
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 21)
PRECISION_PIXELS = 20.0
NORM_PRECISION_AT = 0.20


def iou_xywh(a, b):
    """IoU of center-format boxes; a and b are (..., 4) arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ax1, ax2 = a[..., 0] - a[..., 2] / 2, a[..., 0] + a[..., 2] / 2
    ay1, ay2 = a[..., 1] - a[..., 3] / 2, a[..., 1] + a[..., 3] / 2
    bx1, bx2 = b[..., 0] - b[..., 2] / 2, b[..., 0] + b[..., 2] / 2
    by1, by2 = b[..., 1] - b[..., 3] / 2, b[..., 1] + b[..., 3] / 2
    iw = np.clip(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0, None)
    ih = np.clip(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0, None)
    inter = iw * ih
    union = a[..., 2] * a[..., 3] + b[..., 2] * b[..., 3] - inter
    return inter / np.maximum(union, 1e-12)


def center_error(a, b):
    """Euclidean distance between box centers in pixels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.hypot(a[..., 0] - b[..., 0], a[..., 1] - b[..., 1])


@dataclass
class MetricsReport:
    mode: str
    sequence: str
    n_frames: int
    precision: float
    norm_precision: float
    success_auc: float
    ao: float
    sr_050: float
    sr_075: float
    mean_fps: float | None
    precision_curve: list = field(default_factory=list)
    norm_precision_curve: list = field(default_factory=list)
    success_curve: list = field(default_factory=list)

    def as_dict(self):
        return {
            "mode": self.mode,
            "sequence": self.sequence,
            "n_frames": self.n_frames,
            "precision": self.precision,
            "norm_precision": self.norm_precision,
            "success_auc": self.success_auc,
            "ao": self.ao,
            "sr_050": self.sr_050,
            "sr_075": self.sr_075,
            "mean_fps": self.mean_fps,
            "precision_curve": list(self.precision_curve),
            "norm_precision_curve": list(self.norm_precision_curve),
            "success_curve": list(self.success_curve),
        }


def compute_metrics(pred_boxes, gt_boxes, mode="offline", latencies_ms=None,
                    sequence=""):
    """Precision/success curves plus AO and SR rates over paired box lists."""
    pred = np.asarray(pred_boxes, dtype=np.float64)
    gt = np.asarray(gt_boxes, dtype=np.float64)
    if pred.ndim != 2 or pred.shape[1] != 4 or pred.shape != gt.shape:
        raise ValueError(
            f"expected matching (n, 4) box arrays, got {pred.shape} vs {gt.shape}")
    if len(pred) == 0:
        raise ValueError("cannot compute metrics over zero frames")
    iou = iou_xywh(pred, gt)
    cle = center_error(pred, gt)
    scale = np.sqrt(gt[:, 2] * gt[:, 3])
    norm_cle = cle / np.maximum(scale, 1e-12)

    precision_curve = [float(np.mean(cle <= t)) for t in PRECISION_THRESHOLDS]
    norm_curve = [float(np.mean(norm_cle <= t)) for t in NORM_PRECISION_THRESHOLDS]
    success_curve = [float(np.mean(iou >= t)) for t in SUCCESS_THRESHOLDS]

    mean_fps = None
    if latencies_ms is not None and len(latencies_ms) > 0:
        total = float(np.sum(latencies_ms))
        mean_fps = 1000.0 * len(latencies_ms) / total if total > 0 else None

    return MetricsReport(
        mode=mode,
        sequence=sequence,
        n_frames=len(pred),
        precision=precision_curve[int(PRECISION_PIXELS)],
        norm_precision=norm_curve[
            int(round(NORM_PRECISION_AT / (NORM_PRECISION_THRESHOLDS[1] -
                                           NORM_PRECISION_THRESHOLDS[0])))],
        success_auc=float(np.mean(success_curve)),
        ao=float(np.mean(iou)),
        sr_050=float(np.mean(iou > 0.5)),
        sr_075=float(np.mean(iou > 0.75)),
        mean_fps=mean_fps,
        precision_curve=precision_curve,
        norm_precision_curve=norm_curve,
        success_curve=success_curve,
    )
