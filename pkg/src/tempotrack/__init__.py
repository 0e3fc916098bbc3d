"""Temporal-context single-object tracker with a latency-aware online
evaluation harness."""

from .attention import (MultiHeadAttention, map_to_tokens,
                        scaled_dot_attention, tokens_to_map)
from .backbone import (RESPONSE_SIZE, SEARCH_SIZE, TEMPLATE_SIZE,
                       TrackingBackbone, depthwise_correlation)
from .config import Config, config_from_dict, load_config
from .heads import HeadOutputs, PredictionHeads, decode_boxes, make_targets
from .losses import (LossParts, box_iou, center_distance_loss,
                     classification_losses, overlap_loss, tracking_loss)
from .metrics import MetricsReport, compute_metrics, iou_xywh
from .model import TrackerNet, TrackerState
from .refinement import SimilarityRefiner
from .sequence import IngestionError, Sequence, load_sequence
from .simulate import LatencyProfile, OnlinePairing, simulate_online
from .synthetic import make_clip_dataset, moving_square_clip, write_sequence_dir
from .temporal_conv import (CalibratedConv2d, QueueCalibration,
                            TemporalCalibration)
from .tracking import SingleObjectTracker, track_offline
from .training import (CurriculumSchedule, LrSchedule, learning_rate,
                       load_checkpoint, make_optimizer, save_checkpoint,
                       train_step, video_length)

__version__ = "0.1.0"

__all__ = [
    "CalibratedConv2d", "Config", "CurriculumSchedule", "HeadOutputs",
    "IngestionError", "LatencyProfile", "LossParts", "LrSchedule",
    "MetricsReport", "MultiHeadAttention", "OnlinePairing", "PredictionHeads",
    "QueueCalibration", "RESPONSE_SIZE", "SEARCH_SIZE", "Sequence",
    "SimilarityRefiner", "SingleObjectTracker", "TEMPLATE_SIZE",
    "TemporalCalibration", "TrackerNet", "TrackerState", "TrackingBackbone",
    "box_iou", "center_distance_loss", "classification_losses",
    "compute_metrics", "config_from_dict", "decode_boxes",
    "depthwise_correlation", "iou_xywh", "learning_rate", "load_checkpoint",
    "load_config", "load_sequence", "make_clip_dataset", "make_optimizer",
    "make_targets", "map_to_tokens", "moving_square_clip", "overlap_loss",
    "save_checkpoint", "scaled_dot_attention", "simulate_online",
    "tokens_to_map", "track_offline", "tracking_loss", "train_step",
    "video_length", "write_sequence_dir",
]
