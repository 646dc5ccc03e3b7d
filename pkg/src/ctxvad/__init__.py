"""Fully-supervised video anomaly detection with local per-clip features, a
two-layer convolutional-recurrent global context stream, and a multi-task head
predicting the anomaly category and per-frame anomaly scores."""

from .datamodel import (
    CATEGORIES,
    AnnotationRecord,
    FrameLabelTrack,
    SplitSpec,
    UsageError,
    ValidationError,
    VideoEntry,
    aggregate_frame_labels,
    compute_stats,
    make_split,
    video_label,
)
from .heads import HeadConfig, HeadOutputs, LossConfig, forward_heads
from .metrics import ScoredTrack, UndefinedAUCError, accuracy, binarize, confusion, roc_auc
from .model import ModelConfig, SegmentModel
from .trainer import Checkpoint, SegmentExample, TrainConfig, build_examples, predict_video, train
from .videopipe import BackboneSpec, SegmentConfig, extract_features, preprocess_frame, segment_video

__version__ = "0.1.0"
