"""Frame preprocessing, clip/segment windowing, and the pluggable local-feature
backbone producing per-clip spatial feature grids."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .datamodel import ValidationError

STREAM_DIM = 1024  # per-stream pooled feature length
GRID_SPATIAL = (4, 4)
STREAM_CHANNELS = STREAM_DIM // (GRID_SPATIAL[0] * GRID_SPATIAL[1])  # 64

BACKBONE_KINDS = ("import_rgb_flow", "import_rgb_only", "import_flow_only", "synthetic")


@dataclass
class SegmentConfig:
    frames_per_clip: int = 16  # m
    clips_per_segment: int = 5  # K
    frame_size: tuple[int, int] = (224, 224)
    tail_policy: str = "pad_repeat_last"

    def __post_init__(self):
        if self.frames_per_clip <= 0 or self.clips_per_segment <= 0:
            raise ValidationError("clip and segment sizes must be positive")
        if self.tail_policy != "pad_repeat_last":
            raise ValidationError(f"unknown tail policy {self.tail_policy!r}")

    @property
    def segment_frames(self) -> int:
        return self.frames_per_clip * self.clips_per_segment


@dataclass
class BackboneSpec:
    kind: str = "import_rgb_flow"
    feature_root: str | None = None  # directory of per-video feature files
    seed: int = 0  # synthetic only

    def __post_init__(self):
        if self.kind not in BACKBONE_KINDS:
            raise ValidationError(f"unknown backbone kind {self.kind!r}")

    @property
    def grid_channels(self) -> int:
        """128 for the concatenated two-stream grids, 64 for single-stream."""
        return 2 * STREAM_CHANNELS if self.kind in ("import_rgb_flow", "synthetic") \
            else STREAM_CHANNELS

    @property
    def file_dim(self) -> int:
        return self.grid_channels * GRID_SPATIAL[0] * GRID_SPATIAL[1]


def preprocess_frame(frame: np.ndarray, config: SegmentConfig | None = None) -> np.ndarray:
    """Bilinear resize to the working resolution, then remove the per-channel
    mean of the resized frame."""
    config = config or SegmentConfig()
    frame = np.asarray(frame)
    if frame.size == 0:
        raise ValidationError("empty frame")
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValidationError(f"frame must be HxWx3, got shape {frame.shape}")
    h, w = config.frame_size
    resized = cv2.resize(frame.astype(np.float64), (w, h),
                         interpolation=cv2.INTER_LINEAR)
    out = resized - resized.mean(axis=(0, 1), keepdims=True)
    if not np.isfinite(out).all():
        raise ValidationError("non-finite values after preprocessing")
    return out


def segment_video(frame_count: int, config: SegmentConfig | None = None) -> list[np.ndarray]:
    """Consecutive non-overlapping windows of m*K frame indices; the final
    partial window repeats the last frame index."""
    config = config or SegmentConfig()
    if frame_count < 1:
        raise ValidationError(f"frame_count must be >= 1, got {frame_count}")
    seg = config.segment_frames
    windows = []
    for start in range(0, frame_count, seg):
        idx = np.arange(start, start + seg)
        idx = np.minimum(idx, frame_count - 1)
        windows.append(idx)
    return windows


def segment_valid_counts(frame_count: int, config: SegmentConfig | None = None) -> list[int]:
    """Number of unpadded frames in each window of segment_video."""
    config = config or SegmentConfig()
    seg = config.segment_frames
    return [min(seg, frame_count - start) for start in range(0, frame_count, seg)]


# ---------------------------------------------------------------------------
# Feature files: little-endian header (n_clips, dim) then row-major float32.

FEATURE_HEADER = struct.Struct("<II")


def feature_path(root, video_id: str) -> Path:
    return Path(root) / f"{video_id}.feat"


def write_feature_file(path, features: np.ndarray, provenance: str = "imported"):
    features = np.ascontiguousarray(features, dtype="<f4")
    if features.ndim != 2:
        raise ValidationError("feature array must be (n_clips, dim)")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(FEATURE_HEADER.pack(*features.shape))
        fh.write(features.tobytes())
    path.with_suffix(path.suffix + ".provenance.txt").write_text(provenance + "\n")


def read_feature_file(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"feature file missing: {path}")
    raw = path.read_bytes()
    n, dim = FEATURE_HEADER.unpack_from(raw)
    data = np.frombuffer(raw, dtype="<f4", offset=FEATURE_HEADER.size)
    if data.size != n * dim:
        raise ValidationError(f"feature file {path} is truncated")
    return data.reshape(n, dim)


def vector_to_grid(vec: np.ndarray) -> np.ndarray:
    """Row-major reshape of one 1024-vector to a (4, 4, 64) grid; two-stream
    2048-vectors become (4, 4, 128) with the streams concatenated on channels."""
    vec = np.asarray(vec)
    if vec.size == STREAM_DIM:
        return vec.reshape(*GRID_SPATIAL, STREAM_CHANNELS)
    if vec.size == 2 * STREAM_DIM:
        rgb = vec[:STREAM_DIM].reshape(*GRID_SPATIAL, STREAM_CHANNELS)
        flow = vec[STREAM_DIM:].reshape(*GRID_SPATIAL, STREAM_CHANNELS)
        return np.concatenate([rgb, flow], axis=-1)
    raise ValidationError(f"feature vector length {vec.size} is not 1024 or 2048")


def grid_to_vector(grid: np.ndarray) -> np.ndarray:
    """Inverse of vector_to_grid (bijective)."""
    grid = np.asarray(grid)
    if grid.shape == (*GRID_SPATIAL, STREAM_CHANNELS):
        return grid.reshape(-1)
    if grid.shape == (*GRID_SPATIAL, 2 * STREAM_CHANNELS):
        return np.concatenate(
            [grid[..., :STREAM_CHANNELS].reshape(-1),
             grid[..., STREAM_CHANNELS:].reshape(-1)]
        )
    raise ValidationError(f"unexpected grid shape {grid.shape}")


def _synthetic_vector(video_id: str, clip_index: int, seed: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}|{video_id}|{clip_index}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(2 * STREAM_DIM).astype(np.float32)


def extract_features(video_id: str, clip_indices, backbone: BackboneSpec) -> np.ndarray:
    """Per-clip feature grids for one segment: (K, 4, 4, C) with C = 128 for
    two-stream kinds and 64 for single-stream kinds."""
    clip_indices = list(clip_indices)
    if backbone.kind == "synthetic":
        grids = [vector_to_grid(_synthetic_vector(video_id, c, backbone.seed))
                 for c in clip_indices]
        return np.stack(grids)
    if backbone.feature_root is None:
        raise ValidationError("import backbones need a feature_root directory")
    table = read_feature_file(feature_path(backbone.feature_root, video_id))
    if table.shape[1] != backbone.file_dim:
        raise ValidationError(
            f"feature file for {video_id!r} has dim {table.shape[1]}, "
            f"backbone {backbone.kind!r} expects {backbone.file_dim}"
        )
    grids = []
    for c in clip_indices:
        if c >= table.shape[0]:
            raise ValidationError(
                f"feature file for {video_id!r} has {table.shape[0]} clips, "
                f"clip {c} requested"
            )
        vec = table[c]
        if not np.isfinite(vec).all():
            raise ValidationError(f"non-finite features in {video_id!r} clip {c}")
        grids.append(vector_to_grid(vec))
    return np.stack(grids)


def segment_clip_indices(window: np.ndarray, config: SegmentConfig) -> list[int]:
    """Global clip indices covered by one segment window."""
    m = config.frames_per_clip
    first_clip = int(window[0]) // m
    return [first_clip + j for j in range(config.clips_per_segment)]


def segment_feature_grids(video_id: str, frame_count: int,
                          config: SegmentConfig, backbone: BackboneSpec) -> np.ndarray:
    """All segments of a video as (n_segments, K, 4, 4, C)."""
    windows = segment_video(frame_count, config)
    out = []
    for window in windows:
        clips = segment_clip_indices(window, config)
        # padded tail clips beyond the video reuse the last real clip
        n_clips_total = max(1, -(-frame_count // config.frames_per_clip))
        clips = [min(c, n_clips_total - 1) for c in clips]
        out.append(extract_features(video_id, clips, backbone))
    return np.stack(out)


def num_clips(frame_count: int, config: SegmentConfig | None = None) -> int:
    """Clips covering the video, counting a partial tail clip."""
    config = config or SegmentConfig()
    return max(1, -(-frame_count // config.frames_per_clip))
