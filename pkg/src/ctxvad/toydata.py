"""Desk-scale synthetic data: a planted catalog plus feature files where
anomalous clips are offset by a fixed amount and each category carries a fixed
signature direction, so the model can verifiably learn both tasks."""

from __future__ import annotations

import numpy as np

from .datamodel import CATEGORIES, FrameLabelTrack, VideoEntry
from .videopipe import SegmentConfig, feature_path, num_clips, write_feature_file

ANOMALY_OFFSET = 1.0
CATEGORY_SCALE = 1.0
NOISE_SCALE = 0.1


def category_signature(cat_index: int, dim: int = 2048) -> np.ndarray:
    rng = np.random.default_rng(90_000 + cat_index)
    return (rng.standard_normal(dim) * CATEGORY_SCALE / np.sqrt(dim)).astype(np.float32)


def make_planted_dataset(feature_root, videos_per_category: int = 8,
                         frames_per_video: int = 80, seed: int = 0,
                         seg_config: SegmentConfig | None = None,
                         feature_dim: int = 2048):
    """Build a catalog of 14 categories x videos_per_category videos (half
    abnormal) and write matching feature files.

    Abnormal videos get one contiguous clip-aligned anomaly interval; the
    feature vectors of clips inside it are shifted by +ANOMALY_OFFSET on every
    entry. All clips of a video carry its category's signature direction.
    """
    seg_config = seg_config or SegmentConfig()
    m = seg_config.frames_per_clip
    rng = np.random.default_rng(seed)
    catalog = []
    for ci, cat in enumerate(CATEGORIES):
        signature = category_signature(ci, feature_dim) * np.sqrt(feature_dim)
        for vi in range(videos_per_category):
            vid = f"{cat.lower()}_{vi:03d}"
            abnormal = vi < videos_per_category // 2
            labels = np.zeros(frames_per_video, dtype=np.int8)
            n_clips = num_clips(frames_per_video, seg_config)
            if abnormal:
                # contiguous clip-aligned interval, at least one clip long
                start_clip = int(rng.integers(0, n_clips))
                length = int(rng.integers(1, n_clips - start_clip + 1))
                lo = start_clip * m
                hi = min((start_clip + length) * m, frames_per_video)
                labels[lo:hi] = 1
            feats = (rng.standard_normal((n_clips, feature_dim)) * NOISE_SCALE
                     ).astype(np.float32)
            feats += signature
            for c in range(n_clips):
                clip_frames = labels[c * m : (c + 1) * m]
                if clip_frames.any():
                    feats[c] += ANOMALY_OFFSET
            write_feature_file(feature_path(feature_root, vid), feats,
                               provenance="planted synthetic")
            catalog.append(
                VideoEntry(
                    video_id=vid,
                    category=cat,
                    frame_count=frames_per_video,
                    frame_labels=FrameLabelTrack(vid, labels),
                    feature_source=str(feature_path(feature_root, vid)),
                )
            )
    return catalog


def make_unlabeled_catalog(per_category: dict | None = None,
                           n_abnormal: int = 72, n_normal: int = 71,
                           frame_count: int = 100) -> list[VideoEntry]:
    """Label-only catalog (no feature files) for split and stats exercises.

    per_category optionally maps category name -> (n_abnormal, n_normal).
    """
    catalog = []
    for cat in CATEGORIES:
        abn, norm = (per_category or {}).get(cat, (n_abnormal, n_normal))
        for i in range(abn):
            labels = np.zeros(frame_count, dtype=np.int8)
            labels[10:60] = 1
            vid = f"{cat.lower()}_abn_{i:03d}"
            catalog.append(VideoEntry(vid, cat, frame_count,
                                      FrameLabelTrack(vid, labels)))
        for i in range(norm):
            vid = f"{cat.lower()}_norm_{i:03d}"
            catalog.append(VideoEntry(vid, cat, frame_count,
                                      FrameLabelTrack(vid, np.zeros(frame_count,
                                                                    dtype=np.int8))))
    return catalog
