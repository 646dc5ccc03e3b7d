"""Video catalog, label aggregation, split generation, and dataset statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Fixed category order (case-insensitive alphabetical) so one-hot indices stay
# stable across catalog files and checkpoints.
CATEGORIES = (
    "Crash",
    "Crowd",
    "Destroy",
    "Drop",
    "Falling",
    "FallIntoWater",
    "Fighting",
    "Fire",
    "Hurt",
    "Loitering",
    "Panic",
    "Thiefing",
    "Trampled",
    "Violence",
)
NUM_CATEGORIES = len(CATEGORIES)
CATEGORY_INDEX = {name: i for i, name in enumerate(CATEGORIES)}

assert list(CATEGORIES) == sorted(CATEGORIES, key=str.lower)

SPLIT_MODES = ("unsupervised", "weakly", "fully")


class ValidationError(ValueError):
    """Raised when input data violates a documented invariant."""


class UsageError(ValueError):
    """Raised when an operation is called in an unsupported way."""


def category_index(name: str) -> int:
    try:
        return CATEGORY_INDEX[name]
    except KeyError:
        raise ValidationError(f"unknown category {name!r}") from None


def category_fingerprint() -> str:
    """Stable fingerprint of the category ordering, stored in checkpoints."""
    return ",".join(CATEGORIES)


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's abnormal intervals for one video (inclusive frame ranges)."""

    video_id: str
    annotator_id: str
    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self):
        norm = normalize_intervals(self.intervals)
        object.__setattr__(self, "intervals", norm)

    def to_payload(self) -> dict:
        return {
            "video_id": self.video_id,
            "annotator_id": self.annotator_id,
            "intervals": [[s, e] for s, e in self.intervals],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AnnotationRecord":
        for key in ("video_id", "annotator_id", "intervals"):
            if key not in payload:
                raise ValidationError(f"annotation record missing field {key!r}")
        intervals = []
        for pair in payload["intervals"]:
            if len(pair) != 2:
                raise ValidationError("intervals must be [start, end] pairs")
            s, e = int(pair[0]), int(pair[1])
            if s < 0:
                raise ValidationError(f"interval start {s} is negative")
            if e < s:
                raise ValidationError(f"interval end {e} precedes start {s}")
            intervals.append((s, e))
        return cls(
            video_id=str(payload["video_id"]),
            annotator_id=str(payload["annotator_id"]),
            intervals=tuple(intervals),
        )


def normalize_intervals(intervals) -> tuple[tuple[int, int], ...]:
    """Sort inclusive intervals and merge overlapping or adjacent ones."""
    cleaned = []
    for s, e in intervals:
        s, e = int(s), int(e)
        if s < 0:
            raise ValidationError(f"interval start {s} is negative")
        if e < s:
            raise ValidationError(f"interval end {e} precedes start {s}")
        cleaned.append((s, e))
    cleaned.sort()
    merged: list[tuple[int, int]] = []
    for s, e in cleaned:
        if merged and s <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return tuple(merged)


@dataclass(frozen=True)
class FrameLabelTrack:
    """Per-frame binary labels (1 = abnormal) for one video."""

    video_id: str
    labels: np.ndarray  # shape (frame_count,), values in {0, 1}

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.ndim != 1:
            raise ValidationError("label track must be one-dimensional")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValidationError("label track values must be 0 or 1")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size


def intervals_to_track(intervals, frame_count: int) -> np.ndarray:
    track = np.zeros(frame_count, dtype=np.int8)
    for s, e in intervals:
        track[s : e + 1] = 1
    return track


def track_to_rle(labels: np.ndarray) -> list[list[int]]:
    """Run-length encode a binary track as [value, count] pairs."""
    labels = np.asarray(labels, dtype=np.int8)
    runs: list[list[int]] = []
    for v in labels:
        if runs and runs[-1][0] == int(v):
            runs[-1][1] += 1
        else:
            runs.append([int(v), 1])
    return runs


def rle_to_track(runs, frame_count: int) -> np.ndarray:
    labels = np.concatenate(
        [np.full(count, value, dtype=np.int8) for value, count in runs]
    ) if runs else np.zeros(0, dtype=np.int8)
    if labels.size != frame_count:
        raise ValidationError(
            f"run-length track decodes to {labels.size} frames, expected {frame_count}"
        )
    return labels


@dataclass
class VideoEntry:
    """One catalogued video: identity, category, labels, and feature source."""

    video_id: str
    category: str
    frame_count: int
    frame_labels: FrameLabelTrack
    fps: float = 25.0
    feature_source: str = "synthetic"

    def __post_init__(self):
        category_index(self.category)
        if self.frame_count <= 0:
            raise ValidationError(f"frame_count must be positive, got {self.frame_count}")
        if self.fps <= 0:
            raise ValidationError(f"fps must be positive, got {self.fps}")
        if len(self.frame_labels) != self.frame_count:
            raise ValidationError(
                f"label track length {len(self.frame_labels)} != frame_count {self.frame_count}"
            )

    @property
    def is_abnormal(self) -> bool:
        return bool(self.frame_labels.labels.any())


@dataclass
class SplitSpec:
    """Train/test membership plus which labels training is allowed to read."""

    mode: str
    seed: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    visible_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in SPLIT_MODES:
            raise ValidationError(f"unknown split mode {self.mode!r}")
        overlap = set(self.train_ids) & set(self.test_ids)
        if overlap:
            raise ValidationError(f"train/test overlap: {sorted(overlap)[:3]}")


VISIBLE_LABELS_BY_MODE = {
    "unsupervised": {"video_labels": False, "frame_labels": False, "categories": False},
    "weakly": {"video_labels": True, "frame_labels": False, "categories": True},
    "fully": {"video_labels": True, "frame_labels": True, "categories": True},
}


def aggregate_frame_labels(records, frame_count: int) -> FrameLabelTrack:
    """Average independent annotators' binary tracks; 1 where the mean >= 0.5.

    The tie rule is inclusive (mean exactly 0.5 -> abnormal), which makes the
    protocol equal to strict majority vote for an odd annotator count.
    """
    records = list(records)
    if not records:
        raise UsageError("aggregate_frame_labels needs at least one annotation record")
    video_id = records[0].video_id
    for rec in records:
        if rec.video_id != video_id:
            raise ValidationError(
                f"records mix videos {video_id!r} and {rec.video_id!r}"
            )
        for s, e in rec.intervals:
            if e >= frame_count:
                raise ValidationError(
                    f"annotator {rec.annotator_id!r} marks frame {e} "
                    f"beyond frame_count {frame_count}"
                )
    votes = np.zeros(frame_count, dtype=np.float64)
    for rec in records:
        votes += intervals_to_track(rec.intervals, frame_count)
    mean = votes / len(records)
    labels = (mean >= 0.5).astype(np.int8)
    return FrameLabelTrack(video_id=video_id, labels=labels)


def video_label(track: FrameLabelTrack) -> bool:
    """A video is abnormal iff any frame is abnormal."""
    if len(track) == 0:
        raise ValidationError("video_label needs a non-empty track")
    return bool(track.labels.any())


def make_split(catalog, mode: str, per_category_test=(20, 20), seed: int = 0) -> SplitSpec:
    """Per-category random test draw; train is the remainder.

    Unsupervised mode shares the fully-supervised test set and keeps only the
    normal videos of the fully-supervised train set.
    """
    if mode not in SPLIT_MODES:
        raise ValidationError(f"unknown split mode {mode!r}")
    n_abn, n_norm = per_category_test
    by_cat_abn: dict[str, list[str]] = {c: [] for c in CATEGORIES}
    by_cat_norm: dict[str, list[str]] = {c: [] for c in CATEGORIES}
    for entry in catalog:
        (by_cat_abn if entry.is_abnormal else by_cat_norm)[entry.category].append(
            entry.video_id
        )
    rng = np.random.default_rng(seed)
    test_ids: list[str] = []
    for cat in CATEGORIES:
        abn, norm = sorted(by_cat_abn[cat]), sorted(by_cat_norm[cat])
        if not abn and not norm:
            continue
        if len(abn) < n_abn:
            raise ValidationError(
                f"category {cat!r} has {len(abn)} abnormal videos, needs {n_abn}"
            )
        if len(norm) < n_norm:
            raise ValidationError(
                f"category {cat!r} has {len(norm)} normal videos, needs {n_norm}"
            )
        test_ids.extend(rng.choice(abn, size=n_abn, replace=False))
        test_ids.extend(rng.choice(norm, size=n_norm, replace=False))
    test_set = set(test_ids)
    train_ids = [e.video_id for e in catalog if e.video_id not in test_set]
    if mode == "unsupervised":
        abnormal_ids = {e.video_id for e in catalog if e.is_abnormal}
        train_ids = [v for v in train_ids if v not in abnormal_ids]
    return SplitSpec(
        mode=mode,
        seed=seed,
        train_ids=tuple(train_ids),
        test_ids=tuple(sorted(test_set)),
        visible_labels=dict(VISIBLE_LABELS_BY_MODE[mode]),
    )


@dataclass
class CatalogStats:
    per_video_ratio: dict  # video_id -> abnormal-frame fraction
    per_category_ratio: dict  # category -> mean ratio over abnormal videos, or None
    frame_counts: dict  # video_id -> frame count


def compute_stats(catalog) -> CatalogStats:
    catalog = list(catalog)
    if not catalog:
        raise UsageError("compute_stats needs a non-empty catalog")
    per_video = {
        e.video_id: float(e.frame_labels.labels.sum()) / e.frame_count for e in catalog
    }
    per_category: dict[str, float | None] = {}
    for cat in CATEGORIES:
        ratios = [per_video[e.video_id] for e in catalog
                  if e.category == cat and e.is_abnormal]
        per_category[cat] = float(np.mean(ratios)) if ratios else None
    frame_counts = {e.video_id: e.frame_count for e in catalog}
    return CatalogStats(per_video, per_category, frame_counts)


# ---------------------------------------------------------------------------
# File formats: JSON-lines catalog, JSON annotation records, JSON split spec.

def save_catalog(catalog, path):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(json.dumps({"category_order": list(CATEGORIES)}) + "\n")
        for e in catalog:
            rec = {
                "video_id": e.video_id,
                "category": e.category,
                "frame_count": e.frame_count,
                "fps": e.fps,
                "rle_labels": track_to_rle(e.frame_labels.labels),
                "feature_source": e.feature_source,
            }
            fh.write(json.dumps(rec) + "\n")


def load_catalog(path) -> list[VideoEntry]:
    path = Path(path)
    entries: list[VideoEntry] = []
    with path.open() as fh:
        header = json.loads(fh.readline())
        order = header.get("category_order")
        if order != list(CATEGORIES):
            raise ValidationError(f"catalog {path} has an incompatible category order")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            labels = rle_to_track(rec["rle_labels"], rec["frame_count"])
            entries.append(
                VideoEntry(
                    video_id=rec["video_id"],
                    category=rec["category"],
                    frame_count=rec["frame_count"],
                    fps=rec.get("fps", 25.0),
                    frame_labels=FrameLabelTrack(rec["video_id"], labels),
                    feature_source=rec.get("feature_source", "synthetic"),
                )
            )
    return entries


def annotation_payload_bytes(record: AnnotationRecord) -> bytes:
    """Canonical serialization, shared byte-exactly by files and wire posts."""
    return (json.dumps(record.to_payload(), separators=(",", ":")) + "\n").encode()


def save_annotation_record(record: AnnotationRecord, path):
    Path(path).write_bytes(annotation_payload_bytes(record))


def load_annotation_record(path) -> AnnotationRecord:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed annotation record file {path}: {exc}") from exc
    return AnnotationRecord.from_payload(payload)


def save_split(split: SplitSpec, path):
    Path(path).write_text(
        json.dumps(
            {
                "mode": split.mode,
                "seed": split.seed,
                "train_ids": list(split.train_ids),
                "test_ids": list(split.test_ids),
                "visible_labels": split.visible_labels,
            },
            indent=2,
        )
        + "\n"
    )


def load_split(path) -> SplitSpec:
    data = json.loads(Path(path).read_text())
    return SplitSpec(
        mode=data["mode"],
        seed=data["seed"],
        train_ids=tuple(data["train_ids"]),
        test_ids=tuple(data["test_ids"]),
        visible_labels=data.get("visible_labels", {}),
    )
