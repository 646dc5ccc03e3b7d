"""Mini-batch training of the segment model, checkpointing, and whole-video
prediction assembly."""

from __future__ import annotations

import json
import struct
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import videopipe
from .datamodel import (
    CATEGORIES,
    SplitSpec,
    UsageError,
    ValidationError,
    category_fingerprint,
    category_index,
)
from .heads import LossConfig
from .metrics import ScoredTrack, UndefinedAUCError, accuracy, roc_auc
from .model import ModelConfig, SegmentModel
from .videopipe import BackboneSpec, SegmentConfig


@dataclass
class TrainConfig:
    learning_rate: float = 3e-4
    weight_decay: float = 5e-4
    batch_size: int = 60
    max_epochs: int = 10
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    checkpoint_every: int = 0  # epochs; 0 disables periodic checkpoints
    broadcast_video_labels: bool = False  # video-level labels filled to frames

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")


@dataclass
class SegmentExample:
    video_id: str
    segment_index: int
    features: np.ndarray  # (K, 4, 4, C)
    frame_targets: np.ndarray  # (m*K,), binary
    mask: np.ndarray  # (m*K,), 1 on real frames, 0 on padded tail
    category_target: np.ndarray  # one-hot over the 14 categories


def build_examples(split: SplitSpec, catalog, seg_config: SegmentConfig,
                   backbone: BackboneSpec) -> list[SegmentExample]:
    """One example per segment window of every training video, in catalog order."""
    if split.mode != "fully":
        raise UsageError(
            f"the fully-supervised trainer cannot use a {split.mode!r} split; "
            "frame labels must be visible"
        )
    by_id = {e.video_id: e for e in catalog}
    examples: list[SegmentExample] = []
    for vid in split.train_ids:
        entry = by_id[vid]
        windows = videopipe.segment_video(entry.frame_count, seg_config)
        grids = videopipe.segment_feature_grids(vid, entry.frame_count,
                                                seg_config, backbone)
        valid = videopipe.segment_valid_counts(entry.frame_count, seg_config)
        one_hot = np.zeros(len(CATEGORIES), dtype=np.float32)
        one_hot[category_index(entry.category)] = 1.0
        labels = entry.frame_labels.labels
        for si, (window, n_valid) in enumerate(zip(windows, valid)):
            targets = labels[window].astype(np.float32)
            mask = np.zeros(seg_config.segment_frames, dtype=np.float32)
            mask[:n_valid] = 1.0
            targets = targets * mask  # padded positions masked out
            examples.append(
                SegmentExample(vid, si, grids[si], targets, mask, one_hot)
            )
    return examples


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    train_auc: float | None
    train_acc: float
    wall_time: float


class AdamState:
    """Decoupled weight decay variant of the adaptive-moment optimizer."""

    def __init__(self, params: dict, config: TrainConfig):
        self.config = config
        self.step = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def update(self, params: dict, grads: dict):
        cfg = self.config
        self.step += 1
        bc1 = 1.0 - cfg.beta1**self.step
        bc2 = 1.0 - cfg.beta2**self.step
        for name, p in params.items():
            g = grads[name].astype(p.dtype)
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1 - cfg.beta2) * g * g
            step = (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)
            p -= (cfg.learning_rate * (step + cfg.weight_decay * p)).astype(p.dtype)


def _batch_arrays(examples, dtype):
    feats = np.stack([e.features for e in examples]).astype(dtype)
    cls = np.stack([e.category_target for e in examples]).astype(dtype)
    frames = np.stack([e.frame_targets for e in examples]).astype(dtype)
    mask = np.stack([e.mask for e in examples]).astype(dtype)
    return feats, cls, frames, mask


def train(config: TrainConfig, examples, model: SegmentModel,
          log_path=None, checkpoint_dir=None) -> "Checkpoint":
    """Minimize the weighted multi-task loss over mini-batches of segments."""
    examples = list(examples)
    if not examples:
        raise UsageError("train needs a non-empty example stream")
    adam = AdamState(model.named_params(), config)
    dtype = model.config.np_dtype
    log_fh = open(log_path, "a") if log_path else None
    try:
        for epoch in range(1, config.max_epochs + 1):
            t0 = time.monotonic()
            rng = np.random.default_rng(config.seed + epoch)
            order = rng.permutation(len(examples))
            losses = []
            all_scores, all_targets, all_masks = [], [], []
            pred_cats, true_cats = [], []
            for start in range(0, len(order), config.batch_size):
                batch = [examples[i] for i in order[start : start + config.batch_size]]
                feats, cls, frames, mask = _batch_arrays(batch, dtype)
                batch_name = (f"epoch {epoch}, batch starting at example {start} "
                              f"({batch[0].video_id})")
                try:
                    total, grads, outputs = model.loss_and_grads(
                        feats, cls, frames, mask, config.loss
                    )
                except ValidationError as exc:
                    raise ValidationError(f"{exc} [{batch_name}]") from exc
                if not np.isfinite(total):
                    raise ValidationError(f"non-finite loss in {batch_name}")
                losses.append(total / len(batch))
                adam.update(model.named_params(), grads)
                all_scores.append(outputs.frame_scores)
                all_targets.append(frames)
                all_masks.append(mask)
                pred_cats.extend(np.argmax(outputs.class_probs, axis=1))
                true_cats.extend(np.argmax(cls, axis=1))
            record = _epoch_record(epoch, losses, all_scores, all_targets,
                                   all_masks, pred_cats, true_cats, t0)
            if log_fh:
                log_fh.write(json.dumps(asdict(record)) + "\n")
                log_fh.flush()
            if (checkpoint_dir and config.checkpoint_every
                    and epoch % config.checkpoint_every == 0):
                ckpt = Checkpoint.from_model(model, adam, epoch, config)
                ckpt.save(Path(checkpoint_dir) / f"epoch_{epoch:04d}.ckpt")
    finally:
        if log_fh:
            log_fh.close()
    return Checkpoint.from_model(model, adam, config.max_epochs, config)


def _epoch_record(epoch, losses, scores, targets, masks, pred_cats, true_cats, t0):
    scores = np.concatenate([s.ravel() for s in scores])
    targets = np.concatenate([t.ravel() for t in targets])
    mask = np.concatenate([m.ravel() for m in masks]).astype(bool)
    try:
        auc = roc_auc(
            [ScoredTrack("train", scores[mask], targets[mask].astype(np.int8))]
        ).auc
    except UndefinedAUCError:
        auc = None
    acc = accuracy(pred_cats, true_cats)
    return EpochRecord(
        epoch=epoch,
        mean_loss=float(np.mean(losses)),
        train_auc=auc,
        train_acc=acc,
        wall_time=time.monotonic() - t0,
    )


# ---------------------------------------------------------------------------
# Checkpoint: JSON manifest + named little-endian float32 arrays.

CKPT_MAGIC = b"CVCK"


@dataclass
class Checkpoint:
    model_config: ModelConfig
    arrays: dict  # parameter name -> ndarray
    moments: dict  # "m.<name>" / "v.<name>" -> ndarray
    epoch: int
    train_config_snapshot: dict
    category_fingerprint: str = field(default_factory=category_fingerprint)

    @classmethod
    def from_model(cls, model: SegmentModel, adam: AdamState | None,
                   epoch: int, config: TrainConfig | None) -> "Checkpoint":
        arrays = {k: v.copy() for k, v in model.named_params().items()}
        moments = {}
        if adam is not None:
            moments.update({f"m.{k}": v.copy() for k, v in adam.m.items()})
            moments.update({f"v.{k}": v.copy() for k, v in adam.v.items()})
            moments["adam.step"] = np.array([adam.step], dtype=np.float32)
        snapshot = {}
        if config is not None:
            snapshot = asdict(config)
        return cls(
            model_config=model.config,
            arrays=arrays,
            moments=moments,
            epoch=epoch,
            train_config_snapshot=snapshot,
        )

    def to_model(self) -> SegmentModel:
        if self.category_fingerprint != category_fingerprint():
            raise ValidationError(
                "checkpoint was written with a different category ordering"
            )
        model = SegmentModel.create(self.model_config, seed=0)
        for name, arr in self.arrays.items():
            model.set_param(name, arr.copy())
        return model

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        named = {**self.arrays, **{k: v for k, v in self.moments.items()}}
        index = []
        blobs = []
        offset = 0
        for name in sorted(named):
            arr = np.ascontiguousarray(named[name], dtype="<f4")
            blob = arr.tobytes()
            index.append({"name": name, "shape": list(named[name].shape),
                          "offset": offset, "nbytes": len(blob)})
            blobs.append(blob)
            offset += len(blob)
        manifest = {
            "epoch": self.epoch,
            "category_fingerprint": self.category_fingerprint,
            "model_config": asdict(self.model_config),
            "train_config": self.train_config_snapshot,
            "param_names": sorted(self.arrays),
            "arrays": index,
        }
        header = json.dumps(manifest).encode()
        with path.open("wb") as fh:
            fh.write(CKPT_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for blob in blobs:
                fh.write(blob)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        path = Path(path)
        raw = path.read_bytes()
        if raw[:4] != CKPT_MAGIC:
            raise ValidationError(f"{path} is not a checkpoint file")
        (hlen,) = struct.unpack_from("<I", raw, 4)
        manifest = json.loads(raw[8 : 8 + hlen])
        base = 8 + hlen
        named = {}
        for item in manifest["arrays"]:
            start = base + item["offset"]
            arr = np.frombuffer(raw, dtype="<f4", count=item["nbytes"] // 4,
                                offset=start)
            named[item["name"]] = arr.reshape(item["shape"]).copy()
        param_names = set(manifest["param_names"])
        mc = manifest["model_config"]
        mc["spatial"] = tuple(mc["spatial"])
        mc["trunk_dims"] = tuple(mc["trunk_dims"])
        return cls(
            model_config=ModelConfig(**mc),
            arrays={k: v for k, v in named.items() if k in param_names},
            moments={k: v for k, v in named.items() if k not in param_names},
            epoch=manifest["epoch"],
            train_config_snapshot=manifest["train_config"],
            category_fingerprint=manifest["category_fingerprint"],
        )


def predict_video(entry, model: SegmentModel, seg_config: SegmentConfig,
                  backbone: BackboneSpec):
    """Per-frame score track of length M plus the predicted category name.

    Segment scores are concatenated with padded positions dropped; the video
    category is the argmax of the mean class-probability vector over segments.
    """
    grids = videopipe.segment_feature_grids(entry.video_id, entry.frame_count,
                                            seg_config, backbone)
    valid = videopipe.segment_valid_counts(entry.frame_count, seg_config)
    outputs = model.forward(grids.astype(model.config.np_dtype))
    scores = []
    for si, n_valid in enumerate(valid):
        scores.append(outputs.frame_scores[si, :n_valid])
    track = np.concatenate(scores)
    assert track.size == entry.frame_count
    mean_probs = outputs.class_probs.mean(axis=0)
    return track, CATEGORIES[int(np.argmax(mean_probs))]
