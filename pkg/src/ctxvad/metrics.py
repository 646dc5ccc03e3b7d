"""Frame-level ROC AUC, binarization, classification accuracy, and the
category confusion matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .datamodel import CATEGORIES, NUM_CATEGORIES, UsageError, ValidationError, category_index


class UndefinedAUCError(ValueError):
    """Raised when the frame labels contain only one class."""


@dataclass
class ScoredTrack:
    video_id: str
    scores: np.ndarray  # (M,), values in [0, 1]
    labels: np.ndarray  # (M,), binary

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int8)
        if scores.shape != labels.shape or scores.ndim != 1:
            raise ValidationError(
                f"scores shape {scores.shape} and labels shape {labels.shape} "
                "must be equal one-dimensional"
            )
        if not np.isfinite(scores).all():
            raise ValidationError(f"non-finite scores in track {self.video_id!r}")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValidationError(f"labels of track {self.video_id!r} must be binary")
        self.scores, self.labels = scores, labels


@dataclass
class RocResult:
    auc: float
    fpr: np.ndarray
    tpr: np.ndarray


def roc_auc(tracks) -> RocResult:
    """Micro-averaged frame-level AUC over the concatenated tracks.

    Computed as a rank statistic with midrank tie handling, which equals the
    trapezoidal integral of the ROC curve.
    """
    tracks = list(tracks)
    if not tracks:
        raise UsageError("roc_auc needs at least one scored track")
    scores = np.concatenate([t.scores for t in tracks])
    labels = np.concatenate([t.labels for t in tracks])
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError(
            f"AUC undefined: {n_pos} positive and {n_neg} negative frames"
        )
    ranks = rankdata(scores, method="average")
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    # ROC curve points at every distinct threshold, descending
    order = np.argsort(-scores, kind="mergesort")
    sorted_labels = labels[order]
    sorted_scores = scores[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(1 - sorted_labels)
    distinct = np.r_[np.nonzero(np.diff(sorted_scores))[0], sorted_labels.size - 1]
    tpr = np.r_[0.0, tp[distinct] / n_pos]
    fpr = np.r_[0.0, fp[distinct] / n_neg]
    return RocResult(auc=float(auc), fpr=fpr, tpr=tpr)


def binarize(scores, threshold: float = 0.5) -> np.ndarray:
    """1 where score >= threshold (inclusive)."""
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int8)


def accuracy(predicted, true) -> float:
    predicted, true = list(predicted), list(true)
    if not predicted or len(predicted) != len(true):
        raise UsageError("accuracy needs equal-length non-empty category lists")
    hits = sum(1 for p, t in zip(predicted, true) if p == t)
    return hits / len(predicted)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (14, 14) rows = true, columns = predicted

    def normalized(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        with np.errstate(invalid="ignore"):
            out = self.counts / totals
        return np.nan_to_num(out)

    def save(self, path):
        header = "true\\pred\t" + "\t".join(CATEGORIES)
        rows = [
            name + "\t" + "\t".join(str(int(v)) for v in row)
            for name, row in zip(CATEGORIES, self.counts)
        ]
        with open(path, "w") as fh:
            fh.write(header + "\n" + "\n".join(rows) + "\n")


def confusion(predicted, true) -> ConfusionMatrix:
    predicted, true = list(predicted), list(true)
    if len(predicted) != len(true):
        raise UsageError("confusion needs equal-length category lists")
    counts = np.zeros((NUM_CATEGORIES, NUM_CATEGORIES), dtype=np.int64)
    for p, t in zip(predicted, true):
        counts[category_index(t), category_index(p)] += 1
    return ConfusionMatrix(counts)


def save_roc_curve(result: RocResult, path):
    """Two-column (FPR, TPR) text file."""
    with open(path, "w") as fh:
        fh.write("# fpr\ttpr\n")
        for f, t in zip(result.fpr, result.tpr):
            fh.write(f"{f:.10g}\t{t:.10g}\n")
