"""Shared trunk and dual task heads: category classification and per-frame
anomaly score regression, with their losses and gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import NUM_CATEGORIES, ValidationError
from .nnops import affine, affine_backward, relu, relu_backward, sigmoid, softmax

LOG_FLOOR = 1e-12


@dataclass
class HeadConfig:
    input_dim: int = 2048
    trunk_dims: tuple[int, int] = (1024, 512)
    num_classes: int = NUM_CATEGORIES
    score_len: int = 80


@dataclass
class HeadParams:
    config: HeadConfig
    arrays: dict  # name -> ndarray

    def __getitem__(self, name):
        return self.arrays[name]

    def weight_matrices(self):
        """Weight matrices entering the L2 regularization term (biases excluded)."""
        return {k: v for k, v in self.arrays.items() if k.startswith("w_")}


@dataclass
class HeadOutputs:
    class_probs: np.ndarray  # (B, num_classes), rows on the simplex
    frame_scores: np.ndarray  # (B, score_len), entries in (0, 1)


@dataclass
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 10.0
    gamma: float = 0.0  # L2 term inside the classification loss; optimizer
    # weight decay (5e-4) normally carries this role instead.

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0 or self.gamma < 0:
            raise ValidationError("loss weights must be non-negative")


def init_head_params(config: HeadConfig | None = None,
                     rng: np.random.Generator | None = None,
                     dtype=np.float32) -> HeadParams:
    config = config or HeadConfig()
    rng = rng or np.random.default_rng(0)
    dims = [config.input_dim, *config.trunk_dims]
    arrays: dict[str, np.ndarray] = {}
    for k in range(len(dims) - 1):
        bound = 1.0 / np.sqrt(dims[k])
        arrays[f"w_trunk{k}"] = rng.uniform(
            -bound, bound, size=(dims[k], dims[k + 1])
        ).astype(dtype)
        arrays[f"b_trunk{k}"] = np.zeros(dims[k + 1], dtype=dtype)
    last = dims[-1]
    bound = 1.0 / np.sqrt(last)
    arrays["w_class"] = rng.uniform(-bound, bound, size=(last, config.num_classes)).astype(dtype)
    arrays["b_class"] = np.zeros(config.num_classes, dtype=dtype)
    arrays["w_score"] = rng.uniform(-bound, bound, size=(last, config.score_len)).astype(dtype)
    arrays["b_score"] = np.zeros(config.score_len, dtype=dtype)
    return HeadParams(config, arrays)


def forward_heads(global_feature: np.ndarray, params: HeadParams,
                  return_cache: bool = False):
    """Trunk of rectified affine layers, then softmax class head and logistic
    score head."""
    x = np.asarray(global_feature)
    if x.ndim == 1:
        x = x[None]
    if x.shape[-1] != params.config.input_dim:
        raise ValidationError(
            f"global feature length {x.shape[-1]} != {params.config.input_dim}"
        )
    if not np.isfinite(x).all():
        raise ValidationError("non-finite global feature")
    cache = {"inputs": [], "pre": []}
    h = x
    for k in range(len(params.config.trunk_dims)):
        cache["inputs"].append(h)
        pre = affine(h, params[f"w_trunk{k}"], params[f"b_trunk{k}"])
        cache["pre"].append(pre)
        h = relu(pre)
    cache["trunk_out"] = h
    class_logits = affine(h, params["w_class"], params["b_class"])
    score_logits = affine(h, params["w_score"], params["b_score"])
    outputs = HeadOutputs(
        class_probs=softmax(class_logits),
        frame_scores=sigmoid(score_logits),
    )
    if return_cache:
        return outputs, cache
    return outputs


def heads_backward(d_class_logits: np.ndarray, d_score_logits: np.ndarray,
                   cache: dict, params: HeadParams):
    """Backward from head logits to parameters and the global feature.

    Softmax/logistic derivatives are folded into the logit gradients by the
    loss functions, so this layer only propagates affine/relu chains.
    """
    grads: dict[str, np.ndarray] = {}
    h = cache["trunk_out"]
    dh_c, grads["w_class"], grads["b_class"] = affine_backward(
        d_class_logits, h, params["w_class"]
    )
    dh_s, grads["w_score"], grads["b_score"] = affine_backward(
        d_score_logits, h, params["w_score"]
    )
    dh = dh_c + dh_s
    for k in range(len(params.config.trunk_dims) - 1, -1, -1):
        dpre = relu_backward(dh, cache["pre"][k])
        dh, grads[f"w_trunk{k}"], grads[f"b_trunk{k}"] = affine_backward(
            dpre, cache["inputs"][k], params[f"w_trunk{k}"]
        )
    return dh, grads


def _check_one_hot(target: np.ndarray, num_classes: int):
    target = np.asarray(target)
    if target.shape[-1] != num_classes:
        raise ValidationError(f"one-hot target length {target.shape[-1]} != {num_classes}")
    ok = np.isin(target, (0, 1)).all() and (target.sum(axis=-1) == 1).all()
    if not ok:
        raise ValidationError("classification target must be one-hot")
    return target


def loss_classification(class_probs: np.ndarray, target_one_hot: np.ndarray,
                        params: HeadParams | None = None, gamma: float = 0.0) -> float:
    """Cross-entropy against a one-hot category target, plus gamma * ||W||^2
    over all trunk and head weight matrices."""
    probs = np.atleast_2d(class_probs)
    target = np.atleast_2d(_check_one_hot(target_one_hot, probs.shape[-1]))
    ce = -(target * np.log(np.maximum(probs, LOG_FLOOR))).sum(axis=-1)
    total = float(ce.sum())
    if gamma > 0.0:
        if params is None:
            raise ValidationError("gamma > 0 requires head parameters for the L2 term")
        total += gamma * sum(
            float((w.astype(np.float64) ** 2).sum())
            for w in params.weight_matrices().values()
        )
    return total


def smooth_penalty(x: np.ndarray) -> np.ndarray:
    """0.5 x^2 inside |x| <= 1, |x| - 0.5 outside; continuous with its slope."""
    ax = np.abs(x)
    return np.where(ax <= 1.0, 0.5 * x * x, ax - 0.5)


def smooth_penalty_grad(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -1.0, 1.0)


def loss_score(frame_scores: np.ndarray, frame_targets: np.ndarray,
               mask: np.ndarray | None = None) -> float:
    """Summed smooth regression penalty on per-frame residuals; padded frames
    are masked out of the sum."""
    s = np.atleast_2d(frame_scores)
    t = np.atleast_2d(frame_targets)
    if s.shape != t.shape:
        raise ValidationError(f"score shape {s.shape} != target shape {t.shape}")
    if not np.isin(t, (0, 1)).all():
        raise ValidationError("frame targets must be binary")
    residual = s - t
    pen = smooth_penalty(residual)
    if mask is not None:
        mask = np.atleast_2d(mask)
        if mask.shape != s.shape:
            raise ValidationError(f"mask shape {mask.shape} != score shape {s.shape}")
        pen = pen * mask
    return float(pen.sum())


def loss_total(l1: float, l2: float, config: LossConfig) -> float:
    if not (np.isfinite(l1) and np.isfinite(l2)):
        raise ValidationError("loss terms must be finite")
    return config.lambda1 * l1 + config.lambda2 * l2


def multitask_loss_and_logit_grads(outputs: HeadOutputs, class_target: np.ndarray,
                                   frame_target: np.ndarray, mask: np.ndarray,
                                   config: LossConfig, params: HeadParams):
    """Total loss over a batch and its gradients w.r.t. the head logits.

    Returns (loss, d_class_logits, d_score_logits, weight_grads) where
    weight_grads carries the gamma L2 contribution (empty when gamma is 0).
    """
    probs, scores = outputs.class_probs, outputs.frame_scores
    target = np.atleast_2d(_check_one_hot(class_target, probs.shape[-1]))
    l1 = loss_classification(probs, target, params, config.gamma)
    l2 = loss_score(scores, frame_target, mask)
    total = loss_total(l1, l2, config)

    d_class_logits = config.lambda1 * (probs - target)
    d_score = config.lambda2 * smooth_penalty_grad(scores - frame_target) * mask
    d_score_logits = d_score * scores * (1.0 - scores)
    weight_grads = {}
    if config.gamma > 0.0:
        weight_grads = {
            name: config.lambda1 * 2.0 * config.gamma * w
            for name, w in params.weight_matrices().items()
        }
    return total, d_class_logits, d_score_logits, weight_grads
