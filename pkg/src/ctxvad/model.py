"""End-to-end segment model: recurrent context stack feeding the multi-task
heads, with a single loss-and-gradients entry point for the trainer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import convlstm, heads
from .datamodel import NUM_CATEGORIES, ValidationError
from .heads import HeadConfig, HeadOutputs, LossConfig


@dataclass
class ModelConfig:
    input_channels: int = 128
    hidden_channels: int = 128
    layers: int = 2
    spatial: tuple[int, int] = (4, 4)
    trunk_dims: tuple[int, int] = (1024, 512)
    num_classes: int = NUM_CATEGORIES
    score_len: int = 80
    dtype: str = "float32"  # "float64" for gradient checking

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @property
    def flat_dim(self) -> int:
        return self.spatial[0] * self.spatial[1] * self.hidden_channels

    def head_config(self) -> HeadConfig:
        return HeadConfig(
            input_dim=self.flat_dim,
            trunk_dims=self.trunk_dims,
            num_classes=self.num_classes,
            score_len=self.score_len,
        )


@dataclass
class SegmentModel:
    config: ModelConfig
    layer_params: list  # [convlstm.ConvLSTMParams]
    head_params: heads.HeadParams

    @classmethod
    def create(cls, config: ModelConfig | None = None, seed: int = 0) -> "SegmentModel":
        config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        dtype = config.np_dtype
        layer_params = []
        cin = config.input_channels
        for _ in range(config.layers):
            layer_params.append(
                convlstm.init_params(
                    cin, config.hidden_channels, config.spatial, rng=rng, dtype=dtype
                )
            )
            cin = config.hidden_channels
        head_params = heads.init_head_params(config.head_config(), rng=rng, dtype=dtype)
        return cls(config=config, layer_params=layer_params, head_params=head_params)

    # -- parameter bookkeeping -------------------------------------------------

    def named_params(self) -> dict:
        """Stable name -> array view of every trainable parameter."""
        out = {}
        for idx, lp in enumerate(self.layer_params):
            for name, arr in lp.arrays.items():
                out[f"lstm{idx}.{name}"] = arr
        for name, arr in self.head_params.arrays.items():
            out[f"head.{name}"] = arr
        return out

    def set_param(self, name: str, value: np.ndarray):
        scope, key = name.split(".", 1)
        if scope.startswith("lstm"):
            self.layer_params[int(scope[4:])].arrays[key] = value
        elif scope == "head":
            self.head_params.arrays[key] = value
        else:
            raise ValidationError(f"unknown parameter {name!r}")

    def astype(self, dtype) -> "SegmentModel":
        for name, arr in self.named_params().items():
            self.set_param(name, arr.astype(dtype))
        self.config.dtype = np.dtype(dtype).name
        return self

    # -- forward / backward ----------------------------------------------------

    def forward(self, features: np.ndarray, return_cache: bool = False):
        """features: (B, K, H, W, Cin) -> HeadOutputs for the batch."""
        features = np.asarray(features, dtype=self.config.np_dtype)
        if features.ndim == 4:
            features = features[None]
        if return_cache:
            final_hidden, _, stack_cache = convlstm.run_stack(
                features, self.layer_params, return_cache=True
            )
        else:
            final_hidden, _ = convlstm.run_stack(features, self.layer_params)
            stack_cache = None
        flat = convlstm.flatten_global_feature(final_hidden)
        if return_cache:
            outputs, head_cache = heads.forward_heads(
                flat, self.head_params, return_cache=True
            )
            return outputs, {"stack": stack_cache, "head": head_cache,
                             "hidden_shape": final_hidden.shape}
        return heads.forward_heads(flat, self.head_params)

    def loss_and_grads(self, features: np.ndarray, class_target: np.ndarray,
                       frame_target: np.ndarray, mask: np.ndarray,
                       loss_config: LossConfig):
        """Total batch loss and gradients for every named parameter."""
        outputs, cache = self.forward(features, return_cache=True)
        total, d_cls, d_scr, weight_grads = heads.multitask_loss_and_logit_grads(
            outputs, class_target, frame_target, mask, loss_config, self.head_params
        )
        d_flat, head_grads = heads.heads_backward(d_cls, d_scr, cache["head"],
                                                  self.head_params)
        for name, g in weight_grads.items():
            head_grads[name] = head_grads[name] + g
        d_hidden = d_flat.reshape(cache["hidden_shape"])
        layer_grads = convlstm.stack_backward(d_hidden, cache["stack"],
                                              self.layer_params)
        grads = {}
        for idx, lg in enumerate(layer_grads):
            for name, arr in lg.items():
                grads[f"lstm{idx}.{name}"] = arr
        for name, arr in head_grads.items():
            grads[f"head.{name}"] = arr
        return total, grads, outputs
