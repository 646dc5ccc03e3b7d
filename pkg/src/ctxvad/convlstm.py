"""Convolutional LSTM cell and two-layer stack for the global context stream.

Gates are computed by same-padded 3x3 convolutions over the input and hidden
maps, with Hadamard peephole terms on the cell state:

    i = sigmoid(Wxi*X + Whi*H_prev + Wci.C_prev + bi)
    f = sigmoid(Wxf*X + Whf*H_prev + Wcf.C_prev + bf)
    C = f.C_prev + i.tanh(Wxc*X + Whc*H_prev + bc)
    o = sigmoid(Wxo*X + Who*H_prev + Wco.C + bo)
    H = o.tanh(C)

where * is convolution and . is elementwise product. Peephole weights are
per-position maps shaped like the cell state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import ValidationError
from .nnops import KERNEL, conv2d_same, conv2d_same_backward, im2col, sigmoid

DEFAULT_HIDDEN = 128
DEFAULT_SPATIAL = (4, 4)

GATES = ("i", "f", "c", "o")


@dataclass
class ConvLSTMParams:
    """Named weight arrays for one cell; see init_params for shapes."""

    arrays: dict  # name -> ndarray

    @property
    def hidden_channels(self) -> int:
        return self.arrays["w_xi"].shape[-1]

    @property
    def input_channels(self) -> int:
        return self.arrays["w_xi"].shape[2]

    @property
    def spatial(self) -> tuple[int, int]:
        return self.arrays["w_ci"].shape[:2]

    def __getitem__(self, name):
        return self.arrays[name]


@dataclass
class ConvLSTMState:
    hidden: np.ndarray  # (B, H, W, C_hid)
    cell: np.ndarray  # same shape

    def __post_init__(self):
        if self.hidden.shape != self.cell.shape:
            raise ValidationError(
                f"hidden shape {self.hidden.shape} != cell shape {self.cell.shape}"
            )


@dataclass
class StackConfig:
    layers: int = 2
    hidden_channels: int = DEFAULT_HIDDEN
    spatial: tuple[int, int] = DEFAULT_SPATIAL

    def __post_init__(self):
        if self.layers < 1:
            raise ValidationError("stack needs at least one layer")


def init_params(
    input_channels: int,
    hidden_channels: int = DEFAULT_HIDDEN,
    spatial: tuple[int, int] = DEFAULT_SPATIAL,
    rng: np.random.Generator | None = None,
    dtype=np.float32,
) -> ConvLSTMParams:
    """Fan-in scaled uniform kernels, +1 forget-gate bias, zero peepholes."""
    rng = rng or np.random.default_rng(0)
    arrays: dict[str, np.ndarray] = {}
    for gate in GATES:
        for src, cin in (("x", input_channels), ("h", hidden_channels)):
            fan_in = KERNEL * KERNEL * cin
            bound = 1.0 / np.sqrt(fan_in)
            arrays[f"w_{src}{gate}"] = rng.uniform(
                -bound, bound, size=(KERNEL, KERNEL, cin, hidden_channels)
            ).astype(dtype)
        bias = np.zeros(hidden_channels, dtype=dtype)
        if gate == "f":
            bias += 1.0
        arrays[f"b_{gate}"] = bias
    for gate in ("i", "f", "o"):
        arrays[f"w_c{gate}"] = np.zeros((*spatial, hidden_channels), dtype=dtype)
    return ConvLSTMParams(arrays)


def zero_state(
    batch: int, params: ConvLSTMParams, dtype=None
) -> ConvLSTMState:
    h, w = params.spatial
    c = params.hidden_channels
    dtype = dtype or params.arrays["w_xi"].dtype
    return ConvLSTMState(
        hidden=np.zeros((batch, h, w, c), dtype=dtype),
        cell=np.zeros((batch, h, w, c), dtype=dtype),
    )


def cell_step(x: np.ndarray, state: ConvLSTMState, params: ConvLSTMParams):
    """One recurrent step. Returns (new_state, cache) where cache feeds
    cell_step_backward."""
    if x.ndim != 4:
        raise ValidationError(f"input must be (B, H, W, C), got shape {x.shape}")
    if x.shape[1:3] != params.spatial:
        raise ValidationError(
            f"input spatial {x.shape[1:3]} != parameter spatial {params.spatial}"
        )
    if x.shape[-1] != params.input_channels:
        raise ValidationError(
            f"input channels {x.shape[-1]} != parameter input channels "
            f"{params.input_channels}"
        )
    if not np.isfinite(x).all():
        raise ValidationError("non-finite values in cell input")
    h_prev, c_prev = state.hidden, state.cell
    p = params.arrays

    x_cols = im2col(x)
    h_cols = im2col(h_prev)

    a_i = (
        conv2d_same(x, p["w_xi"], x_cols)[0]
        + conv2d_same(h_prev, p["w_hi"], h_cols)[0]
        + p["w_ci"] * c_prev
        + p["b_i"]
    )
    a_f = (
        conv2d_same(x, p["w_xf"], x_cols)[0]
        + conv2d_same(h_prev, p["w_hf"], h_cols)[0]
        + p["w_cf"] * c_prev
        + p["b_f"]
    )
    a_c = (
        conv2d_same(x, p["w_xc"], x_cols)[0]
        + conv2d_same(h_prev, p["w_hc"], h_cols)[0]
        + p["b_c"]
    )
    gate_i = sigmoid(a_i)
    gate_f = sigmoid(a_f)
    g = np.tanh(a_c)
    c_new = gate_f * c_prev + gate_i * g
    a_o = (
        conv2d_same(x, p["w_xo"], x_cols)[0]
        + conv2d_same(h_prev, p["w_ho"], h_cols)[0]
        + p["w_co"] * c_new
        + p["b_o"]
    )
    gate_o = sigmoid(a_o)
    tanh_c = np.tanh(c_new)
    h_new = gate_o * tanh_c

    cache = {
        "x_cols": x_cols,
        "h_cols": h_cols,
        "c_prev": c_prev,
        "i": gate_i,
        "f": gate_f,
        "g": g,
        "o": gate_o,
        "c_new": c_new,
        "tanh_c": tanh_c,
        "in_shape": x.shape,
        "hid_shape": h_prev.shape,
    }
    return ConvLSTMState(hidden=h_new, cell=c_new), cache


def cell_step_backward(dh: np.ndarray, dc: np.ndarray, cache: dict, params: ConvLSTMParams):
    """Backward through one step.

    dh, dc: gradients w.r.t. the step's outputs H_t and C_t (dc carries the
    contribution arriving from step t+1). Returns (dx, dh_prev, dc_prev, grads)
    with grads keyed like the parameter arrays.
    """
    p = params.arrays
    gate_i, gate_f, g, gate_o = cache["i"], cache["f"], cache["g"], cache["o"]
    c_prev, c_new, tanh_c = cache["c_prev"], cache["c_new"], cache["tanh_c"]

    grads = {}
    da_o = dh * tanh_c * gate_o * (1.0 - gate_o)
    dc_total = dc + dh * gate_o * (1.0 - tanh_c**2) + da_o * p["w_co"]
    grads["w_co"] = (da_o * c_new).sum(axis=0)
    grads["b_o"] = da_o.sum(axis=(0, 1, 2))

    da_f = dc_total * c_prev * gate_f * (1.0 - gate_f)
    da_i = dc_total * g * gate_i * (1.0 - gate_i)
    da_c = dc_total * gate_i * (1.0 - g**2)
    dc_prev = dc_total * gate_f + da_f * p["w_cf"] + da_i * p["w_ci"]
    grads["w_cf"] = (da_f * c_prev).sum(axis=0)
    grads["w_ci"] = (da_i * c_prev).sum(axis=0)
    grads["b_f"] = da_f.sum(axis=(0, 1, 2))
    grads["b_i"] = da_i.sum(axis=(0, 1, 2))
    grads["b_c"] = da_c.sum(axis=(0, 1, 2))

    b, hh, ww, cin = cache["in_shape"]
    chid = cache["hid_shape"][-1]
    dx = np.zeros(cache["in_shape"], dtype=dh.dtype)
    dh_prev = np.zeros(cache["hid_shape"], dtype=dh.dtype)
    for gate, da in (("i", da_i), ("f", da_f), ("c", da_c), ("o", da_o)):
        dxg, dwx = conv2d_same_backward(da, cache["x_cols"], p[f"w_x{gate}"])
        dhg, dwh = conv2d_same_backward(da, cache["h_cols"], p[f"w_h{gate}"])
        dx += dxg
        dh_prev += dhg
        grads[f"w_x{gate}"] = dwx
        grads[f"w_h{gate}"] = dwh
    return dx, dh_prev, dc_prev, grads


@dataclass
class StackCache:
    layer_caches: list  # [layer][time] step caches
    hidden_seqs: list  # [layer] list of per-step hidden maps


def run_stack(inputs, layer_params: list[ConvLSTMParams], return_cache: bool = False):
    """Run the layered recurrence over a sequence of input grids.

    inputs: array (B, K, H, W, Cin) or list of K (B, H, W, Cin) grids.
    Returns (final hidden of top layer, per-layer hidden sequences[, cache]).
    """
    if isinstance(inputs, np.ndarray):
        seq = [inputs[:, t] for t in range(inputs.shape[1])]
    else:
        seq = list(inputs)
    if not seq:
        raise ValidationError("run_stack needs at least one input grid")
    for layer_idx, params in enumerate(layer_params):
        expected = seq[0].shape[-1]
        if params.input_channels != expected:
            raise ValidationError(
                f"layer {layer_idx} expects {params.input_channels} input channels, "
                f"got {expected}"
            )
        batch = seq[0].shape[0]
        state = zero_state(batch, params, dtype=seq[0].dtype)
        hidden_seq = []
        caches = []
        for x in seq:
            state, cache = cell_step(x, state, params)
            hidden_seq.append(state.hidden)
            caches.append(cache)
        if return_cache:
            if layer_idx == 0:
                all_caches, all_hidden = [], []
            all_caches.append(caches)
            all_hidden.append(hidden_seq)
        seq = hidden_seq
    final_hidden = seq[-1]
    hidden_seqs = all_hidden if return_cache else None
    if return_cache:
        return final_hidden, hidden_seqs, StackCache(all_caches, all_hidden)
    return final_hidden, seq


def stack_backward(d_final_hidden: np.ndarray, cache: StackCache,
                   layer_params: list[ConvLSTMParams]):
    """Backward from the top layer's final hidden map to all cell parameters.

    Returns per-layer gradient dicts keyed like the parameter arrays.
    """
    n_layers = len(layer_params)
    steps = len(cache.layer_caches[0])
    grads = [
        {name: np.zeros_like(arr) for name, arr in params.arrays.items()}
        for params in layer_params
    ]
    # d_hidden_seq[t] holds gradient flowing into layer l's hidden output at step t
    d_hidden_seq = [np.zeros_like(h) for h in cache.hidden_seqs[-1]]
    d_hidden_seq[-1] = d_final_hidden
    for layer_idx in range(n_layers - 1, -1, -1):
        params = layer_params[layer_idx]
        d_inputs = None
        dh_next = np.zeros_like(d_hidden_seq[-1])
        dc_next = np.zeros_like(dh_next)
        for t in range(steps - 1, -1, -1):
            dh = d_hidden_seq[t] + dh_next
            dx, dh_next, dc_next = _step_back(
                dh, dc_next, cache.layer_caches[layer_idx][t], params, grads[layer_idx]
            )
            if d_inputs is None:
                d_inputs = [np.zeros_like(dx) for _ in range(steps)]
            d_inputs[t] = dx
        d_hidden_seq = d_inputs  # becomes the hidden-output gradient of the layer below
    return grads


def _step_back(dh, dc, step_cache, params, grad_acc):
    dx, dh_prev, dc_prev, g = cell_step_backward(dh, dc, step_cache, params)
    for name, val in g.items():
        grad_acc[name] += val
    return dx, dh_prev, dc_prev


def flatten_global_feature(hidden: np.ndarray) -> np.ndarray:
    """Row-major flatten of the top hidden map: (B, H, W, C) -> (B, H*W*C)."""
    if hidden.ndim == 3:
        hidden = hidden[None]
    b = hidden.shape[0]
    return hidden.reshape(b, -1)


def unflatten_global_feature(flat: np.ndarray, spatial=DEFAULT_SPATIAL,
                             channels=DEFAULT_HIDDEN) -> np.ndarray:
    h, w = spatial
    if flat.shape[-1] != h * w * channels:
        raise ValidationError(
            f"flat feature length {flat.shape[-1]} != {h}*{w}*{channels}"
        )
    return flat.reshape(flat.shape[0], h, w, channels)
